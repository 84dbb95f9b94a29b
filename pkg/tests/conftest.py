# Anchors the test directory on sys.path so the suite can import `generators`.
