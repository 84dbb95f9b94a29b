"""Core types and exact transition operators for credal transition models.

A credal transition model assigns to each state a finite list of candidate
probability rows. These are the extreme points of a convex set of transition
matrices whose rows vary independently of each other, so every optimisation
used here (a best or worst expectation of a value vector, row by row) is a
finite maximisation over the stored vertices.

Value vectors may contain ``numpy.inf`` to mark states with no finite
expectation. All dot products follow the convention that a zero-probability
entry contributes nothing even when paired with an infinite value, and they
sum strictly left to right over state indices so repeated runs reproduce
results bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: Largest accepted deviation of a probability row sum from one. Rows inside
#: the tolerance are rescaled to sum to one exactly; rows outside are rejected.
SUM_TOL = 1e-8

_SENSES = ("upper", "lower")


class ModelValidationError(ValueError):
    """A credal model violated a structural invariant.

    ``violations`` lists every failed check, each naming the offending state
    label and vertex position.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__(
            "invalid credal model:\n"
            + "\n".join(f"  - {v}" for v in self.violations)
        )


@dataclass(frozen=True)
class StateSpace:
    """Ordered finite state space with unique string labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if len(self.labels) < 2:
            raise ValueError("a state space needs at least two states")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("state labels must be unique")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise KeyError(f"unknown state label {label!r}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(x) for x in labels]


@dataclass(frozen=True)
class CredalRow:
    """Extreme points of one state's set of transition rows, shape (k, n)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        object.__setattr__(self, "vertices", v)

    @property
    def count(self) -> int:
        return self.vertices.shape[0]


@dataclass(frozen=True)
class CredalMatrix:
    """Per-state credal rows over a shared state space."""

    space: StateSpace
    rows: tuple[CredalRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def size(self) -> int:
        return self.space.size

    def vertices(self, state: int) -> np.ndarray:
        return self.rows[state].vertices

    def vertex_count(self, state: int) -> int:
        return self.rows[state].count

    @classmethod
    def from_rows(cls, labels: Iterable[str], row_vertices) -> "CredalMatrix":
        """Validate, renormalize and wrap raw per-state vertex lists.

        Raises :class:`ModelValidationError` listing every violation when the
        data is malformed; otherwise every vertex is rescaled to sum to one
        exactly.
        """
        space = StateSpace(tuple(labels))
        rows = []
        for verts in row_vertices:
            arr = [np.asarray(v, dtype=float).ravel() for v in verts]
            if arr and len({a.shape for a in arr}) == 1:
                rows.append(CredalRow(np.stack(arr)))
            elif not arr:
                rows.append(CredalRow(np.zeros((0, space.size))))
            else:
                # ragged vertices: pad into an invalid marker row so that
                # validation can still name the coordinates
                width = max(a.size for a in arr)
                padded = np.full((len(arr), width), np.nan)
                for i, a in enumerate(arr):
                    padded[i, : a.size] = a
                rows.append(CredalRow(padded))
        model = cls(space, tuple(rows))
        problems = validate(model)
        if problems:
            raise ModelValidationError(problems)
        return _renormalize(model)

    @classmethod
    def precise(cls, labels: Iterable[str], matrix) -> "CredalMatrix":
        """Wrap a single transition matrix as singleton credal rows."""
        m = np.asarray(matrix, dtype=float)
        return cls.from_rows(labels, [[row] for row in m])


def validate(model: CredalMatrix) -> list[str]:
    """Check every structural invariant of ``model``.

    Returns one message per violation (empty list when the model is well
    formed). Violations are reported as data rather than raised so callers
    can collect and display all of them at once.
    """
    problems: list[str] = []
    n = model.space.size
    if len(model.rows) != n:
        problems.append(f"model has {len(model.rows)} rows for {n} states")
    for i, row in enumerate(model.rows):
        label = model.space.labels[i] if i < n else f"#{i}"
        verts = row.vertices
        if verts.shape[0] == 0:
            problems.append(f"row {label!r}: no vertices")
            continue
        if verts.shape[1] != n:
            problems.append(
                f"row {label!r}: vertices have {verts.shape[1]} entries, expected {n}"
            )
            continue
        normalized = []
        for j, v in enumerate(verts):
            bad = False
            for k, entry in enumerate(v):
                if math.isnan(entry):
                    problems.append(
                        f"row {label!r} vertex {j}: entry {k} is not a number"
                    )
                    bad = True
                elif entry < 0:
                    problems.append(
                        f"row {label!r} vertex {j}: entry {k} is negative ({entry!r})"
                    )
                elif entry > 1:
                    problems.append(
                        f"row {label!r} vertex {j}: entry {k} exceeds 1 ({entry!r})"
                    )
            if bad:
                normalized.append(None)
                continue
            total = float(v.sum())
            if abs(total - 1.0) > SUM_TOL:
                problems.append(
                    f"row {label!r} vertex {j}: entries sum to {total!r}, not 1"
                )
            if total > 0:
                normalized.append(v / total)
            else:
                normalized.append(None)
        for j in range(len(normalized)):
            for k in range(j + 1, len(normalized)):
                if normalized[j] is not None and normalized[k] is not None:
                    if np.array_equal(normalized[j], normalized[k]):
                        problems.append(
                            f"row {label!r}: vertices {j} and {k} coincide"
                        )
    return problems


def _renormalize(model: CredalMatrix) -> CredalMatrix:
    rows = []
    for row in model.rows:
        sums = row.vertices.sum(axis=1, keepdims=True)
        rows.append(CredalRow(row.vertices / sums))
    return CredalMatrix(model.space, tuple(rows))


def ext_dot(weights, values) -> float:
    """Dot product with the 0 * inf = 0 convention, summed left to right."""
    total = 0.0
    for w, v in zip(weights, values):
        if w > 0.0:
            if v == math.inf:
                return math.inf
            total += w * v
    return total


def ext_matvec(matrix, values) -> np.ndarray:
    """Row-wise :func:`ext_dot` of a dense matrix against a value vector."""
    return np.array([ext_dot(row, values) for row in matrix])


def _require_sense(sense: str) -> None:
    if sense not in _SENSES:
        raise ValueError(f"sense must be 'upper' or 'lower', got {sense!r}")


def _check_values(model: CredalMatrix, values) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    if f.shape != (model.size,):
        raise ValueError(
            f"value vector has shape {f.shape}, expected ({model.size},)"
        )
    if np.isnan(f).any():
        raise ValueError("value vector contains NaN")
    if (f < 0).any():
        raise ValueError("value vector entries must be non-negative")
    return f


def apply_upper(model: CredalMatrix, values) -> np.ndarray:
    """Componentwise largest expectation of ``values`` over each state's row set.

    The supremum over each convex row set is attained at a vertex because the
    objective is linear in the row, so a scan of the stored vertices is exact.
    """
    f = _check_values(model, values)
    return np.array(
        [max(ext_dot(v, f) for v in model.vertices(i)) for i in range(model.size)]
    )


def apply_lower(model: CredalMatrix, values) -> np.ndarray:
    """Componentwise smallest expectation of ``values``; see :func:`apply_upper`."""
    f = _check_values(model, values)
    return np.array(
        [min(ext_dot(v, f) for v in model.vertices(i)) for i in range(model.size)]
    )


def greedy_selection(model: CredalMatrix, values, sense: str) -> np.ndarray:
    """Per state, the lowest vertex index attaining the upper or lower expectation.

    Assembling the selected vertices with :func:`selection_matrix` and applying
    :func:`ext_matvec` reproduces the output of :func:`apply_upper` (or
    :func:`apply_lower`) exactly, since both paths evaluate the same dot
    products in the same order.
    """
    _require_sense(sense)
    f = _check_values(model, values)
    better = (lambda a, b: a > b) if sense == "upper" else (lambda a, b: a < b)
    pick = np.zeros(model.size, dtype=np.int64)
    for i in range(model.size):
        verts = model.vertices(i)
        best = ext_dot(verts[0], f)
        for j in range(1, len(verts)):
            val = ext_dot(verts[j], f)
            if better(val, best):
                best = val
                pick[i] = j
    return pick


def selection_matrix(model: CredalMatrix, selection) -> np.ndarray:
    """Assemble the transition matrix induced by per-state vertex choices."""
    sel = np.asarray(selection, dtype=int)
    if sel.shape != (model.size,):
        raise ValueError(
            f"selection has shape {sel.shape}, expected ({model.size},)"
        )
    rows = []
    for i in range(model.size):
        if not 0 <= sel[i] < model.vertex_count(i):
            raise ValueError(
                f"selection index {sel[i]} out of range for row "
                f"{model.space.labels[i]!r} with {model.vertex_count(i)} vertices"
            )
        rows.append(model.vertices(i)[sel[i]])
    return np.stack(rows)
