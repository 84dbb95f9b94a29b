"""Joint walks of interchangeable agents and their expected meeting times.

All agents share one credal model. Each observes the current states of the
others and selects a vertex of its own row, so the joint walk over state
tuples is again a credal chain whose rows factor into per-agent choices:
the candidate joint rows are exactly the outer products of per-agent
vertices, enumerated on demand and never stored as an explicit list over
the product alphabet. Meeting is hitting the diagonal of the product space.

Either the full ordered product (``n**m`` states) or its quotient under
agent permutation (multisets, ``C(n+m-1, m)`` states) can be built. Both
let every agent choose its own vertex, co-located or not; the quotient only
aggregates destinations into multisets, which makes it an exact lumping of
the permutation-symmetric full walk. The quotient is the cheaper route;
:func:`quotient_consistency_check` verifies against the full product that
nothing is lost.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import CredalMatrix, StateSpace, _require_sense
from .reach import Classification, classify_view
from .solver import HittingResult, solve_view_policy
from .chain import TransitionMatrix, hitting_times

#: Refusal threshold for the number of joint states.
MAX_PRODUCT_STATES = 1_000_000

_MODES = ("full", "quotient")
_BELIEFS = ("degenerate", "vacuous", "mixture")


@dataclass(frozen=True)
class ProductSpace:
    """Indexed joint state space of ``agents`` walkers on a shared base space.

    ``states`` holds ordered tuples (full mode) or sorted tuples standing for
    multisets (quotient mode); the tuple <-> dense index mapping is a
    bijection and the diagonal tuples are the meeting target.
    """

    base: StateSpace
    agents: int
    mode: str
    states: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {s: i for i, s in enumerate(self.states)}
        )
        diag = frozenset(
            i for i, s in enumerate(self.states) if len(set(s)) == 1
        )
        object.__setattr__(self, "_diagonal", diag)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def diagonal(self) -> frozenset[int]:
        return self._diagonal

    def target_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[list(self._diagonal)] = True
        return mask

    def canonical(self, joint: tuple[int, ...]) -> tuple[int, ...]:
        joint = tuple(int(z) for z in joint)
        return tuple(sorted(joint)) if self.mode == "quotient" else joint

    def index_of(self, joint: tuple[int, ...]) -> int:
        key = self.canonical(joint)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"joint state {joint!r} is not in the product space") from None

    def label(self, index: int) -> str:
        return "(" + ",".join(self.base.labels[z] for z in self.states[index]) + ")"


def build_product_space(space: StateSpace, agents: int, mode: str = "quotient") -> ProductSpace:
    """Enumerate and index the joint state space.

    Full mode lists all ``n**agents`` ordered tuples; quotient mode lists the
    ``C(n+agents-1, agents)`` multisets as sorted tuples. Sizes beyond
    ``MAX_PRODUCT_STATES`` are refused.
    """
    if agents < 2:
        raise ValueError("a joint walk needs at least two agents")
    if mode not in _MODES:
        raise ValueError(f"mode must be 'full' or 'quotient', got {mode!r}")
    n = space.size
    count = n**agents if mode == "full" else math.comb(n + agents - 1, agents)
    if count > MAX_PRODUCT_STATES:
        raise ValueError(
            f"the {mode} product space would have {count} states, above the "
            f"{MAX_PRODUCT_STATES} limit"
        )
    if mode == "full":
        states = tuple(itertools.product(range(n), repeat=agents))
    else:
        states = tuple(itertools.combinations_with_replacement(range(n), agents))
    return ProductSpace(base=space, agents=agents, mode=mode, states=states)


def _ext_dot_dense(row: np.ndarray, f: np.ndarray) -> float:
    """Dense dot product with the 0 * inf = 0 convention."""
    inf_mask = np.isinf(f)
    if inf_mask.any() and (row[inf_mask] > 0).any():
        return math.inf
    return float(row @ np.where(inf_mask, 0.0, f))


class JointChoices:
    """Choice view of the joint walk; rows are built on demand from factor rows.

    A choice assigns one vertex index per agent in both modes; co-located
    agents may pick different vertices, since the set of joint rows induced
    by the walkers' independent decisions contains all such combinations.
    Quotient mode only changes the destinations, which are aggregated into
    multisets, so its values coincide exactly with the full product's (the
    quotient is a lumping of a permutation-symmetric chain). Choice tuples
    are enumerated in lexicographic order, which fixes the greedy tie-break
    to the lowest tuple.
    """

    def __init__(self, model: CredalMatrix, product: ProductSpace):
        self.model = model
        self.product = product
        self.n = product.size
        n_base = model.size
        m = product.agents
        self._tensor_shape = (n_base,) * m
        ordered_count = n_base**m
        if product.mode == "quotient":
            if ordered_count > 16_000_000:
                raise ValueError(
                    "quotient rows need an ordered expansion of size "
                    f"{ordered_count}, which is above the supported limit"
                )
            agg = np.empty(ordered_count, dtype=np.int64)
            for flat, tup in enumerate(itertools.product(range(n_base), repeat=m)):
                agg[flat] = product.index_of(tup)
            self._agg = agg
        else:
            self._agg = None
        self._support_cache: dict[int, np.ndarray] = {}
        self._tuple_cache: dict[int, list[tuple[int, ...]]] = {}

    def nchoices(self, state: int) -> int:
        out = 1
        for s in self.product.states[state]:
            out *= self.model.vertex_count(s)
        return out

    def choice_tuples(self, state: int) -> list[tuple[int, ...]]:
        cached = self._tuple_cache.get(state)
        if cached is None:
            ranges = [
                range(self.model.vertex_count(s)) for s in self.product.states[state]
            ]
            cached = list(itertools.product(*ranges))
            self._tuple_cache[state] = cached
        return cached

    def flat_choice(self, state: int, choice_tuple: tuple[int, ...]) -> int:
        joint = self.product.states[state]
        if len(choice_tuple) != len(joint):
            raise ValueError(
                f"joint state {self.product.label(state)} takes "
                f"{len(joint)} vertex choices, one per agent, got {len(choice_tuple)}"
            )
        flat = 0
        for z, c in zip(joint, choice_tuple):
            count = self.model.vertex_count(z)
            if not 0 <= int(c) < count:
                raise ValueError(
                    f"vertex index {c} out of range for state "
                    f"{self.model.space.labels[z]!r} with {count} vertices"
                )
            flat = flat * count + int(c)
        return flat

    def _expand(self, f: np.ndarray) -> np.ndarray:
        if self._agg is None:
            return f.reshape(self._tensor_shape)
        return f[self._agg].reshape(self._tensor_shape)

    def _einsum(self, state: int, tensor: np.ndarray) -> np.ndarray:
        joint = self.product.states[state]
        axis = string.ascii_lowercase
        choice = string.ascii_uppercase
        terms = []
        operands = []
        for j, z in enumerate(joint):
            terms.append(choice[j] + axis[j])
            operands.append(self.model.vertices(z))
        m = len(joint)
        expr = ",".join(terms) + "," + axis[:m] + "->" + choice[:m]
        return np.einsum(expr, *operands, tensor)

    def values(self, state: int, f) -> np.ndarray:
        """Expectation of ``f`` under every choice, with the 0 * inf = 0 rule.

        One tensor contraction evaluates all choices at once; a second
        contraction against the inf-mask decides which choices put positive
        mass on an infinite destination.
        """
        f = np.asarray(f, dtype=float)
        tensor = self._expand(f)
        inf_mask = np.isinf(tensor)
        if inf_mask.any():
            finite_part = self._einsum(state, np.where(inf_mask, 0.0, tensor))
            inf_weight = self._einsum(state, inf_mask.astype(float))
            out = np.where(inf_weight > 0, math.inf, finite_part)
        else:
            out = self._einsum(state, tensor)
        return out.ravel()

    def row(self, state: int, choice: int) -> np.ndarray:
        """Dense joint distribution of one choice over the product states."""
        tup = self.choice_tuples(state)[choice]
        joint = self.product.states[state]
        ordered = None
        for z, c in zip(joint, tup):
            factor = self.model.vertices(z)[c]
            ordered = factor if ordered is None else np.multiply.outer(ordered, factor)
        flat = ordered.ravel()
        if self._agg is None:
            return flat
        return np.bincount(self._agg, weights=flat, minlength=self.n)

    def supports(self, state: int) -> np.ndarray:
        cached = self._support_cache.get(state)
        if cached is None:
            cached = np.stack(
                [self.row(state, c) > 0.0 for c in range(self.nchoices(state))]
            )
            self._support_cache[state] = cached
        return cached


class _FixedChoices:
    """A joint view pinned to one selection: a single candidate row per state."""

    def __init__(self, inner: JointChoices, fixed: dict[int, int]):
        self.inner = inner
        self.fixed = fixed
        self.n = inner.n

    def nchoices(self, state: int) -> int:
        return 1

    def values(self, state: int, f) -> np.ndarray:
        return np.array([_ext_dot_dense(self.row(state, 0), np.asarray(f, float))])

    def row(self, state: int, choice: int) -> np.ndarray:
        return self.inner.row(state, self.fixed[state])

    def supports(self, state: int) -> np.ndarray:
        return self.row(state, 0)[None, :] > 0.0


def joint_transition_weight(
    model: CredalMatrix,
    product: ProductSpace,
    origin: tuple[int, ...],
    choice: tuple[int, ...],
    destination: tuple[int, ...],
) -> float:
    """Probability that the chosen vertices move ``origin`` to ``destination``.

    ``choice`` holds one vertex index per agent, aligned with the canonical
    form of ``origin`` (sorted in quotient mode). In quotient mode the
    weight sums over every ordered arrangement of the destination multiset.
    For a fixed origin and choice the weights over all destinations sum to
    one.
    """
    origin = product.canonical(origin)
    destination = product.canonical(destination)
    if len(origin) != product.agents or len(destination) != product.agents:
        raise ValueError("joint states must list one base state per agent")
    if len(choice) != product.agents:
        raise ValueError("a joint choice takes one vertex index per agent")
    rows = [model.vertices(z)[c] for z, c in zip(origin, choice)]
    if product.mode == "full":
        weight = 1.0
        for row, dest in zip(rows, destination):
            weight *= row[dest]
        return float(weight)
    total = 0.0
    for arrangement in set(itertools.permutations(destination)):
        weight = 1.0
        for row, dest in zip(rows, arrangement):
            weight *= row[dest]
        total += weight
    return float(total)


@dataclass
class MeetingResult:
    """Expected meeting times of a joint walk plus the optimizing choices.

    ``values`` is indexed by the product space, zero on the diagonal.
    ``selections`` holds per joint state the chosen vertex tuple; it is None
    on the diagonal and a lowest-index placeholder on states whose value is
    infinite, since no choice matters there. For a mixture belief the
    classification and selections describe the vacuous component, whose
    optimizers do not depend on the mixing weight.
    """

    product: ProductSpace
    belief: str
    sense: str | None
    epsilon: float | None
    values: np.ndarray
    selections: tuple[tuple[int, ...] | None, ...]
    classification: Classification
    iterations: int
    residual: float
    converged: bool

    def value_at(self, joint: tuple[int, ...]) -> float:
        return float(self.values[self.product.index_of(joint)])

    def matrix(self) -> np.ndarray:
        """Meeting times as an (n, n) start-pair matrix; two agents only."""
        if self.product.agents != 2:
            raise ValueError("the matrix form exists only for two agents")
        n = self.product.base.size
        out = np.empty((n, n))
        for x in range(n):
            for y in range(n):
                out[x, y] = self.values[self.product.index_of((x, y))]
        return out


def _normalize_selection(
    view: JointChoices,
    selection: Mapping[tuple[int, ...], tuple[int, ...]] | None,
) -> dict[int, int]:
    """Resolve a user selection to flat choice indices on every joint state.

    Unspecified joint states fall back to vertex 0 for every agent. Keys are
    joint state tuples (canonicalized), values are vertex-index tuples.
    """
    product = view.product
    fixed = {i: 0 for i in range(product.size)}
    if selection is not None:
        for joint, tup in selection.items():
            i = product.index_of(tuple(joint))
            fixed[i] = view.flat_choice(i, tuple(tup))
    return fixed


def _selection_tuples(view: JointChoices, flat: dict[int, int] | np.ndarray) -> tuple:
    product = view.product
    out: list[tuple[int, ...] | None] = []
    for i in range(product.size):
        if i in product.diagonal:
            out.append(None)
        else:
            c = flat[i] if isinstance(flat, dict) else int(flat[i])
            out.append(view.choice_tuples(i)[c])
    return tuple(out)


def _wrap_result(view, belief, sense, epsilon, res: HittingResult) -> MeetingResult:
    return MeetingResult(
        product=view.product,
        belief=belief,
        sense=sense,
        epsilon=epsilon,
        values=res.values,
        selections=_selection_tuples(view, res.selection),
        classification=res.classification,
        iterations=res.iterations,
        residual=res.residual,
        converged=res.converged,
    )


def _solve_degenerate(view: JointChoices, fixed: dict[int, int], tol, max_iter) -> HittingResult:
    pinned = _FixedChoices(view, fixed)
    res = solve_view_policy(pinned, view.product.target_mask(), "upper", tol, max_iter)
    res.selection = np.array([fixed[i] for i in range(view.n)], dtype=np.int64)
    return res


def _mix_values(deg: np.ndarray, vac: np.ndarray, epsilon: float) -> np.ndarray:
    """Combine component values; any infinite component with positive weight wins."""
    if epsilon == 0.0:
        return deg.copy()
    if epsilon == 1.0:
        return vac.copy()
    out = np.empty_like(deg)
    infinite = np.isinf(deg) | np.isinf(vac)
    out[infinite] = math.inf
    out[~infinite] = (1.0 - epsilon) * deg[~infinite] + epsilon * vac[~infinite]
    return out


def meet(
    model: CredalMatrix,
    agents: int = 2,
    belief: str = "vacuous",
    sense: str = "upper",
    mode: str = "quotient",
    selection: Mapping | None = None,
    epsilon: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 1_000,
) -> MeetingResult:
    """Expected meeting times of ``agents`` walkers under a belief about their choices.

    belief = "degenerate"
        The walkers use exactly the given ``selection`` (vertex 0 everywhere
        when omitted); the joint chain is precise and one linear solve, with
        its infinite-state pre-pass, gives the values.
    belief = "vacuous"
        Nothing is known about the choices; policy iteration over the joint
        choice sets returns the tight upper or lower envelope together with
        the optimizing selection. Scanning vertex tuples is exact because
        the joint rows depend multilinearly on the per-agent rows, so the
        extreme values are attained at tuples of vertices.
    belief = "mixture"
        With weight ``1 - epsilon`` the walkers follow ``selection`` and with
        weight ``epsilon`` they are unconstrained; the value is the affine
        combination of the two components, infinite whenever a positively
        weighted component is infinite.
    """
    if belief not in _BELIEFS:
        raise ValueError(
            f"belief must be one of {', '.join(_BELIEFS)}, got {belief!r}"
        )
    if belief != "degenerate":
        _require_sense(sense)
    product = build_product_space(model.space, agents, mode)
    view = JointChoices(model, product)
    if belief == "degenerate":
        fixed = _normalize_selection(view, selection)
        res = _solve_degenerate(view, fixed, tol, max_iter)
        return _wrap_result(view, belief, None, None, res)
    if belief == "vacuous":
        res = solve_view_policy(view, product.target_mask(), sense, tol, max_iter)
        return _wrap_result(view, belief, sense, None, res)
    if epsilon is None or not 0.0 <= float(epsilon) <= 1.0:
        raise ValueError("a mixture belief needs epsilon in [0, 1]")
    epsilon = float(epsilon)
    fixed = _normalize_selection(view, selection)
    deg = _solve_degenerate(view, fixed, tol, max_iter)
    vac = solve_view_policy(view, product.target_mask(), sense, tol, max_iter)
    mixed = _wrap_result(view, "mixture", sense, epsilon, vac)
    mixed.values = _mix_values(deg.values, vac.values, epsilon)
    mixed.converged = deg.converged and vac.converged
    mixed.iterations = deg.iterations + vac.iterations
    mixed.residual = max(deg.residual, vac.residual)
    return mixed


def exhaustive_meeting_times(
    model: CredalMatrix,
    sense: str,
    max_assignments: int = 200_000,
) -> np.ndarray:
    """Two-agent meeting-time envelope by brute force over stationary selections.

    Enumerates every assignment of one vertex pair to every ordered off
    diagonal pair state, solves each resulting precise joint chain, and
    keeps the componentwise extreme. Exponential in the number of pair
    states, intended as a small-scale oracle.
    """
    _require_sense(sense)
    product = build_product_space(model.space, 2, "full")
    view = JointChoices(model, product)
    off = [i for i in range(product.size) if i not in product.diagonal]
    total = 1
    for i in off:
        total *= view.nchoices(i)
    if total > max_assignments:
        raise ValueError(
            f"{total} stationary selections exceed the enumeration limit "
            f"{max_assignments}"
        )
    space = StateSpace(tuple(product.label(i) for i in range(product.size)))
    rows_cache = {
        i: [view.row(i, c) for c in range(view.nchoices(i))] for i in off
    }
    base = np.zeros((product.size, product.size))
    for d in product.diagonal:
        base[d, d] = 1.0
    diag = sorted(product.diagonal)
    n = model.size
    best = None
    reduce = np.maximum if sense == "upper" else np.minimum
    for combo in itertools.product(*[range(view.nchoices(i)) for i in off]):
        entries = base.copy()
        for i, c in zip(off, combo):
            entries[i] = rows_cache[i][c]
        h = hitting_times(TransitionMatrix(space, entries), diag)
        best = h if best is None else reduce(best, h)
    return best.reshape(n, n)


@dataclass(frozen=True)
class QuotientReport:
    """Comparison of full-product and quotient-product meeting values."""

    full_states: int
    quotient_states: int
    max_discrepancy: float
    infinity_matches: bool
    mismatched: tuple[str, ...]


def _expand_selection(selection: Mapping | None, space: StateSpace, agents: int):
    """Rewrite a quotient-form selection as a full-product selection.

    Quotient choices are aligned with the sorted tuple; each ordered tuple
    hands the group's vertex indices to its agents in positional order
    (any assignment within a group aggregates to the same joint row).
    """
    if selection is None:
        return None
    normalized = {tuple(sorted(k)): tuple(v) for k, v in selection.items()}
    expanded = {}
    for joint in itertools.product(range(space.size), repeat=agents):
        key = tuple(sorted(joint))
        if key not in normalized:
            continue
        pool = {z: [c for s, c in zip(key, normalized[key]) if s == z] for z in set(key)}
        taken = {z: 0 for z in set(key)}
        tup = []
        for z in joint:
            tup.append(pool[z][taken[z]])
            taken[z] += 1
        expanded[joint] = tuple(tup)
    return expanded


def quotient_consistency_check(
    model: CredalMatrix,
    agents: int = 2,
    belief: str = "vacuous",
    sense: str = "upper",
    selection: Mapping | None = None,
    epsilon: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 1_000,
) -> QuotientReport:
    """Solve on both the full and the quotient product and compare.

    Reports the largest absolute difference between the value at an ordered
    tuple and the value at its multiset (over entries finite in both), and
    whether the infinite patterns agree. A degenerate or mixture selection
    is given in quotient form and expanded symmetrically for the full run.
    """
    full = meet(
        model, agents, belief, sense, "full",
        selection=_expand_selection(selection, model.space, agents),
        epsilon=epsilon, tol=tol, max_iter=max_iter,
    )
    quot = meet(
        model, agents, belief, sense, "quotient",
        selection=selection, epsilon=epsilon, tol=tol, max_iter=max_iter,
    )
    worst = 0.0
    mismatched = []
    for i, joint in enumerate(full.product.states):
        a = full.values[i]
        b = quot.values[quot.product.index_of(joint)]
        if math.isinf(a) != math.isinf(b):
            mismatched.append(full.product.label(i))
        elif not math.isinf(a):
            worst = max(worst, abs(a - b))
    return QuotientReport(
        full_states=full.product.size,
        quotient_states=quot.product.size,
        max_discrepancy=worst,
        infinity_matches=not mismatched,
        mismatched=tuple(mismatched),
    )
