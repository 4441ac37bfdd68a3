"""
Permutation Trace Oracle

Brute-force evaluation of the 576 traces

    tr((U_pi (x) U_sigma) xi^{(x)4}),   pi, sigma in S_4,

for a bipartite operator xi, where ``U_pi`` permutes four tensor factors
(output slot ``pi(i)`` receives input slot ``i``). The pairs are grouped
into orbits under simultaneous conjugation; each orbit has one value and
one bound in terms of

    t = tr xi^2,   a = tr xi_A^2,   b = tr xi_B^2.

Traces are computed by index contraction (``numpy.einsum``) and cross
checked against dense permutation operators on small shapes.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import structlog
from attrs import define, field
from sympy.combinatorics import Permutation

from .config import resolve
from .errors import DimensionError, ValidationError
from .operators import HermitianOp, partial_trace, require_traceless
from .report import Report

logger = structlog.get_logger(__name__)

ORDER = 4
PAIR_COUNT = math.factorial(ORDER) ** 2
MAX_FACTOR_DIM = 3

_A_LETTERS = "abcd"
_B_LETTERS = "efgh"


def _images(value) -> Tuple[int, ...]:
    return tuple(int(i) for i in value)


@define(frozen=True, order=True)
class Perm4:
    """
    A permutation of four tensor slots, zero-based: slot ``i`` goes to ``images[i]``.
    """

    images: Tuple[int, ...] = field(converter=_images)

    def __attrs_post_init__(self):
        if sorted(self.images) != list(range(ORDER)):
            raise ValidationError(f"{self.images} is not a permutation of {ORDER} slots",
                                  invariant="bijective")

    @classmethod
    def from_one_based(cls, images: Sequence[int]) -> "Perm4":
        return cls([i - 1 for i in images])

    @property
    def one_based(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i in self.images)

    @property
    def sympy(self) -> Permutation:
        return Permutation(list(self.images))

    @property
    def cycle_type(self) -> Tuple[int, ...]:
        structure = self.sympy.cycle_structure
        return tuple(sorted((n for n, count in structure.items() for _ in range(count)),
                            reverse=True))

    @property
    def cycle_count(self) -> int:
        return self.sympy.cycles

    @property
    def fixed_points(self) -> Tuple[int, ...]:
        return tuple(i for i, j in enumerate(self.images) if i == j)

    def conjugate(self, g: "Perm4") -> "Perm4":
        return Perm4((self.sympy ^ g.sympy).array_form)

    def __str__(self) -> str:
        cycles = self.sympy.cyclic_form
        return "".join("(" + "".join(str(i + 1) for i in c) + ")" for c in cycles) or "id"


def all_perms(order: int = ORDER) -> List[Tuple[int, ...]]:
    return list(itertools.permutations(range(order)))


def cycle_type_label(cycle_type: Sequence[int]) -> str:
    return "".join(str(n) for n in cycle_type)


def normalisation_factor(d: int, t: int) -> int:
    """``sum over S_t of d^{c(pi)}``, equal to ``d(d+1)...(d+t-1)``."""
    return sum(d ** Permutation(list(p)).cycles for p in all_perms(t))


def permutation_operator(perm: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """
    Dense operator permuting tensor factors: output slot ``perm[i]`` holds input slot ``i``.

    Args:
        perm: Zero-based images of the slots.
        dims: Dimension of each slot; a slot may only move to a slot of equal dimension.

    Returns:
        A real ``D x D`` permutation matrix with ``D = prod(dims)``.
    """
    perm = [int(p) for p in perm]
    dims = [int(d) for d in dims]
    if sorted(perm) != list(range(len(dims))):
        raise ValidationError(f"{perm} is not a permutation of {len(dims)} slots",
                              invariant="bijective")
    if any(dims[perm[i]] != dims[i] for i in range(len(dims))):
        raise DimensionError("permutation moves a slot onto one of different dimension",
                             invariant="dim")
    total = int(np.prod(dims))
    inputs = np.indices(dims).reshape(len(dims), total)
    inverse = np.argsort(perm)
    outputs = np.ravel_multi_index(inputs[inverse], dims)
    u = np.zeros((total, total))
    u[outputs, np.arange(total)] = 1.0
    return u


def symmetric_projector(d: int, t: int) -> np.ndarray:
    """``(1/t!) sum_pi U_pi`` on ``(C^d)^{(x)t}``."""
    perms = all_perms(t)
    return sum(permutation_operator(p, [d] * t) for p in perms) / len(perms)


def _factor_tensor(xi: HermitianOp) -> np.ndarray:
    if xi.shape is None:
        raise DimensionError("operator has no bipartite shape", invariant="shape")
    d_a, d_b = xi.shape
    if max(d_a, d_b) > MAX_FACTOR_DIM:
        raise DimensionError(f"factor dimensions {xi.shape} exceed {MAX_FACTOR_DIM}",
                             invariant="dim_cap", magnitude=float(max(d_a, d_b)))
    return xi.entries.reshape(d_a, d_b, d_a, d_b)


@lru_cache(maxsize=None)
def _pair_subscripts(pi: Tuple[int, ...], sigma: Tuple[int, ...]) -> str:
    factors = [
        _A_LETTERS[pi[i]] + _B_LETTERS[sigma[i]] + _A_LETTERS[i] + _B_LETTERS[i]
        for i in range(ORDER)
    ]
    return ",".join(factors) + "->"


@lru_cache(maxsize=None)
def _single_subscripts(pi: Tuple[int, ...]) -> str:
    return ",".join(_A_LETTERS[pi[i]] + _A_LETTERS[i] for i in range(ORDER)) + "->"


def _pair_trace(pi: Tuple[int, ...], sigma: Tuple[int, ...], tensor: np.ndarray) -> complex:
    return complex(np.einsum(_pair_subscripts(pi, sigma), tensor, tensor, tensor, tensor))


def perm_unitary_trace(pi: Perm4, sigma: Perm4, xi: HermitianOp) -> float:
    """
    ``tr((U_pi on A^4 (x) U_sigma on B^4) xi^{(x)4})``.

    Raises:
        DimensionError: ``xi`` has no bipartite shape or a factor exceeds 3.
    """
    return _pair_trace(pi.images, sigma.images, _factor_tensor(xi)).real


def dense_pair_trace(pi: Perm4, sigma: Perm4, xi: HermitianOp) -> complex:
    """The same trace through explicit ``U`` and ``xi^{(x)4}`` matrices."""
    d_a, d_b = xi.shape
    # slots alternate A_1 B_1 A_2 B_2 ...
    perm = [0] * (2 * ORDER)
    for i in range(ORDER):
        perm[2 * i] = 2 * pi.images[i]
        perm[2 * i + 1] = 2 * sigma.images[i] + 1
    u = permutation_operator(perm, [d_a, d_b] * ORDER)
    power = xi.entries
    for _ in range(ORDER - 1):
        power = np.kron(power, xi.entries)
    return complex(np.trace(u @ power))


def single_party_fourth_sum(x: HermitianOp) -> float:
    """
    ``sum over S_4 of tr(U_pi x^{(x)4})`` by brute force.

    For traceless ``x`` this equals ``3 (tr x^2)^2 + 6 tr x^4``.
    """
    require_traceless(x)
    m = x.entries
    return float(sum(np.einsum(_single_subscripts(p), m, m, m, m) for p in all_perms()).real)


def fourth_sum_closed_form(x: HermitianOp) -> float:
    m2 = x.entries @ x.entries
    return float(3 * np.trace(m2).real ** 2 + 6 * np.trace(m2 @ m2).real)


@define(frozen=True, eq=False)
class PermPairClass:
    """An orbit of pairs ``(pi, sigma)`` under simultaneous conjugation."""

    class_id: int
    members: Tuple[Tuple[Perm4, Perm4], ...]
    representative: Tuple[Perm4, Perm4]
    partner_id: int = -1

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def cycle_types(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        pi, sigma = self.representative
        return pi.cycle_type, sigma.cycle_type

    @property
    def shares_fixed_point(self) -> bool:
        pi, sigma = self.representative
        return bool(set(pi.fixed_points) & set(sigma.fixed_points))

    @property
    def label(self) -> str:
        a, b = self.cycle_types
        return f"{cycle_type_label(a)}:{cycle_type_label(b)}"

    def as_dict(self) -> Dict[str, Any]:
        pi, sigma = self.representative
        return {"class_id": self.class_id, "size": self.size, "cycle_types": self.label,
                "representative": [str(pi), str(sigma)], "partner_id": self.partner_id}


@lru_cache(maxsize=1)
def r_conjugacy_classes() -> Tuple[PermPairClass, ...]:
    """
    Orbits of ``S_4 x S_4`` under the 24 diagonal conjugations.

    Classes are numbered in order of their lexicographically smallest
    member, which is also their representative.
    """
    group = [Perm4(p) for p in all_perms()]
    seen: Dict[Tuple[Perm4, Perm4], int] = {}
    orbits: List[List[Tuple[Perm4, Perm4]]] = []
    for pi, sigma in itertools.product(group, group):
        if (pi, sigma) in seen:
            continue
        orbit = sorted({(pi.conjugate(g), sigma.conjugate(g)) for g in group})
        for member in orbit:
            seen[member] = len(orbits)
        orbits.append(orbit)
    classes = []
    for class_id, orbit in enumerate(orbits):
        pi, sigma = orbit[0]
        classes.append(PermPairClass(class_id, tuple(orbit), orbit[0], seen[(sigma, pi)]))
    logger.debug("r_conjugacy_classes", classes=len(classes), members=len(seen))
    return tuple(classes)


def burnside_class_count() -> int:
    """``(1/24) sum_g |C(g)|^2``, the orbit count of diagonal conjugation on pairs."""
    group = [Perm4(p) for p in all_perms()]
    total = 0
    for g in group:
        centraliser = sum(1 for h in group if h.conjugate(g) == h)
        total += centraliser ** 2
    return total // len(group)


BoundFn = Callable[[float, float, float], float]

_BOUNDS: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], Tuple[str, BoundFn]] = {
    ((2, 2), (2, 2)): ("t^2", lambda t, a, b: t * t),
    ((2, 2), (1, 1, 1, 1)): ("a^2", lambda t, a, b: a * a),
    ((2, 1, 1), (2, 1, 1)): ("ab", lambda t, a, b: a * b),
    ((4,), (4,)): ("t^2", lambda t, a, b: t * t),
    ((4,), (2, 1, 1)): ("ta", lambda t, a, b: t * a),
    ((4,), (3, 1)): ("t(t+a)/2", lambda t, a, b: t * (t + a) / 2),
    ((4,), (2, 2)): ("t^2", lambda t, a, b: t * t),
    ((2, 2), (2, 1, 1)): ("ta", lambda t, a, b: t * a),
    ((4,), (1, 1, 1, 1)): ("a^2", lambda t, a, b: a * a),
    ((3, 1), (3, 1)): ("(ta+tb)/2", lambda t, a, b: (t * a + t * b) / 2),
    ((3, 1), (2, 2)): ("t(t+b)/2", lambda t, a, b: t * (t + b) / 2),
    ((3, 1), (2, 1, 1)): ("a(t+b)/2", lambda t, a, b: a * (t + b) / 2),
}

_SWAP_NAME = str.maketrans({"a": "b", "b": "a"})


def class_bound(cycle_types: Tuple[Tuple[int, ...], Tuple[int, ...]]) -> Optional[Tuple[str, BoundFn]]:
    """
    Upper bound for a class with the given (A, B) cycle types.

    Entries are stored for one orientation; the other follows by swapping the
    parties, which exchanges ``a`` and ``b``.
    """
    if cycle_types in _BOUNDS:
        return _BOUNDS[cycle_types]
    swapped = (cycle_types[1], cycle_types[0])
    if swapped in _BOUNDS:
        name, fn = _BOUNDS[swapped]
        return name.translate(_SWAP_NAME), (lambda t, a, b, fn=fn: fn(t, b, a))
    return None


def second_moments(xi: HermitianOp) -> Tuple[float, float, float]:
    """``(t, a, b) = (tr xi^2, tr xi_A^2, tr xi_B^2)``."""
    m = xi.entries
    xa = partial_trace(xi, "B").entries
    xb = partial_trace(xi, "A").entries
    return (float(np.vdot(m, m).real), float(np.vdot(xa, xa).real), float(np.vdot(xb, xb).real))


def diagram_rhs(t: float, a: float, b: float) -> float:
    return 153 * t * t + 126 * t * a + 126 * t * b + 9 * a * a + 9 * b * b + 30 * a * b


class PermutationOracle:
    """
    Audits of the 576 permutation-pair traces of one operator.

    Args:
        config: Optional overrides of ``Settings`` plus the audit tolerances
            ``spread_tol``, ``imag_tol``, ``zero_tol``, ``bound_tol`` and
            ``relative_tol``.
    """

    DEFAULT_TOLERANCES = {
        "spread_tol": 1e-8,
        "imag_tol": 1e-9,
        "zero_tol": 1e-9,
        "bound_tol": 1e-8,
        "relative_tol": 1e-8,
    }

    def __init__(self, config: Optional[Mapping[str, Any]] = None):
        config = dict(config or {})
        self.tolerances = dict(self.DEFAULT_TOLERANCES)
        for key in list(config):
            if key in self.tolerances:
                self.tolerances[key] = float(config.pop(key))
        self.settings = resolve(config)
        self.classes = r_conjugacy_classes()

    def traces(self, xi: HermitianOp) -> Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], complex]:
        tensor = _factor_tensor(xi)
        return {
            (pi.images, sigma.images): _pair_trace(pi.images, sigma.images, tensor)
            for cls in self.classes
            for pi, sigma in cls.members
        }

    def audit(self, xi: HermitianOp) -> Report:
        """Run every check on ``xi`` and merge the results into one report."""
        require_traceless(xi)
        values = self.traces(xi)
        report = Report("perm-audit", {"classes": len(self.classes),
                                        "members": sum(c.size for c in self.classes)})
        report.merge(self._class_equality(values), "class_equality")
        report.merge(self._projector_consistency(xi, values), "projector_consistency")
        report.merge(self._classwise_bounds(xi, values), "classwise_bounds")
        report.merge(self._aggregate_bound(xi, values), "aggregate_bound")
        return report

    def class_values(self, values) -> List[float]:
        return [float(np.mean([values[(p.images, s.images)].real for p, s in cls.members]))
                for cls in self.classes]

    def _class_equality(self, values) -> Report:
        report = Report("class_equality")
        worst_id, worst_spread, worst_imag = -1, 0.0, 0.0
        for cls in self.classes:
            member_values = np.array([values[(p.images, s.images)] for p, s in cls.members])
            spread = float(np.ptp(member_values.real))
            mean = float(np.mean(member_values.real))
            worst_imag = max(worst_imag, float(np.max(np.abs(member_values.imag))))
            if spread > worst_spread or worst_id < 0:
                worst_id, worst_spread = cls.class_id, spread
            report.check("class_equality", spread <= self.tolerances["spread_tol"] * (1 + abs(mean)),
                         class_id=cls.class_id, spread=spread)
        report.check("real_traces", worst_imag <= self.tolerances["imag_tol"], max_imag=worst_imag)
        report.data.update(worst_class=worst_id, worst_spread=worst_spread, max_imag=worst_imag)
        return report

    def _projector_consistency(self, xi: HermitianOp, values) -> Report:
        d_a, d_b = xi.shape
        total = float(sum(v.real for v in values.values()))
        p_a = symmetric_projector(d_a, ORDER).reshape((d_a,) * (2 * ORDER))
        p_b = symmetric_projector(d_b, ORDER).reshape((d_b,) * (2 * ORDER))
        tensor = _factor_tensor(xi)
        projected = float(np.einsum("abcdijkl,efghmnop,imae,jnbf,kocg,lpdh->",
                                    p_a, p_b, tensor, tensor, tensor, tensor,
                                    optimize="greedy").real)
        scaled = PAIR_COUNT * projected
        report = Report("projector_consistency", {"pair_sum": total, "projector_form": scaled})
        gap = abs(total - scaled)
        report.check("projector_consistency",
                     gap <= self.tolerances["relative_tol"] * max(1.0, abs(total)), gap=gap)
        report.check("nonnegative", total >= -self.tolerances["bound_tol"], pair_sum=total)
        return report

    def _classwise_bounds(self, xi: HermitianOp, values) -> Report:
        t, a, b = second_moments(xi)
        report = Report("classwise_bounds", {"t": t, "a": a, "b": b})
        for cls, value in zip(self.classes, self.class_values(values)):
            row = {"class_id": cls.class_id, "size": cls.size, "cycle_types": cls.label,
                   "representative": " ".join(str(p) for p in cls.representative),
                   "value": value}
            if cls.shares_fixed_point:
                row.update(bound=0.0, bound_name="0", margin=-abs(value))
                report.check("fixed_point_zero", abs(value) <= self.tolerances["zero_tol"],
                             class_id=cls.class_id, value=value)
            else:
                entry = class_bound(cls.cycle_types)
                if entry is None:
                    row.update(bound=None, bound_name="missing", margin=None)
                    report.check("bound_missing", abs(value) <= self.tolerances["zero_tol"],
                                 class_id=cls.class_id, value=value, cycle_types=cls.label)
                else:
                    name, fn = entry
                    bound = fn(t, a, b)
                    row.update(bound=bound, bound_name=name, margin=bound - value)
                    report.check("class_bound", value <= bound + self.tolerances["bound_tol"],
                                 class_id=cls.class_id, value=value, bound=bound)
            report.rows.append(row)
        report.data["classes"] = report.rows
        return report

    def _aggregate_bound(self, xi: HermitianOp, values) -> Report:
        t, a, b = second_moments(xi)
        total = float(sum(v.real for v in values.values()))
        rhs = diagram_rhs(t, a, b)
        tol = self.tolerances["bound_tol"]
        report = Report("aggregate_bound", {"pair_sum": total, "rhs": rhs,
                                            "projector_form": total / PAIR_COUNT,
                                            "projector_rhs": rhs / PAIR_COUNT})
        report.check("diagram_bound", total <= rhs + tol, pair_sum=total, rhs=rhs)
        report.check("projector_bound", total / PAIR_COUNT <= rhs / PAIR_COUNT + tol)
        return report


def class_equality_audit(xi: HermitianOp, config: Optional[Mapping[str, Any]] = None) -> Report:
    oracle = PermutationOracle(config)
    return oracle._class_equality(oracle.traces(xi))


def projector_consistency(xi: HermitianOp, config: Optional[Mapping[str, Any]] = None) -> Report:
    oracle = PermutationOracle(config)
    return oracle._projector_consistency(xi, oracle.traces(xi))


def classwise_bound_audit(xi: HermitianOp, config: Optional[Mapping[str, Any]] = None) -> Report:
    require_traceless(xi)
    oracle = PermutationOracle(config)
    return oracle._classwise_bounds(xi, oracle.traces(xi))


def aggregate_diagram_bound_audit(xi: HermitianOp, config: Optional[Mapping[str, Any]] = None) -> Report:
    require_traceless(xi)
    oracle = PermutationOracle(config)
    return oracle._aggregate_bound(xi, oracle.traces(xi))
