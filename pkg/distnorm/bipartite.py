"""
Bipartite measurements: data hiding, local uniform POVMs and the
domination chain for locality-restricted measurement classes.

Operators here carry a ``(d_A, d_B)`` shape. Moments refer to
``S = D tr((phi (x) psi) xi)`` with independent Haar ``phi`` and ``psi``
and ``D = d_A d_B``, written in terms of

    t = tr xi^2,   a = tr xi_A^2,   b = tr xi_B^2.
"""

from __future__ import annotations

import itertools
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import structlog
from attrs import define

from .config import Settings
from .errors import DimensionError, ValidationError
from .operators import (
    HermitianOp,
    hs_norm,
    identity,
    partial_transpose,
    require_traceless,
    swap_operator,
    trace_norm,
)
from .permutations import MAX_FACTOR_DIM, PermutationOracle, diagram_rhs, second_moments
from .report import Report
from .sampling import (
    McEstimate,
    RngLike,
    as_stream,
    haar_unitary,
    haar_vectors,
    log_estimate,
    monte_carlo,
    require_samples,
)

logger = structlog.get_logger(__name__)

SQRT_153 = float(np.sqrt(153.0))
TWIRL_SAMPLES = 20
TWIRL_TOL = 1e-9


def _require_dim(d: int) -> None:
    if d < 2:
        raise DimensionError(f"need d >= 2, got {d}", invariant="dim", magnitude=float(d))


def _require_shape(xi: HermitianOp) -> Tuple[int, int]:
    if xi.shape is None:
        raise DimensionError("operator has no bipartite shape", invariant="shape")
    return xi.shape


@define(frozen=True, eq=False)
class HidingPair:
    """Normalised projectors onto the symmetric and antisymmetric subspaces of ``C^d (x) C^d``."""

    sym_state: HermitianOp
    anti_state: HermitianOp
    d: int

    def direction(self) -> HermitianOp:
        """``(sigma - alpha)/2``, of unit trace norm."""
        return 0.5 * (self.sym_state - self.anti_state)


def hiding_pair(d: int) -> HidingPair:
    _require_dim(d)
    one = np.eye(d * d)
    swap = swap_operator(d).entries
    sym = HermitianOp((one + swap) / (d * (d + 1)), (d, d))
    anti = HermitianOp((one - swap) / (d * (d - 1)), (d, d))
    return HidingPair(sym, anti, d)


def twirl_residual(xi: HermitianOp, rng: RngLike = 0, samples: int = TWIRL_SAMPLES) -> float:
    """
    Frobenius change of ``xi`` under the average of ``samples`` random
    ``U (x) U`` conjugations; zero for operators in the span of ``1`` and ``F``.
    """
    d_a, d_b = _require_shape(xi)
    if d_a != d_b:
        raise DimensionError("U (x) U invariance needs equal factors", invariant="shape")
    stream = as_stream(rng)
    total = np.zeros_like(xi.entries)
    for _ in range(samples):
        u = haar_unitary(d_a, stream)
        uu = np.kron(u, u)
        total += uu @ xi.entries @ uu.conj().T
    return float(np.linalg.norm(total / samples - xi.entries))


@define(frozen=True)
class UUInvariantOp:
    """The operator ``x1 * 1 + xF * F`` on ``C^d (x) C^d``."""

    x1: float
    xF: float
    d: int

    def to_operator(self) -> HermitianOp:
        d = self.d
        return HermitianOp(self.x1 * np.eye(d * d) + self.xF * swap_operator(d).entries, (d, d))

    @property
    def trace(self) -> float:
        return self.x1 * self.d ** 2 + self.xF * self.d

    @property
    def trace_with_swap(self) -> float:
        return self.x1 * self.d + self.xF * self.d ** 2

    def sym_weight(self) -> float:
        """``tr(xi Pi_sym)``."""
        return (self.x1 + self.xF) * self.d * (self.d + 1) / 2

    def anti_weight(self) -> float:
        """``tr(xi Pi_anti)``."""
        return (self.x1 - self.xF) * self.d * (self.d - 1) / 2

    @classmethod
    def from_operator(cls, xi: HermitianOp, rng: RngLike = 0, tol: float = TWIRL_TOL) -> "UUInvariantOp":
        """
        Read off ``(x1, xF)`` from ``tr xi`` and ``tr(xi F)``.

        Raises:
            ValidationError: ``xi`` is not ``U (x) U`` invariant.
        """
        d, _ = _require_shape(xi)
        residual = twirl_residual(xi, rng)
        if residual > tol * max(1.0, hs_norm(xi)):
            raise ValidationError("operator is not U (x) U invariant", invariant="uu_invariant",
                                  magnitude=residual)
        swap = swap_operator(d).entries
        tr = float(np.trace(xi.entries).real)
        tr_f = float(np.trace(xi.entries @ swap).real)
        x1, xf = np.linalg.solve(np.array([[d * d, d], [d, d * d]], dtype=float), [tr, tr_f])
        op = cls(float(x1), float(xf), d)
        gap = float(np.linalg.norm(op.to_operator().entries - xi.entries))
        if gap > tol * max(1.0, hs_norm(xi)):
            raise ValidationError("operator is not in the span of 1 and F", invariant="uu_invariant",
                                  magnitude=gap)
        return op


@define(frozen=True)
class PptOptimum:
    """Best twirled two-outcome PPT test ``M = x Pi_sym + y Pi_anti``."""

    value: float
    x: float
    y: float
    d: int

    def effect(self) -> HermitianOp:
        d = self.d
        one = np.eye(d * d)
        swap = swap_operator(d).entries
        return HermitianOp(self.x * (one + swap) / 2 + self.y * (one - swap) / 2, (d, d))


def _ppt_lines(d: int) -> List[Tuple[float, float, float]]:
    """Boundary lines ``alpha x + beta y = gamma`` of the feasible polygon."""
    return [
        (1.0, 0.0, 0.0), (1.0, 0.0, 1.0),
        (0.0, 1.0, 0.0), (0.0, 1.0, 1.0),
        (d + 1.0, 1.0 - d, 0.0), (d + 1.0, 1.0 - d, 2.0),
    ]


def _ppt_feasible(x: float, y: float, d: int, tol: float = 1e-12) -> bool:
    g = (d + 1) * x + (1 - d) * y
    return -tol <= x <= 1 + tol and -tol <= y <= 1 + tol and -tol <= g <= 2 + tol


def ppt_vertices(d: int) -> List[Tuple[float, float]]:
    """
    Vertices of the set of ``(x, y)`` in the unit square for which both
    ``M`` and ``1 - M`` have positive partial transpose. With ``F^Gamma = d Phi``
    the conditions are ``0 <= (d+1)x - (d-1)y <= 2``.
    """
    vertices = []
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(_ppt_lines(d), 2):
        det = a1 * b2 - a2 * b1
        if abs(det) < 1e-14:
            continue
        x = (c1 * b2 - c2 * b1) / det
        y = (a1 * c2 - a2 * c1) / det
        if _ppt_feasible(x, y, d):
            vertices.append((x, y))
    return sorted(set((round(x, 15), round(y, 15)) for x, y in vertices))


def ppt_optimum(xi: UUInvariantOp, d: Optional[int] = None) -> PptOptimum:
    d = xi.d if d is None else d
    if d != xi.d:
        raise DimensionError(f"operator lives on d={xi.d}, asked for d={d}", invariant="dim")
    s, a = xi.sym_weight(), xi.anti_weight()
    best = None
    # ties go to the vertex with the smaller y
    for x, y in sorted(ppt_vertices(d), key=lambda v: (v[1], v[0])):
        value = abs((2 * x - 1) * s + (2 * y - 1) * a)
        if best is None or value > best.value + 1e-15:
            best = PptOptimum(float(value), float(x), float(y), d)
    return best


def ppt_norm_uu_invariant(xi: UUInvariantOp, d: Optional[int] = None) -> float:
    """
    Exact PPT norm of a ``U (x) U`` invariant operator.

    Twirling any PPT test leaves ``tr(xi M)`` unchanged and keeps it PPT, so
    the maximum of ``|tr(xi (2M - 1))|`` may be taken over
    ``M = x Pi_sym + y Pi_anti``: a linear objective on a polygon, maximised
    at a vertex.
    """
    return ppt_optimum(xi, d).value


def ppt_witness_check(optimum: PptOptimum, tol: float = 1e-9) -> Report:
    """Dense check that the optimal effect and its complement are PPT."""
    m = optimum.effect()
    d = optimum.d
    low = float(scipy.linalg.eigvalsh(partial_transpose(m).entries)[0])
    low_c = float(scipy.linalg.eigvalsh(partial_transpose(identity(d * d, (d, d)) - m).entries)[0])
    report = Report("ppt_witness", {"x": optimum.x, "y": optimum.y,
                                    "min_eig_effect": low, "min_eig_complement": low_c})
    report.check("ppt_effect", low >= -tol, min_eig=low)
    report.check("ppt_complement", low_c >= -tol, min_eig=low_c)
    return report


def sep_l2_lower_bound(xi: HermitianOp, parties: int = 2) -> Tuple[float, float]:
    """
    Lower bounds ``(c ||xi||_2, c ||xi||_1 / sqrt(D))`` on the separable norm,
    ``c = 2 / 2^{n/2}`` for ``n`` parties.
    """
    if parties < 1:
        raise ValidationError("need at least one party", invariant="parties")
    c = 2.0 / 2.0 ** (parties / 2.0)
    return c * hs_norm(xi), c * trace_norm(xi) / np.sqrt(xi.dim)


def _local_prefactor(d_a: int, d_b: int) -> float:
    return d_a * d_b / ((d_a + 1) * (d_b + 1))


def local_uniform_second_moment(xi: HermitianOp) -> Tuple[float, Dict[str, float]]:
    """
    ``E S^2 = (D/((d_A+1)(d_B+1))) (tr xi_A^2 + tr xi_B^2 + tr xi^2)``.

    Returns:
        The moment and the component traces ``{"t", "a", "b"}``.
    """
    require_traceless(xi)
    d_a, d_b = _require_shape(xi)
    t, a, b = second_moments(xi)
    return _local_prefactor(d_a, d_b) * (a + b + t), {"t": t, "a": a, "b": b}


def diagram_bound_rhs(xi: HermitianOp) -> Tuple[float, float]:
    """
    The term-by-term bound ``153t^2 + 126ta + 126tb + 9a^2 + 9b^2 + 30ab`` on the
    sum of the 576 permutation traces, and the envelope ``153 (t+a+b)^2``.
    """
    require_traceless(xi)
    _require_shape(xi)
    t, a, b = second_moments(xi)
    return diagram_rhs(t, a, b), 153.0 * (t + a + b) ** 2


def local_uniform_fourth_moment(xi: HermitianOp) -> float:
    """
    ``E S^4`` exactly, from the 576 permutation traces (factor dimensions up to 3).
    """
    require_traceless(xi)
    d_a, d_b = _require_shape(xi)
    values = PermutationOracle().traces(xi)
    total = sum(v.real for v in values.values())
    norm_a = d_a * (d_a + 1) * (d_a + 2) * (d_a + 3)
    norm_b = d_b * (d_b + 1) * (d_b + 2) * (d_b + 3)
    return float((d_a * d_b) ** 4 * total / (norm_a * norm_b))


def local_fourth_moment_bounds(xi: HermitianOp) -> Dict[str, float]:
    """
    Upper bounds on ``E S^4``: the one built from the term-by-term bound and
    the looser ``(D/((d_A+1)(d_B+1)))^3 * 153 (t+a+b)^2``.
    """
    d_a, d_b = _require_shape(xi)
    rhs, envelope = diagram_bound_rhs(xi)
    denominator = ((d_a + 1) * (d_a + 2) * (d_a + 3)) * ((d_b + 1) * (d_b + 2) * (d_b + 3))
    return {
        "diagram": float((d_a * d_b) ** 3 * rhs / denominator),
        "envelope": float(_local_prefactor(d_a, d_b) ** 3 * envelope),
    }


@define(frozen=True)
class LocalBiasBounds:
    l2: float
    l1: float
    rank_form: Optional[float] = None

    def as_dict(self) -> dict:
        return {"l2": self.l2, "l1": self.l1, "rank_form": self.rank_form}


def local_bias_lower_bound(xi: HermitianOp, rho: Optional[HermitianOp] = None,
                           sigma: Optional[HermitianOp] = None) -> LocalBiasBounds:
    """
    Guaranteed lower bounds on the local uniform norm: ``||xi||_2 / sqrt(153)``
    and ``||xi||_1 / sqrt(153 D)``; with the states given, also
    ``max(||rho||_2, ||sigma||_2) / sqrt(153)``.
    """
    rank_form = None
    if rho is not None and sigma is not None:
        rank_form = max(hs_norm(rho), hs_norm(sigma)) / SQRT_153
    return LocalBiasBounds(hs_norm(xi) / SQRT_153, trace_norm(xi) / np.sqrt(153.0 * xi.dim), rank_form)


def local_overlaps(xi: HermitianOp, samples: int, rng: RngLike,
                   settings: Optional[Settings] = None) -> np.ndarray:
    """``tr((phi (x) psi) xi)`` for independent Haar ``phi``, ``psi``."""
    d_a, d_b = _require_shape(xi)
    tensor = xi.entries.reshape(d_a, d_b, d_a, d_b)

    def draw(gen: np.random.Generator, n: int) -> np.ndarray:
        phi = haar_vectors(gen, d_a, n)
        psi = haar_vectors(gen, d_b, n)
        return np.real(np.einsum("na,nb,abcd,nc,nd->n", phi.conj(), psi.conj(), tensor, phi, psi,
                                 optimize=True))

    return monte_carlo(draw, samples, rng, settings)


def mc_local_uniform_bias(xi: HermitianOp, samples: int, rng: RngLike,
                          settings: Optional[Settings] = None) -> McEstimate:
    """Monte-Carlo estimate of ``D E|tr((phi (x) psi) xi)|``."""
    require_samples(samples)
    _require_shape(xi)
    stream = as_stream(rng)
    values = xi.dim * np.abs(local_overlaps(xi, samples, stream, settings))
    return log_estimate("mc_local_uniform_bias", McEstimate.from_values(values, stream.seed),
                        shape=list(xi.shape))


def mc_local_uniform_moments(xi: HermitianOp, samples: int, rng: RngLike,
                             settings: Optional[Settings] = None) -> Report:
    """
    Sampled ``E S^2`` and ``E S^4`` next to the exact second moment and the
    fourth-moment upper bounds, with ``E|S|`` and its guaranteed lower bound.
    """
    require_samples(samples)
    stream = as_stream(rng)
    s = xi.dim * local_overlaps(xi, samples, stream, settings)
    second = McEstimate.from_values(s ** 2, stream.seed)
    fourth = McEstimate.from_values(s ** 4, stream.seed)
    first = McEstimate.from_values(np.abs(s), stream.seed)
    exact, terms = local_uniform_second_moment(xi)
    bounds = local_fourth_moment_bounds(xi)
    report = Report("local_moments", {
        "shape": list(xi.shape), "terms": terms,
        "second_moment": second.as_dict(), "second_exact": exact,
        "fourth_moment": fourth.as_dict(), "fourth_bounds": bounds,
        "mean_abs": first.as_dict(), "lower_bound": hs_norm(xi) / SQRT_153,
    })
    if max(xi.shape) <= MAX_FACTOR_DIM:
        report.data["fourth_exact"] = local_uniform_fourth_moment(xi)
    report.check("second_moment", second.within(exact, 5.0, 1e-12), estimate=second.mean, exact=exact)
    report.check("fourth_moment_upper", fourth.mean <= bounds["envelope"] + 5 * fourth.std_error + 1e-12,
                 estimate=fourth.mean, bound=bounds["envelope"])
    report.check("local_bias_lower", first.mean >= hs_norm(xi) / SQRT_153 - 5 * first.std_error - 1e-12,
                 estimate=first.mean)
    return report


def separable_floor(d: int) -> float:
    """``1/sqrt(D) = 1/d``: the separable norm is at least ``||xi||_2`` and ``||xi||_2 >= ||xi||_1 / d``."""
    _require_dim(d)
    return 1.0 / d


def rank_remark(r: int) -> Dict[str, float]:
    """
    Lower bound ``1/(sqrt(153) sqrt(r))`` for states of rank at most ``r``,
    next to the quoted ``1/(13 r)``.
    """
    if r < 1:
        raise ValidationError(f"rank must be at least 1, got {r}", invariant="rank")
    return {"rank": r, "l2_route": 1.0 / (SQRT_153 * np.sqrt(r)), "quoted": 1.0 / (13.0 * r)}


def _chain_row(name: str, value: float, provenance: str, std_error: Optional[float] = None) -> dict:
    row = {"bound_name": name, "value": float(value), "provenance": provenance}
    if std_error is not None:
        row["std_error"] = float(std_error)
    return row


def chain_report(d: int, samples: int = 20000, rng: RngLike = 0, tol: float = 1e-9,
                 settings: Optional[Settings] = None) -> Report:
    """
    The domination chain for a ``d x d`` system on the hiding direction.

    Rows, each bounded by the next:
        1/(sqrt(153) d) <= ||xi_h||_2 / sqrt(153) <= local uniform bias (sampled)
        <= ||xi_h||_2 <= PPT value <= 2/(d+1)
    where ``xi_h = (sigma - alpha)/2`` has unit trace norm, ``||xi_h||_2``
    lower-bounds the separable norm and the PPT value is exact.
    """
    _require_dim(d)
    pair = hiding_pair(d)
    xi = pair.direction()
    l2 = hs_norm(xi)
    estimate = mc_local_uniform_bias(xi, samples, rng, settings)
    optimum = ppt_optimum(UUInvariantOp.from_operator(xi))
    rows = [
        _chain_row("local_uniform_floor", 1.0 / (SQRT_153 * d), "analytic"),
        _chain_row("local_uniform_l2_bound", l2 / SQRT_153, "analytic"),
        _chain_row("local_uniform_bias", estimate.mean, "monte_carlo", estimate.std_error),
        _chain_row("sep_l2_bound", sep_l2_lower_bound(xi, 2)[0], "analytic"),
        _chain_row("ppt_bias", optimum.value, "lp"),
        _chain_row("hiding_bound", 2.0 / (d + 1), "analytic"),
    ]
    report = Report("chain", {
        "d": d,
        "trace_norm": trace_norm(xi),
        "separable_floor": separable_floor(d),
        "separable_chain": [separable_floor(d), optimum.value, 2.0 / (d + 1)],
        "ppt_vertex": {"x": optimum.x, "y": optimum.y},
        "rank_remark": rank_remark(d * (d - 1) // 2),
        "samples": samples,
        "seed": estimate.seed,
    }, rows=rows)
    for lower, upper in zip(rows, rows[1:]):
        slack = tol + 5 * (lower.get("std_error", 0.0) + upper.get("std_error", 0.0))
        report.check("monotone", lower["value"] <= upper["value"] + slack,
                     lower=lower["bound_name"], upper=upper["bound_name"])
    report.check("separable_chain", separable_floor(d) <= optimum.value + tol)
    report.merge(ppt_witness_check(optimum, tol))
    return report.log(d=d)


def hiding_report(d: int, tol: float = 1e-9) -> Report:
    """PPT bias of the hiding pair against ``2/(d+1)`` and its global bias of one."""
    pair = hiding_pair(d)
    xi = pair.direction()
    optimum = ppt_optimum(UUInvariantOp.from_operator(xi))
    bound = 2.0 / (d + 1)
    global_bias = 0.5 * trace_norm(pair.sym_state - pair.anti_state)
    report = Report("hiding", {"d": d, "ppt_bias": optimum.value, "bound_2_over_d_plus_1": bound,
                               "global_bias": global_bias,
                               "rank_sym": d * (d + 1) // 2, "rank_anti": d * (d - 1) // 2,
                               "linear_entropy_sym": 1.0 - 2.0 / (d * (d + 1))})
    report.check("ppt_value", abs(optimum.value - bound) <= tol, value=optimum.value, bound=bound)
    report.check("orthogonal", abs(global_bias - 1.0) <= tol, global_bias=global_bias)
    report.merge(ppt_witness_check(optimum, tol))
    return report
