"""
Weighted spherical designs and their POVMs.

A design is a list of unit vectors ``v_k`` with weights ``p_k``; its POVM
has effects ``d p_k |v_k><v_k|``. This module builds mutually unbiased
bases for prime dimensions and the qubit SIC, measures how far a design is
from a t-design, and audits the moment identities and bias bounds that
2- and 4-designs obey.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
import structlog
import sympy
from attrs import define, field
from scipy.special import comb

from .config import Settings, get_settings
from .errors import DimensionError, UnsupportedDimensionError, ValidationError
from .operators import HermitianOp, PureState, hs_norm, require_traceless, trace_norm
from .permutations import symmetric_projector
from .povm import Povm, l1_value, validate_povm
from .report import Report
from .sampling import (
    McEstimate,
    RngLike,
    as_stream,
    random_orthogonal_pair,
    random_traceless,
    require_samples,
)
from .uniform import uniform_overlaps

logger = structlog.get_logger(__name__)

WEIGHT_TOL = 1e-10
REMAINDER_TOL = 1e-12


def _float_array(value) -> np.ndarray:
    return np.array(value, dtype=float).ravel()


def _vector_array(value) -> np.ndarray:
    rows = [v.amplitudes if isinstance(v, PureState) else v for v in value]
    return np.array(rows, dtype=np.complex128)


@define(frozen=True, eq=False)
class WeightedDesign:
    """
    Weighted unit vectors claimed to form a spherical ``t``-design.

    Weights must be nonnegative and sum to one and the vectors must be unit
    vectors. With ``strict`` (the default) the frame condition
    ``sum_k p_k P_k = I/d`` is enforced as well, to within the configured
    ``design_tol``; ``strict=False`` admits arbitrary weighted ensembles so
    that their defect can be measured.
    """

    weights: np.ndarray = field(converter=_float_array)
    vectors: np.ndarray = field(converter=_vector_array)
    t: int = 2
    label: str = ""
    strict: bool = True

    def __attrs_post_init__(self):
        tol = get_settings().design_tol
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.weights.size:
            raise DimensionError("need one vector per weight", invariant="items")
        if self.weights.size == 0:
            raise ValidationError("design has no items", invariant="non_empty")
        if self.t < 1:
            raise ValidationError(f"design order must be at least 1, got {self.t}", invariant="order")
        if np.any(self.weights < 0):
            raise ValidationError("negative design weight", invariant="weights",
                                  magnitude=float(-self.weights.min()))
        gap = abs(float(self.weights.sum()) - 1.0)
        if gap > WEIGHT_TOL:
            raise ValidationError("design weights do not sum to one", invariant="weight_sum",
                                  magnitude=gap)
        norms = np.linalg.norm(self.vectors, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > tol:
            raise ValidationError("design vector is not a unit vector", invariant="rank_one",
                                  magnitude=worst)
        if self.strict:
            residual = frame_residual(self)
            if residual > tol:
                raise ValidationError("weighted projectors do not sum to I/d", invariant="one_design",
                                      magnitude=residual)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def proper(self) -> bool:
        return bool(np.ptp(self.weights) <= 1e-12)

    def projector(self, k: int) -> HermitianOp:
        v = self.vectors[k]
        return HermitianOp(np.outer(v, v.conj()))

    def items(self):
        return [(float(w), self.projector(k)) for k, w in enumerate(self.weights)]

    def overlaps(self, xi: HermitianOp) -> np.ndarray:
        """``tr(xi P_k)`` for every item."""
        if xi.dim != self.d:
            raise DimensionError(f"operator dimension {xi.dim} != design dimension {self.d}",
                                 invariant="dim")
        v = self.vectors
        return np.real(np.einsum("ni,ij,nj->n", v.conj(), xi.entries, v))


def frame_residual(design: WeightedDesign) -> float:
    v = design.vectors
    frame = (v.T * design.weights) @ v.conj()
    return float(np.linalg.norm(frame - np.eye(design.d) / design.d))


def _tensor_power_rows(vectors: np.ndarray, t: int) -> np.ndarray:
    rows = vectors
    for _ in range(t - 1):
        rows = np.einsum("ni,nj->nij", rows, vectors).reshape(vectors.shape[0], -1)
    return rows


def design_defect(design: WeightedDesign, t: int, settings: Optional[Settings] = None) -> float:
    """
    Frobenius distance of ``sum_k p_k P_k^{(x)t}`` from ``P_sym / C(d+t-1, t)``.

    Raises:
        DimensionError: ``d^t`` exceeds the configured dimension cap.
    """
    settings = settings or get_settings()
    d = design.d
    if d ** t > settings.dim_cap:
        raise DimensionError(f"d^t = {d ** t} exceeds cap {settings.dim_cap}", invariant="dim_cap",
                             magnitude=float(d ** t))
    rows = _tensor_power_rows(design.vectors, t)
    moment = (rows.T * design.weights) @ rows.conj()
    target = symmetric_projector(d, t) / comb(d + t - 1, t, exact=True)
    return float(np.linalg.norm(moment - target))


def _qubit_mub_vectors() -> np.ndarray:
    s = 1 / np.sqrt(2)
    return np.array([
        [1, 0], [0, 1],
        [s, s], [s, -s],
        [s, 1j * s], [s, -1j * s],
    ], dtype=np.complex128)


def mub_vectors(d: int) -> np.ndarray:
    """
    ``d + 1`` mutually unbiased bases for prime ``d``, basis after basis.

    The computational basis comes first; for odd ``d`` basis ``b`` holds
    ``omega^{b j^2 + s j} / sqrt(d)`` for ``s = 0..d-1``.
    """
    if d < 2 or not sympy.isprime(d):
        raise UnsupportedDimensionError(
            f"mutually unbiased bases are built for prime d only, got {d}",
            invariant="prime_dim", magnitude=float(d))
    if d == 2:
        return _qubit_mub_vectors()
    j = np.arange(d)
    omega = np.exp(2j * np.pi / d)
    bases = [np.eye(d, dtype=np.complex128)]
    for b in range(d):
        bases.append(np.array([omega ** ((b * j * j + s * j) % d) for s in range(d)]) / np.sqrt(d))
    return np.concatenate(bases, axis=0)


def mub_design(d: int) -> WeightedDesign:
    vectors = mub_vectors(d)
    return WeightedDesign(np.full(len(vectors), 1.0 / len(vectors)), vectors, t=2, label=f"mub-{d}")


def mub_basis_povms(d: int):
    """The ``d + 1`` bases as separate projective measurements."""
    vectors = mub_vectors(d)
    blocks = vectors.reshape(d + 1, d, d)
    return [
        validate_povm([HermitianOp(np.outer(v, v.conj())) for v in block], f"mub-{d}/{b}")
        for b, block in enumerate(blocks)
    ]


def sic_qubit_tetrahedron() -> Tuple[PureState, ...]:
    """Four qubit states whose Bloch vectors form a regular tetrahedron."""
    a, b = 1 / np.sqrt(3), np.sqrt(2 / 3)
    w = np.exp(2j * np.pi / 3)
    return (
        PureState([1, 0]),
        PureState([a, b]),
        PureState([a, b * w.conjugate()]),
        PureState([a, b * w]),
    )


def sic_design(vectors: Sequence[PureState], strict: bool = True) -> WeightedDesign:
    n = len(vectors)
    return WeightedDesign(np.full(n, 1.0 / n), vectors, t=2, label="sic", strict=strict)


def pairwise_overlaps(design: WeightedDesign) -> np.ndarray:
    """Squared overlaps ``|<v_i|v_j>|^2``."""
    gram = design.vectors.conj() @ design.vectors.T
    return np.abs(gram) ** 2


def sic_validate(vectors: Sequence[PureState], tol: Optional[float] = None) -> Report:
    """
    Check that ``d^2`` states are a SIC: every pair overlaps ``1/(d+1)`` and
    the uniform mixture is a 2-design.

    ``tol`` defaults to the configured ``design_tol``.

    Raises:
        ValidationError: the number of states is not ``d^2``.
    """
    vectors = list(vectors)
    if not vectors:
        raise ValidationError("a SIC needs at least one state", invariant="count", magnitude=0.0)
    tol = get_settings().design_tol if tol is None else tol
    d = vectors[0].dim
    if len(vectors) != d * d:
        raise ValidationError(f"a SIC in d={d} has {d * d} states, got {len(vectors)}",
                              invariant="count", magnitude=float(len(vectors)))
    design = sic_design(vectors, strict=False)
    overlaps = pairwise_overlaps(design)
    off = ~np.eye(d * d, dtype=bool)
    deviation = float(np.max(np.abs(overlaps[off] - 1.0 / (d + 1))))
    defect = design_defect(design, 2)
    report = Report("sic_validate", {"d": d, "count": d * d, "max_overlap_deviation": deviation,
                                     "design_defect": defect, "tol": tol})
    report.check("equiangular", deviation <= tol, deviation=deviation)
    report.check("two_design", defect <= tol, defect=defect)
    return report


def sic_lambda_report(vectors: Sequence[PureState]) -> Report:
    """
    Upper bound on ``lambda`` of a SIC POVM from two of its own states.

    The two states have trace distance ``2 sqrt(d/(d+1))`` and measured
    distance ``2/(d+1)``, so ``lambda <= 1/sqrt(d(d+1))``. The often quoted
    value ``1/d`` rests on a trace distance of ``2d/(d+1)``; both are
    reported and a mismatch is flagged.
    """
    design = sic_design(vectors)
    povm = design_povm(design)
    xi = design.projector(0) - design.projector(1)
    d = design.d
    measured = l1_value(povm, xi)
    norm = trace_norm(xi)
    computed = measured / norm
    quoted = 1.0 / d
    return Report("sic_lambda", {
        "d": d,
        "measured_distance": measured,
        "trace_distance": norm,
        "trace_distance_quoted": 2.0 * d / (d + 1),
        "lambda_upper": computed,
        "lambda_upper_closed_form": 1.0 / np.sqrt(d * (d + 1)),
        "lambda_upper_quoted": quoted,
        "quoted_value_disagrees": bool(abs(computed - quoted) > 1e-9),
    })


def design_povm(design: WeightedDesign) -> Povm:
    """Effects ``d p_k P_k``; completeness follows from the frame condition."""
    effects = [design.d * w * p for w, p in design.items()]
    return validate_povm(effects, design.label)


def pair_distance(design: WeightedDesign, i: int, j: int) -> float:
    """``||M(P_i) - M(P_j)||_1`` for two items of the design."""
    return l1_value(design_povm(design), design.projector(i) - design.projector(j))


def two_design_bound_check(design: WeightedDesign, trials: int, rng: RngLike) -> Report:
    """
    Audit ``||M(rho) - M(sigma)||_1 >= 1/(d+1)`` on random orthogonal pairs.

    Args:
        design: A 2-design (defect at most 1e-6).
        trials: Number of random orthogonal state pairs.
        rng: Seed or stream.

    Returns:
        Report with the smallest distance seen and the operator that attained it.

    Raises:
        ValidationError: the design is not a 2-design.
    """
    defect = design_defect(design, 2)
    if defect > 1e-6:
        raise ValidationError("not a 2-design", invariant="two_design", magnitude=defect)
    stream = as_stream(rng)
    povm = design_povm(design)
    d = design.d
    bound = 1.0 / (d + 1)
    best, witness = np.inf, None
    for _ in range(trials):
        rho, sigma = random_orthogonal_pair(d, stream)
        xi = rho - sigma
        value = l1_value(povm, xi)
        if value < best:
            best, witness = value, xi
    report = Report("two_design_bound", {"d": d, "trials": trials, "bound": bound,
                                         "min_distance": float(best), "design_defect": defect,
                                         "seed": stream.seed})
    if witness is not None:
        report.data["witness"] = witness.entries
        report.check("two_design_bound", best >= bound - 1e-9, min_distance=float(best), bound=bound)
    return report.log(d=d, trials=trials)


def refine_weighted_design(design: WeightedDesign, N: int) -> WeightedDesign:
    """
    Split every weight into ``floor(N p_k)`` pieces of ``1/N`` and a remainder.

    Remainders below 1e-12 are dropped, so an exact division yields only
    whole pieces. The refined design keeps every projector's total weight.

    Raises:
        ValidationError: ``N`` is smaller than the number of items, or the
            pieces no longer sum to one.
    """
    if N < design.n:
        raise ValidationError(f"N={N} is smaller than the {design.n} design items",
                              invariant="refinement", magnitude=float(N))
    weights, rows = [], []
    for p, v in zip(design.weights, design.vectors):
        whole = int(np.floor(N * p + 1e-9))
        remainder = max(N * p - whole, 0.0) / N
        if remainder > REMAINDER_TOL:
            weights.append(remainder)
            rows.append(v)
        weights.extend([1.0 / N] * whole)
        rows.extend([v] * whole)
    weights = np.array(weights)
    drift = abs(float(weights.sum()) - 1.0)
    if drift > WEIGHT_TOL:
        raise ValidationError(f"refinement with N={N} lost weight", invariant="weight_sum",
                              magnitude=drift)
    return WeightedDesign(weights, np.array(rows), t=design.t, label=f"{design.label}/N={N}",
                          strict=design.strict)


def refined_two_design_bound(d: int, n: int, N: int) -> float:
    """``1 - (d/(d+1))(1 + n/N)``, which tends to ``1/(d+1)`` as ``N`` grows."""
    return 1.0 - d / (d + 1) * (1.0 + n / N)


def weighted_design_audit(design: WeightedDesign, N: int, trials: int, rng: RngLike) -> Report:
    """
    Follow the refinement argument for a weighted 2-design on random pairs.

    For each orthogonal pair the measured distance on the refined design must
    dominate ``1 - M sum beta^2 d^2 tr(rho P) tr(sigma P)`` (``M = N + n``),
    which must dominate ``1 - (d/(d+1))(1 + n/N)``.
    """
    refined = refine_weighted_design(design, N)
    povm = design_povm(refined)
    d, n = design.d, design.n
    outcomes = N + n
    floor_value = refined_two_design_bound(d, n, N)
    stream = as_stream(rng)
    report = Report("weighted_design", {"d": d, "n": n, "N": N, "items": refined.n,
                                        "refined_bound": floor_value,
                                        "original_defect": design_defect(design, 2),
                                        "refined_defect": design_defect(refined, 2)})
    worst = np.inf
    for _ in range(trials):
        rho, sigma = random_orthogonal_pair(d, stream)
        measured = l1_value(povm, rho - sigma)
        p = refined.overlaps(rho)
        q = refined.overlaps(sigma)
        inner = 1.0 - outcomes * float(np.sum(refined.weights ** 2 * d * d * p * q))
        worst = min(worst, measured)
        report.check("l1_step", measured >= inner - 1e-9, measured=measured, inner=inner)
        report.check("weight_step", inner >= floor_value - 1e-9, inner=inner, bound=floor_value)
    report.data["min_distance"] = float(worst)
    return report


@define(frozen=True)
class MomentReport:
    """
    Moments of ``S = d tr(xi P)`` under a design (or the Haar measure).

    ``berger_bound`` is ``(E S^2)^{3/2} / (E S^4)^{1/2}``, a lower bound on
    ``E|S|``; it is present whenever the fourth moment is.
    """

    second_moment: float
    closed_form_second: float
    fourth_moment: Optional[float] = None
    closed_form_fourth: Optional[float] = None
    berger_bound: Optional[float] = None
    mean_abs: Optional[float] = None
    std_errors: Optional[dict] = None
    samples: Optional[int] = None
    seed: Optional[int] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in {
            "second_moment": self.second_moment,
            "closed_form_second": self.closed_form_second,
            "fourth_moment": self.fourth_moment,
            "closed_form_fourth": self.closed_form_fourth,
            "berger_bound": self.berger_bound,
            "mean_abs": self.mean_abs,
            "std_errors": self.std_errors,
            "samples": self.samples,
            "seed": self.seed,
        }.items() if v is not None}


def _closed_forms(xi: HermitianOp) -> Tuple[float, float]:
    d = xi.dim
    m2 = xi.entries @ xi.entries
    t2 = float(np.trace(m2).real)
    t4 = float(np.trace(m2 @ m2).real)
    second = d / (d + 1) * t2
    fourth = d ** 3 / ((d + 1) * (d + 2) * (d + 3)) * (3 * t2 * t2 + 6 * t4)
    return second, fourth


def berger_bound(second: float, fourth: float) -> float:
    """``E|S| >= (E S^2)^{3/2} / (E S^4)^{1/2}``; zero when the fourth moment vanishes."""
    if fourth <= 0:
        return 0.0
    return float(second ** 1.5 / np.sqrt(fourth))


def design_moments(design: WeightedDesign, xi: HermitianOp, include_fourth: bool = True) -> MomentReport:
    """
    Second and fourth moments of ``S_k = d tr(xi P_k)`` under the design weights.

    The closed forms hold for 2-designs (second) and 4-designs (fourth).

    Raises:
        ValidationError: ``xi`` is not traceless.
    """
    require_traceless(xi)
    d = design.d
    s = d * design.overlaps(xi)
    w = design.weights
    second = float(np.sum(w * s ** 2))
    closed_second, closed_fourth = _closed_forms(xi)
    mean_abs = float(np.sum(w * np.abs(s)))
    if not include_fourth:
        return MomentReport(second, closed_second, mean_abs=mean_abs)
    fourth = float(np.sum(w * s ** 4))
    return MomentReport(second, closed_second, fourth, closed_fourth,
                        berger_bound(second, fourth), mean_abs)


def haar_moments(xi: HermitianOp, samples: int, rng: RngLike,
                 settings: Optional[Settings] = None) -> MomentReport:
    """Monte-Carlo moments of ``S = d tr(psi xi)`` for Haar ``psi`` (the uniform POVM)."""
    require_traceless(xi)
    require_samples(samples)
    stream = as_stream(rng)
    s = xi.dim * uniform_overlaps(xi, samples, stream, settings)
    second = McEstimate.from_values(s ** 2, stream.seed)
    fourth = McEstimate.from_values(s ** 4, stream.seed)
    first = McEstimate.from_values(np.abs(s), stream.seed)
    closed_second, closed_fourth = _closed_forms(xi)
    logger.info("haar_moments", samples=samples, seed=stream.seed, second=second.mean,
                fourth=fourth.mean, mean_abs=first.mean)
    return MomentReport(
        second.mean, closed_second, fourth.mean, closed_fourth,
        berger_bound(second.mean, fourth.mean), first.mean,
        std_errors={"second_moment": second.std_error, "fourth_moment": fourth.std_error,
                    "mean_abs": first.std_error},
        samples=samples, seed=stream.seed,
    )


def four_design_bias_bound(xi: HermitianOp, d: int) -> Tuple[float, float]:
    """
    Guaranteed lower bounds ``(||xi||_2 / 3, ||xi||_1 / (3 sqrt(d)))`` on
    ``||M(xi)||_1`` for any 4-design POVM ``M``.
    """
    return hs_norm(xi) / 3.0, trace_norm(xi) / (3.0 * np.sqrt(d))


def second_moment_audit(design: WeightedDesign, trials: int, rng: RngLike, tol: float = 1e-9) -> Report:
    """Measured second moment against ``(d/(d+1)) tr xi^2`` on random traceless ``xi``."""
    stream = as_stream(rng)
    worst = 0.0
    report = Report("second_moment", {"d": design.d, "trials": trials, "seed": stream.seed})
    for _ in range(trials):
        xi = random_traceless(design.d, stream)
        moments = design_moments(design, xi, include_fourth=False)
        gap = abs(moments.second_moment - moments.closed_form_second)
        worst = max(worst, gap / max(1.0, moments.closed_form_second))
    report.data["max_relative_gap"] = worst
    report.check("second_moment", worst <= tol, gap=worst)
    return report
