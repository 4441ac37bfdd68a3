"""
POVMs and the distinguishability norms of measurement families.

A :class:`Povm` induces the classical map ``xi -> (tr(xi M_k))_k``; the
norm of a family is the best l1-norm of that vector over the family's
POVMs. :func:`estimate_domination` brackets the constants of domination of
a finite family by explicit witnesses.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import structlog
from attrs import define, field

from .config import Settings, get_settings
from .errors import ValidationError, DimensionError
from .operators import (
    HADAMARD,
    HermitianOp,
    conjugate,
    require_density,
    require_unitary,
    trace_norm,
)
from .sampling import RngLike, RandomStream, as_stream, haar_unitary, haar_vectors

logger = structlog.get_logger(__name__)

EFFECT_TOL = 1e-9
WEIGHT_TOL = 1e-12
PAIR_SEED_LIMIT = 64


def _as_effects(effects: Sequence[HermitianOp]) -> Tuple[HermitianOp, ...]:
    return tuple(effects)


@define(frozen=True, eq=False)
class Povm:
    """
    A finite POVM. Build through :func:`validate_povm`, which checks
    positivity and completeness; the constructor trusts its input.
    """

    effects: Tuple[HermitianOp, ...] = field(converter=_as_effects)
    label: str = ""
    stack: np.ndarray = field(init=False, repr=False)

    def __attrs_post_init__(self):
        stack = np.stack([m.entries for m in self.effects])
        stack.flags.writeable = False
        object.__setattr__(self, "stack", stack)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def outcomes(self) -> int:
        return len(self.effects)


@define(frozen=True, eq=False)
class TwoOutcomeTest:
    """An effect ``0 <= M <= 1``; ``(M, 1 - M)`` is a POVM."""

    effect: HermitianOp

    def __attrs_post_init__(self):
        values = scipy.linalg.eigvalsh(self.effect.entries)
        if values[0] < -EFFECT_TOL or values[-1] > 1 + EFFECT_TOL:
            raise ValidationError("two-outcome effect leaves [0, 1]", invariant="effect_range",
                                  magnitude=float(max(-values[0], values[-1] - 1)))

    def as_povm(self) -> Povm:
        complement = HermitianOp(np.eye(self.effect.dim) - self.effect.entries)
        return validate_povm([self.effect, complement])

    def value(self, xi: HermitianOp) -> float:
        """``|tr(xi (2M - 1))|``."""
        body = 2 * self.effect.entries - np.eye(self.effect.dim)
        return float(abs(np.real(np.vdot(body, xi.entries))))


@define(frozen=True, eq=False)
class MeasurementFamily:
    povms: Tuple[Povm, ...] = field(converter=tuple)
    label: str = ""

    def __attrs_post_init__(self):
        if not self.povms:
            raise ValidationError("measurement family is empty", invariant="non_empty")
        dims = {p.dim for p in self.povms}
        if len(dims) != 1:
            raise DimensionError(f"family mixes dimensions {sorted(dims)}", invariant="dim")

    @property
    def dim(self) -> int:
        return self.povms[0].dim


def validate_povm(effects: Sequence[HermitianOp], label: str = "", tol: Optional[float] = None) -> Povm:
    """
    Check positivity and completeness and build a :class:`Povm`.

    Args:
        effects: Non-empty sequence of Hermitian effects on one dimension.
        label: Free-text name carried in reports.
        tol: Tolerance for negative eigenvalues and the completeness residual;
            defaults to ``Settings.povm_tol``.

    Raises:
        ValidationError: naming ``positive`` or ``completeness`` with the
            size of the violation.
    """
    tol = get_settings().povm_tol if tol is None else tol
    effects = tuple(effects)
    if not effects:
        raise ValidationError("POVM has no effects", invariant="non_empty")
    d = effects[0].dim
    if any(m.dim != d for m in effects):
        raise DimensionError("POVM effects have different dimensions", invariant="dim")
    for k, m in enumerate(effects):
        lowest = float(scipy.linalg.eigvalsh(m.entries)[0])
        if lowest < -tol:
            raise ValidationError(f"effect {k} is not positive semidefinite", invariant="positive",
                                  magnitude=-lowest)
    total = np.sum([m.entries for m in effects], axis=0)
    residual = float(np.linalg.norm(total - np.eye(d)))
    if residual > tol:
        raise ValidationError("effects do not sum to the identity", invariant="completeness",
                              magnitude=residual)
    return Povm(effects, label)


def _check_dim(povm: Povm, h: HermitianOp) -> None:
    if povm.dim != h.dim:
        raise DimensionError(f"POVM acts on dimension {povm.dim}, operator has {h.dim}",
                             invariant="dim")


def apply_povm(povm: Povm, h: HermitianOp) -> np.ndarray:
    """Outcome vector ``(tr(H M_k))_k``."""
    _check_dim(povm, h)
    return np.real(np.einsum("kij,ji->k", povm.stack, h.entries))


def l1_value(povm: Povm, xi: HermitianOp) -> float:
    """``sum_k |tr(xi M_k)|``, the l1 norm of the measured operator."""
    return float(np.sum(np.abs(apply_povm(povm, xi))))


def bias(povm: Povm, rho: HermitianOp, sigma: HermitianOp) -> float:
    require_density(rho, "rho")
    require_density(sigma, "sigma")
    return 0.5 * l1_value(povm, rho - sigma)


def two_outcome_reduce(povm: Povm, xi: HermitianOp) -> TwoOutcomeTest:
    """
    Coarse-grain to the two-outcome test ``M = sum of M_k with tr(xi M_k) >= 0``.

    Ties go to the positive group. ``|tr(xi (2M - 1))|`` equals
    ``sum_k |tr(xi M_k)|``.
    """
    signs = apply_povm(povm, xi) >= 0
    effect = np.sum(povm.stack[signs], axis=0) if signs.any() else np.zeros((povm.dim, povm.dim))
    return TwoOutcomeTest(HermitianOp(effect))


def family_norm(family: MeasurementFamily, xi: HermitianOp) -> float:
    return max(l1_value(p, xi) for p in family.povms)


def family_norm_argmax(family: MeasurementFamily, xi: HermitianOp) -> Tuple[float, int]:
    values = [l1_value(p, xi) for p in family.povms]
    best = int(np.argmax(values))
    return values[best], best


def convex_combine(parts: Sequence[Tuple[float, Povm]], label: str = "") -> Povm:
    """
    Direct-sum convex combination: effects ``p_i M^(i)_k`` in order.

    Raises:
        ValidationError: negative weights or weights not summing to one.
    """
    parts = list(parts)
    if not parts:
        raise ValidationError("nothing to combine", invariant="non_empty")
    weights = np.array([float(w) for w, _ in parts])
    if np.any(weights < 0):
        raise ValidationError("weights must be nonnegative", invariant="weights",
                              magnitude=float(-weights.min()))
    if abs(weights.sum() - 1.0) > WEIGHT_TOL:
        raise ValidationError("weights do not sum to one", invariant="weight_sum",
                              magnitude=abs(float(weights.sum()) - 1.0))
    d = parts[0][1].dim
    effects: List[HermitianOp] = []
    for w, povm in parts:
        if povm.dim != d:
            raise DimensionError("cannot combine POVMs of different dimensions", invariant="dim")
        effects.extend(w * m for m in povm.effects)
    return Povm(effects, label or "+".join(p.label or "povm" for _, p in parts))


def conjugate_povm(povm: Povm, unitary: np.ndarray) -> Povm:
    """Effects ``U M_k U^dagger``."""
    u = require_unitary(unitary, povm.dim)
    return Povm([conjugate(m, u) for m in povm.effects], povm.label)


def is_separating(family: MeasurementFamily, tol: float = 1e-9) -> bool:
    """True iff the effects span the full ``d^2``-dimensional Hermitian space."""
    d = family.dim
    rows = [
        np.concatenate([m.real.ravel(), m.imag.ravel()])
        for povm in family.povms
        for m in povm.stack
    ]
    singular = scipy.linalg.svdvals(np.array(rows))
    return int(np.sum(singular > tol)) == d * d


def basis_povm(unitary: np.ndarray, label: str = "") -> Povm:
    """Projective measurement onto the columns of ``unitary``."""
    u = require_unitary(unitary)
    return validate_povm([HermitianOp(np.outer(u[:, k], u[:, k].conj())) for k in range(u.shape[0])],
                         label)


def computational_basis(d: int) -> Povm:
    return basis_povm(np.eye(d), "Z")


def pauli_basis_family(labels: str = "ZXY") -> MeasurementFamily:
    """Qubit eigenbasis measurements, e.g. ``"ZX"`` or ``"ZXY"``."""
    s = 1 / np.sqrt(2)
    bases = {
        "Z": np.eye(2, dtype=np.complex128),
        "X": HADAMARD,
        "Y": np.array([[s, s], [1j * s, -1j * s]]),
    }
    return MeasurementFamily([basis_povm(bases[c], c) for c in labels], labels)


def haar_povm(d: int, n: int, rng: RngLike) -> Povm:
    """
    Finite stand-in for the uniform POVM.

    ``n`` Haar vectors give effects ``(d/n)|psi><psi|``; their sum ``S`` is
    close to the identity and the effects are made exactly complete by
    ``S^{-1/2} (.) S^{-1/2}``.
    """
    if n < d:
        raise ValidationError(f"need at least d={d} vectors, got {n}", invariant="outcomes")
    vectors = haar_vectors(as_stream(rng).generator, d, n)
    raw = (d / n) * np.einsum("ni,nj->nij", vectors, vectors.conj())
    inv_sqrt = scipy.linalg.fractional_matrix_power(raw.sum(axis=0), -0.5)
    effects = [HermitianOp(inv_sqrt @ m @ inv_sqrt.conj().T) for m in raw]
    return validate_povm(effects, f"haar-{n}")


def symmetrised_family(family: MeasurementFamily, n: int, rng: RngLike) -> MeasurementFamily:
    """Replace each POVM by the even mixture of ``n`` Haar-random conjugates of it."""
    stream = as_stream(rng)
    povms = []
    for povm in family.povms:
        parts = [(1.0 / n, conjugate_povm(povm, haar_unitary(povm.dim, stream))) for _ in range(n)]
        povms.append(convex_combine(parts, f"sym({povm.label})"))
    return MeasurementFamily(povms, f"sym({family.label})")


@define(frozen=True, eq=False)
class DominationEstimate:
    """
    Brackets for the constants of domination of a family.

    ``lambda_upper`` and ``mu_lower`` are attained by the witnesses (each of
    trace norm one) and can be recomputed with :func:`family_norm`.
    ``lambda_lower`` and ``mu_upper`` come from analytic results named in
    ``provenance``.
    """

    lambda_upper: float
    mu_lower: float
    mu_upper: float = 1.0
    lambda_lower: Optional[float] = None
    witnesses: Dict[str, HermitianOp] = field(factory=dict)
    provenance: Dict[str, str] = field(factory=dict)

    def __attrs_post_init__(self):
        values = [self.lambda_upper, self.mu_lower, self.mu_upper]
        if self.lambda_lower is not None:
            values.append(self.lambda_lower)
            if self.lambda_lower > self.lambda_upper + 1e-9:
                raise ValidationError("analytic lower bound exceeds the witnessed upper bound",
                                      invariant="lambda_bracket",
                                      magnitude=self.lambda_lower - self.lambda_upper)
        if min(values) < -1e-12 or max(values) > 1 + 1e-9:
            raise ValidationError("domination constants must lie in [0, 1]", invariant="range")

    def as_dict(self) -> dict:
        return {
            "lambda_upper": self.lambda_upper,
            "lambda_lower": self.lambda_lower,
            "mu_lower": self.mu_lower,
            "mu_upper": self.mu_upper,
            "provenance": dict(self.provenance),
        }


def _spectral_operator(u: np.ndarray, weights: np.ndarray) -> HermitianOp:
    return HermitianOp((u * weights) @ u.conj().T)


def _split_weights(a: int, r: np.ndarray, s: np.ndarray, d: int) -> np.ndarray:
    w = np.zeros(d)
    w[:a] = 0.5 * r
    w[a:a + s.size] = -0.5 * s
    return w


@define
class _SearchPoint:
    unitary: np.ndarray
    a: int
    r: np.ndarray
    s: np.ndarray
    value: float

    def operator(self) -> HermitianOp:
        d = self.unitary.shape[0]
        return _spectral_operator(self.unitary, _split_weights(self.a, self.r, self.s, d))


def _perturb_unitary(u: np.ndarray, step: float, gen: np.random.Generator) -> np.ndarray:
    d = u.shape[0]
    z = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    h = 0.5 * (z + z.conj().T)
    return scipy.linalg.expm(1j * step * h) @ u


def _perturb_simplex(p: np.ndarray, step: float, gen: np.random.Generator) -> np.ndarray:
    q = p * np.exp(step * gen.standard_normal(p.size))
    return q / q.sum()


def _local_search(
    start: _SearchPoint,
    objective: Callable[[HermitianOp], float],
    gen: np.random.Generator,
    minimise: bool = True,
    vary_spectrum: bool = True,
    step: float = 0.5,
    min_step: float = 1e-4,
    tries: int = 8,
    rtol: float = 1e-6,
    max_sweeps: int = 200,
) -> _SearchPoint:
    """
    Coordinate descent over rank split, spectrum and basis with step halving.

    Moves are accepted only if they improve the objective; the step halves
    after ``tries`` consecutive rejections and the search stops once the step
    is below ``min_step`` or a sweep improves by less than ``rtol``.
    """
    sign = 1.0 if minimise else -1.0
    best = start
    d = best.unitary.shape[0]
    for _ in range(max_sweeps):
        before = best.value
        candidates: List[_SearchPoint] = []
        if vary_spectrum:
            for a in (best.a - 1, best.a + 1):
                if 1 <= a <= d - 1:
                    candidates.append(_SearchPoint(best.unitary, a, np.full(a, 1 / a),
                                                   np.full(d - a, 1 / (d - a)), 0.0))
        for _ in range(tries):
            u = _perturb_unitary(best.unitary, step, gen)
            r, s = best.r, best.s
            if vary_spectrum:
                r = _perturb_simplex(r, step, gen)
                s = _perturb_simplex(s, step, gen)
            candidates.append(_SearchPoint(u, best.a, r, s, 0.0))
        improved = False
        for cand in candidates:
            cand.value = objective(cand.operator())
            if sign * cand.value < sign * best.value:
                best, improved = cand, True
        if not improved:
            step /= 2
            if step < min_step:
                break
        elif abs(before - best.value) <= rtol * max(abs(before), 1e-300):
            break
    return best


def _normalised_value(family: MeasurementFamily, xi: HermitianOp) -> float:
    return family_norm(family, xi) / trace_norm(xi)


def _lambda_restart(family: MeasurementFamily, stream: RandomStream, draws: int) -> _SearchPoint:
    d = family.dim
    gen = stream.generator
    best: Optional[_SearchPoint] = None
    for _ in range(max(draws, 1)):
        a = int(gen.integers(1, d))
        point = _SearchPoint(haar_unitary(d, stream), a, gen.dirichlet(np.ones(a)),
                             gen.dirichlet(np.ones(d - a)), 0.0)
        point.value = _normalised_value(family, point.operator())
        if best is None or point.value < best.value:
            best = point
    return _local_search(best, lambda xi: _normalised_value(family, xi), gen, minimise=True)


def _effect_bases(povms: Sequence[Povm]) -> List[np.ndarray]:
    """Eigenbases of every effect, columns by descending eigenvalue."""
    bases = []
    for povm in povms:
        for effect in povm.stack:
            _, vectors = scipy.linalg.eigh(effect)
            bases.append(vectors[:, ::-1])
    return bases


def _mu_candidates(family: MeasurementFamily) -> List[np.ndarray]:
    """
    Bases whose first two columns separate a pair of effects as well as possible.

    POVMs with more than ``PAIR_SEED_LIMIT`` outcomes fall back to the
    eigenbases of single effects.
    """
    bases = []
    for povm in family.povms:
        if povm.outcomes > PAIR_SEED_LIMIT:
            bases.extend(_effect_bases([povm]))
            continue
        for k in range(povm.outcomes):
            for j in range(k + 1, povm.outcomes):
                _, vectors = scipy.linalg.eigh(povm.stack[k] - povm.stack[j])
                bases.append(vectors[:, ::-1])
    return bases


def _lambda_candidates(family: MeasurementFamily) -> List[np.ndarray]:
    """Bases putting each pair of eigenvectors of one effect first."""
    bases = []
    for u in _effect_bases(family.povms):
        d = u.shape[0]
        for i in range(d):
            for j in range(i + 1, d):
                rest = [k for k in range(d) if k not in (i, j)]
                bases.append(u[:, [i, j] + rest])
    return bases


def _pair_point(u: np.ndarray, value: float = 0.0) -> _SearchPoint:
    d = u.shape[0]
    s = np.zeros(d - 1)
    s[0] = 1.0
    return _SearchPoint(u, 1, np.ones(1), s, value)


def estimate_domination(
    family: MeasurementFamily,
    samples: int,
    restarts: int,
    rng: RngLike,
    lambda_lower: Optional[float] = None,
    lambda_lower_source: str = "",
    settings: Optional[Settings] = None,
) -> DominationEstimate:
    """
    Witnessed brackets on the constants of domination ``lambda`` and ``mu``.

    ``samples`` random traceless unit-trace-norm directions are spread over
    ``restarts`` independent streams; the best of each batch is refined by
    local search and the minimum over restarts gives ``lambda_upper``. The
    same is done for rank-one pairs ``(phi_1 - phi_2)/2`` (maximising) to give
    ``mu_lower``, seeded with eigenbases of effect differences. Rank-one pairs
    built from two eigenvectors of a single effect also enter the ``lambda``
    minimum.

    Args:
        family: A separating measurement family.
        samples: Random directions drawn in total.
        restarts: Independent local searches.
        rng: Random stream; restarts use its children.
        lambda_lower: Optional analytic lower bound to carry in the result.
        lambda_lower_source: Where ``lambda_lower`` comes from.

    Raises:
        ValidationError: the family is not separating, so ``lambda`` is zero.
    """
    if not is_separating(family):
        raise ValidationError(
            f"family {family.label!r} is not separating: some traceless operator is invisible "
            "to it and lambda = 0", invariant="separating")
    settings = settings or get_settings()
    stream = as_stream(rng)
    restarts = max(int(restarts), 1)
    children = stream.split(2 * restarts)
    draws = max(samples // restarts, 1)

    def lam(child: RandomStream) -> _SearchPoint:
        return _lambda_restart(family, child, draws)

    def mu(child: RandomStream) -> _SearchPoint:
        return _mu_restart(family, child, draws)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            lam_points = list(pool.map(lam, children[:restarts]))
            mu_points = list(pool.map(mu, children[restarts:]))
    else:
        lam_points = [lam(c) for c in children[:restarts]]
        mu_points = [mu(c) for c in children[restarts:]]

    for candidate in _mu_candidates(family):
        point = _pair_point(candidate)
        point.value = _normalised_value(family, point.operator())
        mu_points.append(point)
    for candidate in _lambda_candidates(family):
        point = _pair_point(candidate)
        point.value = _normalised_value(family, point.operator())
        lam_points.append(point)

    lam_best = min(lam_points, key=lambda p: p.value)
    mu_best = max(mu_points, key=lambda p: p.value)
    lam_witness = lam_best.operator()
    mu_witness = mu_best.operator()
    lambda_upper = _normalised_value(family, lam_witness)
    mu_lower = _normalised_value(family, mu_witness)
    logger.info("domination_estimate", family=family.label, lambda_upper=lambda_upper,
                mu_lower=mu_lower, restarts=restarts, samples=samples, seed=stream.seed)
    provenance = {"lambda_upper": "witness", "mu_lower": "witness",
                  "mu_upper": "contraction of the trace norm under measurement"}
    if lambda_lower is not None:
        provenance["lambda_lower"] = lambda_lower_source or "analytic"
    return DominationEstimate(
        lambda_upper=min(lambda_upper, 1.0),
        mu_lower=min(mu_lower, 1.0),
        lambda_lower=lambda_lower,
        witnesses={"lambda": lam_witness, "mu": mu_witness},
        provenance=provenance,
    )


def _mu_restart(family: MeasurementFamily, stream: RandomStream, draws: int) -> _SearchPoint:
    d = family.dim
    best: Optional[_SearchPoint] = None
    for _ in range(max(draws, 1)):
        point = _pair_point(haar_unitary(d, stream))
        point.value = _normalised_value(family, point.operator())
        if best is None or point.value > best.value:
            best = point
    return _local_search(best, lambda xi: _normalised_value(family, xi), stream.generator,
                         minimise=False, vary_spectrum=False)


@define(frozen=True, eq=False)
class LambdaOneEstimate:
    """
    ``lambda_one_upper`` is the minimum of the normalised family norm over
    sampled unit-trace-norm operators ``(1-p) rho - p sigma``;
    ``lambda_traceless_upper`` is the same minimum over their traceless parts
    ``(rho - sigma)/2``.
    """

    lambda_one_upper: float
    lambda_traceless_upper: float
    worst_ratio: float
    samples: int


def estimate_lambda_one(family: MeasurementFamily, samples: int, rng: RngLike) -> LambdaOneEstimate:
    """
    Matched-sample estimate of ``lambda_1`` and ``lambda``.

    For every draw ``xi = (1-p) rho - p sigma`` with ``p <= 1/2`` the norm of
    ``xi`` is at least half the norm of ``xi_0 = (rho - sigma)/2``;
    ``worst_ratio`` is the smallest observed ``||xi|| / ||xi_0||`` and must
    not drop below 1/2.
    """
    stream = as_stream(rng)
    gen = stream.generator
    d = family.dim
    lam_one, lam, worst = np.inf, np.inf, np.inf
    for _ in range(samples):
        a = int(gen.integers(1, d))
        u = haar_unitary(d, stream)
        r, s = gen.dirichlet(np.ones(a)), gen.dirichlet(np.ones(d - a))
        p = 0.5 * gen.uniform()
        w = np.zeros(d)
        w[:a], w[a:] = (1 - p) * r, -p * s
        xi = _spectral_operator(u, w)
        xi0 = _spectral_operator(u, _split_weights(a, r, s, d))
        v, v0 = family_norm(family, xi), family_norm(family, xi0)
        lam_one, lam = min(lam_one, v), min(lam, v0)
        if v0 > 0:
            worst = min(worst, v / v0)
    return LambdaOneEstimate(float(lam_one), float(lam), float(worst), int(samples))


def rank_one_pair(u: np.ndarray) -> HermitianOp:
    """``(|u_0><u_0| - |u_1><u_1|)/2`` from the first two columns of ``u``."""
    return _pair_point(np.asarray(u)).operator()


def same_basis_witness(d: int) -> HermitianOp:
    return rank_one_pair(np.eye(d))
