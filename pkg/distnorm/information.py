"""
Entropic consequences of the bias bounds: certainty relations for MUBs and
2-designs, Monte-Carlo lower bounds on accessible information, and the
l1 inequality ``||p - q||_1 >= 1 - n p.q`` with its tightness family.

All entropies are in bits.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from attrs import define, field
from scipy.special import rel_entr
from scipy.stats import entropy as shannon_entropy

from .config import Settings
from .designs import WeightedDesign, design_povm, mub_vectors
from .errors import DimensionError, ValidationError
from .operators import HermitianOp, PureState, require_density, trace_norm
from .povm import apply_povm
from .report import Report
from .sampling import McEstimate, RngLike, as_stream, haar_vectors, monte_carlo, require_samples

logger = structlog.get_logger(__name__)

LN2 = float(np.log(2.0))
SINGLE_CONSTANT = 1.0 / (18.0 * LN2)
BIPARTITE_CONSTANT = 1.0 / (306.0 * LN2)
DESIGN_CONSTANT = 1.0 / (6.0 * LN2)
ORDERS = ("shannon", "renyi2")


def _distribution(values, name: str = "p", tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(values, dtype=float).ravel()
    if p.size == 0:
        raise ValidationError(f"{name} is empty", invariant="distribution")
    if np.any(p < 0):
        raise ValidationError(f"{name} has negative entries", invariant="nonnegative",
                              magnitude=float(-p.min()))
    gap = abs(float(p.sum()) - 1.0)
    if gap > tol:
        raise ValidationError(f"{name} does not sum to one", invariant="normalised", magnitude=gap)
    return p


def _pair(p, q) -> Tuple[np.ndarray, np.ndarray]:
    p, q = _distribution(p, "p"), _distribution(q, "q")
    if p.size != q.size:
        raise DimensionError(f"distributions have lengths {p.size} and {q.size}", invariant="length")
    return p, q


def entropy(dist, order: str = "shannon") -> float:
    """
    Shannon or collision (Renyi-2) entropy in bits.

    Raises:
        ValidationError: negative entries or an unknown order.
    """
    p = _distribution(dist)
    if order == "shannon":
        return float(shannon_entropy(p, base=2))
    if order == "renyi2":
        return float(-np.log2(np.sum(p * p)))
    raise ValidationError(f"unknown entropy order {order!r}", invariant="order")


def relative_entropy(p, q) -> float:
    """``D(p||q)`` in bits; infinite when ``p`` is not supported inside ``q``."""
    p, q = _pair(p, q)
    return float(np.sum(rel_entr(p, q)) / LN2)


def pinsker_gap(p, q) -> float:
    """``D(p||q) - ||p - q||_1^2 / (2 ln 2)``; ``inf`` on a support violation."""
    p, q = _pair(p, q)
    return relative_entropy(p, q) - float(np.sum(np.abs(p - q))) ** 2 / (2 * LN2)


def l1_inner_gap(p, q) -> float:
    """``||p - q||_1 - (1 - n p.q)``, never negative."""
    p, q = _pair(p, q)
    return float(np.sum(np.abs(p - q)) - (1.0 - p.size * np.dot(p, q)))


def quantum_l1_inner_gap(rho: HermitianOp, sigma: HermitianOp) -> float:
    """``||rho - sigma||_1 - (1 - d tr(rho sigma))``, never negative."""
    require_density(rho, "rho")
    require_density(sigma, "sigma")
    if rho.dim != sigma.dim:
        raise DimensionError("states have different dimensions", invariant="dim")
    overlap = float(np.vdot(sigma.entries, rho.entries).real)
    return trace_norm(rho - sigma) - (1.0 - rho.dim * overlap)


def fidelity_gap(p, q) -> float:
    """``||p - q||_1 / 2 - (1 - sum sqrt(p q))``, never negative."""
    p, q = _pair(p, q)
    return float(0.5 * np.sum(np.abs(p - q)) - (1.0 - np.sum(np.sqrt(p * q))))


def montanaro_family(n: int, x: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``p = (x, 0, r, ..., r)`` and ``q = (0, x, r, ..., r)`` with ``r = (1-x)/(n-2)``.

    Their ratio ``(1 - n p.q) / ||p - q||_1`` approaches one, so the l1
    inequality admits no constant below one.
    """
    if n < 3:
        raise DimensionError(f"family needs n >= 3, got {n}", invariant="length")
    if not 0 < x <= 1:
        raise ValidationError(f"x must lie in (0, 1], got {x}", invariant="x")
    rest = np.full(n - 2, (1.0 - x) / (n - 2))
    p = np.concatenate([[x, 0.0], rest])
    q = np.concatenate([[0.0, x], rest])
    return p, q


def montanaro_ratio(n: int, x: float) -> float:
    p, q = montanaro_family(n, x)
    return float((1.0 - n * np.dot(p, q)) / np.sum(np.abs(p - q)))


def montanaro_ratio_sweep(ns: Sequence[int], xs: Optional[Sequence[float]] = None) -> Report:
    """Largest ratio over ``xs`` for every ``n``; ``xs`` defaults to a log grid on (0, 0.2]."""
    xs = np.geomspace(1e-4, 0.2, 400) if xs is None else np.asarray(xs, dtype=float)
    report = Report("l1_sweep", {"x_min": float(xs.min()), "x_max": float(xs.max()), "points": len(xs)})
    for n in ns:
        ratios = np.array([montanaro_ratio(int(n), float(x)) for x in xs])
        best = int(np.argmax(ratios))
        p, q = montanaro_family(int(n), float(xs[best]))
        report.rows.append({"n": int(n), "x": float(xs[best]), "ratio": float(ratios[best]),
                            "gap": l1_inner_gap(p, q)})
        report.check("l1_inequality", l1_inner_gap(p, q) >= -1e-12, n=int(n))
    return report


def _as_pure(state: Union[PureState, HermitianOp], tol: float = 1e-9) -> np.ndarray:
    """Amplitudes of a pure state; a density matrix is accepted only when it has rank one."""
    if isinstance(state, PureState):
        return state.amplitudes
    require_density(state, "state")
    values, vectors = np.linalg.eigh(state.entries)
    if abs(values[-1] - 1.0) > tol:
        raise ValidationError("state is not pure", invariant="pure", magnitude=float(1.0 - values[-1]))
    return vectors[:, -1]


def mub_certainty_check(d: int, state: Union[PureState, HermitianOp], tol: float = 1e-9) -> Report:
    """
    Sum of collision entropies over the ``d + 1`` mutually unbiased bases,
    checked against ``(d+1) log2((d+1)/2) <= sum <= (d+1) log2 d - log2(d-1)``.
    """
    vectors = mub_vectors(d)
    psi = _as_pure(state)
    if psi.size != d:
        raise DimensionError(f"state dimension {psi.size} != {d}", invariant="dim")
    probabilities = (np.abs(vectors.conj() @ psi) ** 2).reshape(d + 1, d)
    per_basis = [entropy(p / p.sum(), "renyi2") for p in probabilities]
    total = float(sum(per_basis))
    lower = (d + 1) * np.log2((d + 1) / 2)
    upper = (d + 1) * np.log2(d) - np.log2(d - 1)
    report = Report("mub_certainty", {"d": d, "entropies": per_basis, "sum": total,
                                      "lower": float(lower), "upper": float(upper)})
    report.check("lower", total >= lower - tol, sum=total, bound=float(lower))
    report.check("upper", total <= upper + tol, sum=total, bound=float(upper))
    return report


def design_certainty_check(design: WeightedDesign, state: Union[PureState, HermitianOp],
                           tol: float = 1e-9) -> Report:
    """
    Entropic certainty chain for a proper 2-design POVM on a pure state:

        log2 n - H_2 >= log2 n - H >= ||M(phi - 1/d)||_1^2 / (2 ln 2)
                     >= (d-1) / (4 ln 2 d (d+1)^2) >= 1 / (6 ln 2 (d+1)^2).

    The last link holds for ``d >= 3`` only; for ``d = 2`` the measured gap
    is compared with the final constant directly.

    Raises:
        ValidationError: the design is not proper or the state is not pure.
    """
    if not design.proper:
        raise ValidationError("design is not proper", invariant="proper")
    psi = _as_pure(state)
    d, n = design.d, design.n
    povm = design_povm(design)
    rho = HermitianOp(np.outer(psi, psi.conj()))
    q = np.clip(apply_povm(povm, rho), 0.0, None)
    q /= q.sum()
    xi = rho - HermitianOp(np.eye(d) / d)
    left = float(np.log2(n) - entropy(q, "renyi2"))
    shannon_gap = float(np.log2(n) - entropy(q, "shannon"))
    pinsker = float(np.sum(np.abs(apply_povm(povm, xi)))) ** 2 / (2 * LN2)
    theorem = (d - 1) / (4 * LN2 * d * (d + 1) ** 2)
    final = DESIGN_CONSTANT / (d + 1) ** 2
    report = Report("design_certainty", {"d": d, "n": n, "collision_gap": left,
                                         "shannon_gap": shannon_gap, "pinsker": pinsker,
                                         "theorem_bound": theorem, "final_bound": final})
    report.check("renyi_vs_shannon", left >= shannon_gap - tol, left=left, right=shannon_gap)
    report.check("pinsker", shannon_gap >= pinsker - tol, left=shannon_gap, right=pinsker)
    report.check("two_design_bound", pinsker >= theorem - tol, left=pinsker, right=theorem)
    if d >= 3:
        report.check("final_constant", theorem >= final - tol, left=theorem, right=final)
    else:
        report.check("final_constant", left >= final - tol, left=left, right=final)
    return report


def linear_entropy(rho: HermitianOp) -> float:
    """``1 - tr rho^2``."""
    require_density(rho, "rho")
    return float(1.0 - np.vdot(rho.entries, rho.entries).real)


def _ensemble_items(items) -> Tuple[Tuple[float, HermitianOp], ...]:
    return tuple((float(p), rho) for p, rho in items)


@define(frozen=True, eq=False)
class Ensemble:
    """Probabilities ``p_x`` with density matrices ``rho_x``; ``average`` is ``sum p_x rho_x``."""

    items: Tuple[Tuple[float, HermitianOp], ...] = field(converter=_ensemble_items)
    average: HermitianOp = field(init=False, repr=False)

    def __attrs_post_init__(self):
        if not self.items:
            raise ValidationError("ensemble is empty", invariant="non_empty")
        probabilities = np.array([p for p, _ in self.items])
        if np.any(probabilities < 0):
            raise ValidationError("negative probability", invariant="probabilities")
        gap = abs(float(probabilities.sum()) - 1.0)
        if gap > 1e-12:
            raise ValidationError("probabilities do not sum to one", invariant="probabilities",
                                  magnitude=gap)
        dims = {rho.dim for _, rho in self.items}
        if len(dims) != 1:
            raise DimensionError("ensemble states have different dimensions", invariant="dim")
        for _, rho in self.items:
            require_density(rho, "ensemble state")
        first = self.items[0][1]
        total = sum(p * rho.entries for p, rho in self.items)
        object.__setattr__(self, "average", HermitianOp(total, first.shape))

    @property
    def dim(self) -> int:
        return self.average.dim

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    def holevo_gap(self) -> float:
        """``S_L(rho) - sum p_x S_L(rho_x)``."""
        return linear_entropy(self.average) - sum(p * linear_entropy(rho) for p, rho in self.items)


def _information_density(ensemble: Ensemble, vectors: np.ndarray) -> np.ndarray:
    """``D sum_x p_x q_x log2(q_x / q)`` per sampled vector, ``q_x = <v|rho_x|v>``."""
    stack = np.stack([rho.entries for _, rho in ensemble.items])
    q_x = np.real(np.einsum("ni,xij,nj->nx", vectors.conj(), stack, vectors))
    q_x = np.clip(q_x, 0.0, None)
    p = ensemble.probabilities
    q = q_x @ p
    terms = rel_entr(q_x, q[:, None]) / LN2
    return ensemble.dim * (terms @ p)


def mc_accessible_info_lower(ensemble: Ensemble, mode: str = "single", samples: int = 100000,
                             rng: RngLike = 0, settings: Optional[Settings] = None) -> Report:
    """
    Monte-Carlo mutual information between the ensemble label and the outcome
    of the uniform POVM (``mode="single"``) or of the product of local
    uniform POVMs (``mode="bipartite"``), against the linear-entropy lower bound.

    Raises:
        ValidationError: unknown mode.
        DimensionError: bipartite mode without a shape.
    """
    require_samples(samples)
    stream = as_stream(rng)
    if mode == "single":
        constant = SINGLE_CONSTANT

        def draw(gen: np.random.Generator, n: int) -> np.ndarray:
            return _information_density(ensemble, haar_vectors(gen, ensemble.dim, n))
    elif mode == "bipartite":
        shape = ensemble.average.shape
        if shape is None:
            raise DimensionError("bipartite mode needs states with a shape", invariant="shape")
        constant = BIPARTITE_CONSTANT
        d_a, d_b = shape

        def draw(gen: np.random.Generator, n: int) -> np.ndarray:
            phi = haar_vectors(gen, d_a, n)
            psi = haar_vectors(gen, d_b, n)
            vectors = np.einsum("ni,nj->nij", phi, psi).reshape(n, d_a * d_b)
            return _information_density(ensemble, vectors)
    else:
        raise ValidationError(f"unknown mode {mode!r}", invariant="mode")
    values = monte_carlo(draw, samples, stream, settings)
    estimate = McEstimate.from_values(values, stream.seed)
    bound = constant * ensemble.holevo_gap()
    report = Report("accinfo", {"mode": mode, "estimate": estimate.as_dict(), "bound": bound,
                                "constant": constant, "holevo_gap": ensemble.holevo_gap()})
    report.check("accessible_information", estimate.mean >= bound - 5 * estimate.std_error - 1e-12,
                 estimate=estimate.mean, bound=bound)
    logger.info("mc_accessible_info", mode=mode, mean=estimate.mean, std_error=estimate.std_error,
                samples=samples, seed=stream.seed, bound=bound)
    return report
