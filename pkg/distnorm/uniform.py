"""
The uniform (isotropic) POVM.

Its norm on a traceless operator depends only on the spectrum. For the
flat rank split ``xi = P/(2a) - Q/(2b)`` the value has the closed form

    1 - (1/(a+b)) * sum_{k<a, l<b} p^k (1-p)^l C(k+l, k),   p = a/(a+b)

and ``lambda`` of the uniform POVM is its minimum over splits. The double
sum is evaluated by a multiplicative term recurrence carried in log space,
so no factorial is ever formed and ``d`` up to 10^4 stays finite.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import structlog
from attrs import define, field

from .config import Settings
from .errors import DimensionError, ValidationError
from .operators import HermitianOp
from .sampling import McEstimate, RngLike, as_stream, haar_vectors, log_estimate, monte_carlo, require_samples

logger = structlog.get_logger(__name__)


def _positive_rank(instance, attribute, value):
    if value < 1:
        raise ValidationError(f"rank {attribute.name}={value} must be at least 1", invariant="split",
                              magnitude=float(value))


@define(frozen=True)
class RankSplit:
    """A traceless direction with flat spectra on ranks ``a`` and ``b``; stored with ``a <= b``."""

    a: int = field(converter=int, validator=_positive_rank)
    b: int = field(converter=int, validator=_positive_rank)

    def __attrs_post_init__(self):
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.a + self.b

    @property
    def p(self) -> float:
        return self.a / self.d

    @property
    def balanced(self) -> bool:
        return self.a == self.d // 2

    def as_list(self):
        return [self.a, self.b]


def _log_row(start: float, k: int, length: int, log_q: float) -> np.ndarray:
    """Logs of ``p^k q^l C(k+l, k)`` for ``l = 0..length-1`` given ``start = k log p``."""
    if length == 1:
        return np.array([start])
    l = np.arange(1, length)
    steps = log_q + np.log((k + l) / l)
    return start + np.concatenate([[0.0], np.cumsum(steps)])


def split_bias_closed_form(split: RankSplit) -> float:
    """Norm of the uniform POVM on the flat rank split, by term recurrence."""
    a, b, d = split.a, split.b, split.d
    log_p, log_q = np.log(split.p), np.log1p(-split.p)
    total = 0.0
    for k in range(a):
        total += float(np.sum(np.exp(_log_row(k * log_p, k, b, log_q))))
    return 1.0 - total / d


def lambda_uniform(d: int) -> Tuple[float, RankSplit]:
    """
    ``lambda`` of the uniform POVM in dimension ``d`` and the minimising split.

    Every split ``1 <= a <= d/2`` is evaluated; the balanced split is never
    assumed to be the minimiser.

    Raises:
        DimensionError: ``d < 2``.
    """
    if d < 2:
        raise DimensionError(f"lambda needs d >= 2, got {d}", invariant="dim", magnitude=float(d))
    best_value, best_split = np.inf, None
    for a in range(1, d // 2 + 1):
        split = RankSplit(a, d - a)
        value = split_bias_closed_form(split)
        if value < best_value:
            best_value, best_split = value, split
    logger.debug("lambda_uniform", d=d, value=best_value, argmin=best_split.as_list(),
                 balanced=best_split.balanced)
    return float(best_value), best_split


def lambda_uniform_even_form(d: int) -> float:
    """``(1/d) sum_{k < d/2} 4^{-k} C(2k, k)`` for even ``d``."""
    if d < 2 or d % 2:
        raise DimensionError(f"even form needs an even d >= 2, got {d}", invariant="even_dim",
                             magnitude=float(d))
    term, total = 1.0, 0.0
    for k in range(d // 2):
        total += term
        term *= (2 * k + 1) / (2 * k + 2)
    return total / d


def binomial_partial_sum(k: int) -> float:
    """``sum_{l=0}^{k} 2^{-(k+l)} C(k+l, l)``, identically one."""
    if k < 0:
        raise ValidationError(f"k must be nonnegative, got {k}", invariant="k", magnitude=float(k))
    logs = _log_row(-k * np.log(2.0), k, k + 1, -np.log(2.0))
    return float(np.sum(np.exp(logs)))


def lambda_uniform_asymptote(d: int) -> float:
    return float(np.sqrt(2.0 / (np.pi * d)))


def clt_split_bias(a: int, b: int) -> float:
    """Central-limit approximation ``sqrt(2/pi) sqrt(1/(4a) + 1/(4b))`` of the split value."""
    return float(np.sqrt(2.0 / np.pi) * np.sqrt(1.0 / (4 * a) + 1.0 / (4 * b)))


def mu_uniform() -> float:
    return 0.5


def rank_split_operator(split: RankSplit, d: Optional[int] = None) -> HermitianOp:
    """
    ``P/(2a) - Q/(2b)`` on the first ``a + b`` basis vectors of ``C^d``.

    Raises:
        DimensionError: ``d < a + b``.
    """
    d = split.d if d is None else int(d)
    if d < split.d:
        raise DimensionError(f"split {split.as_list()} does not fit in d={d}", invariant="dim")
    values = np.zeros(d)
    values[:split.a] = 1.0 / (2 * split.a)
    values[split.a:split.d] = -1.0 / (2 * split.b)
    return HermitianOp(np.diag(values))


def uniform_overlaps(xi: HermitianOp, samples: int, rng: RngLike,
                     settings: Optional[Settings] = None) -> np.ndarray:
    """``tr(psi xi)`` for ``samples`` Haar vectors, drawn chunk by chunk."""
    d = xi.dim
    entries = xi.entries

    def draw(gen: np.random.Generator, n: int) -> np.ndarray:
        v = haar_vectors(gen, d, n)
        return np.real(np.einsum("ni,ij,nj->n", v.conj(), entries, v))

    return monte_carlo(draw, samples, rng, settings)


def mc_uniform_bias(xi: HermitianOp, samples: int, rng: RngLike,
                    settings: Optional[Settings] = None) -> McEstimate:
    """
    Monte-Carlo estimate of ``d E|tr(psi xi)|`` over Haar ``psi``.

    Args:
        xi: Hermitian operator.
        samples: At least 100 draws.
        rng: Seed or stream.

    Returns:
        McEstimate with mean, standard error, sample count and seed.
    """
    require_samples(samples)
    stream = as_stream(rng)
    values = xi.dim * np.abs(uniform_overlaps(xi, samples, stream, settings))
    return log_estimate("mc_uniform_bias", McEstimate.from_values(values, stream.seed), d=xi.dim)
