"""
Seeded randomness and Monte-Carlo plumbing.

Every stochastic operation takes a :class:`RandomStream` (or a bare integer
seed). Monte-Carlo loops are cut into fixed-size chunks; chunk ``k`` always
draws from child stream ``k`` and chunks are reduced in order, so a result
depends only on the seed and the sample count, never on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from attrs import define, field
from scipy.stats import unitary_group

from .config import Settings, get_settings
from .errors import SampleSizeError, ValidationError
from .operators import HermitianOp, PureState

logger = structlog.get_logger(__name__)


@define(eq=False)
class RandomStream:
    """
    A named pseudorandom stream that can be split into independent children.

    ``seed`` is the root seed the stream descends from; ``name`` records the
    split path (``"root/2/0"``) so results can say where their draws came from.
    """

    seed: int
    name: str = "root"
    _sequence: np.random.SeedSequence = field(default=None, repr=False)
    _generator: np.random.Generator = field(default=None, repr=False)

    def __attrs_post_init__(self):
        if self._sequence is None:
            self._sequence = np.random.SeedSequence(int(self.seed))
        self._generator = np.random.default_rng(self._sequence)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def split(self, n: int) -> List["RandomStream"]:
        children = self._sequence.spawn(int(n))
        return [
            RandomStream(self.seed, f"{self.name}/{i}", child)
            for i, child in enumerate(children)
        ]


RngLike = Union[RandomStream, int, None]


def as_stream(rng: RngLike) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(0 if rng is None else int(rng))


@define(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    @classmethod
    def from_values(cls, values: np.ndarray, seed: int) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        if n < 1:
            raise SampleSizeError("no samples", invariant="samples", magnitude=0.0)
        std_error = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(values)), std_error, int(n), int(seed))

    def within(self, target: float, sigmas: float = 5.0, slack: float = 1e-12) -> bool:
        return abs(self.mean - target) <= sigmas * self.std_error + slack

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error,
                "samples": self.samples, "seed": self.seed}


def require_samples(samples: int, minimum: int = 100) -> int:
    if samples < minimum:
        raise SampleSizeError(f"need at least {minimum} samples, got {samples}",
                              invariant="samples", magnitude=float(samples))
    return int(samples)


def monte_carlo(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    samples: int,
    rng: RngLike,
    settings: Optional[Settings] = None,
) -> np.ndarray:
    """
    Evaluate ``draw(generator, n)`` over fixed-size chunks and stack the results.

    Args:
        draw: Returns an array whose first axis has length ``n``.
        samples: Total number of draws.
        rng: Parent stream; one child per chunk is spawned from it.
        settings: Supplies ``chunk_size`` and ``threads``.

    Returns:
        The concatenation of all chunk results in chunk order.
    """
    settings = settings or get_settings()
    stream = as_stream(rng)
    sizes = [settings.chunk_size] * (samples // settings.chunk_size)
    if samples % settings.chunk_size:
        sizes.append(samples % settings.chunk_size)
    children = stream.split(len(sizes))

    def run(job: Tuple[RandomStream, int]) -> np.ndarray:
        child, n = job
        return draw(child.generator, n)

    jobs = list(zip(children, sizes))
    if settings.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return np.concatenate(parts, axis=0)


def haar_vectors(generator: np.random.Generator, d: int, n: int) -> np.ndarray:
    """``n`` Haar-random unit vectors in ``C^d`` as the rows of an ``(n, d)`` array."""
    z = generator.standard_normal((n, d)) + 1j * generator.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_state(d: int, rng: RngLike) -> PureState:
    if d < 1:
        raise ValidationError("dimension must be at least 1", invariant="dim", magnitude=float(d))
    return PureState.normalised(haar_vectors(as_stream(rng).generator, d, 1)[0])


def haar_unitary(d: int, rng: RngLike) -> np.ndarray:
    if d == 1:
        phase = as_stream(rng).generator.uniform(0, 2 * np.pi)
        return np.array([[np.exp(1j * phase)]])
    return unitary_group.rvs(d, random_state=as_stream(rng).generator)


def random_density(d: int, rng: RngLike, rank: Optional[int] = None) -> HermitianOp:
    """A random density matrix of the given rank: Dirichlet spectrum in a Haar basis."""
    stream = as_stream(rng)
    rank = d if rank is None else rank
    weights = np.zeros(d)
    weights[:rank] = stream.generator.dirichlet(np.ones(rank))
    u = haar_unitary(d, stream)
    return HermitianOp((u * weights) @ u.conj().T)


def random_traceless_direction(
    d: int,
    rng: RngLike,
    split: Optional[Sequence[int]] = None,
    flat: bool = False,
) -> HermitianOp:
    """
    ``xi = (rho - sigma)/2`` for random orthogonal states ``rho`` and ``sigma``.

    Args:
        d: Dimension, at least 2.
        rng: Random stream.
        split: Ranks ``(a, b)`` of ``rho`` and ``sigma`` with ``a + b <= d``;
            drawn uniformly from ``a + b = d`` when omitted.
        flat: Use maximally mixed ``rho`` and ``sigma`` on their supports
            instead of Dirichlet spectra.
    """
    if d < 2:
        raise ValidationError("traceless directions need d >= 2", invariant="dim",
                              magnitude=float(d))
    stream = as_stream(rng)
    gen = stream.generator
    if split is None:
        a = int(gen.integers(1, d))
        b = d - a
    else:
        a, b = (int(x) for x in split)
    if a < 1 or b < 1 or a + b > d:
        raise ValidationError(f"invalid rank split ({a}, {b}) for d={d}", invariant="split")
    if flat:
        r, s = np.full(a, 1.0 / a), np.full(b, 1.0 / b)
    else:
        r, s = gen.dirichlet(np.ones(a)), gen.dirichlet(np.ones(b))
    weights = np.zeros(d)
    weights[:a] = 0.5 * r
    weights[a:a + b] = -0.5 * s
    u = haar_unitary(d, stream)
    return HermitianOp((u * weights) @ u.conj().T)


def random_orthogonal_pair(d: int, rng: RngLike) -> Tuple[HermitianOp, HermitianOp]:
    """Orthogonal density matrices with random ranks and spectra."""
    xi = random_traceless_direction(d, rng)
    values, vectors = np.linalg.eigh(xi.entries)
    pos = np.clip(values, 0, None)
    neg = np.clip(-values, 0, None)
    rho = (vectors * (pos / pos.sum())) @ vectors.conj().T
    sigma = (vectors * (neg / neg.sum())) @ vectors.conj().T
    return HermitianOp(rho), HermitianOp(sigma)


def random_traceless(d: int, rng: RngLike, shape: Optional[Tuple[int, int]] = None) -> HermitianOp:
    """A Gaussian traceless Hermitian operator (GUE with its trace removed)."""
    gen = as_stream(rng).generator
    z = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    h = 0.5 * (z + z.conj().T)
    h -= np.trace(h).real / d * np.eye(d)
    return HermitianOp(h, shape)


def random_hermitian(d: int, rng: RngLike, shape: Optional[Tuple[int, int]] = None) -> HermitianOp:
    gen = as_stream(rng).generator
    z = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return HermitianOp(0.5 * (z + z.conj().T), shape)


def log_estimate(event: str, estimate: McEstimate, **context) -> McEstimate:
    logger.info(event, mean=estimate.mean, std_error=estimate.std_error,
                samples=estimate.samples, seed=estimate.seed, **context)
    return estimate
