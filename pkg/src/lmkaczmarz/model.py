"""Systems of operator equations ``F_i(x) = y_i`` and their noisy data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .linop import NORM_SAFETY, LinearMap, estimate_operator_norm

__all__ = [
    "DomainViolation",
    "OperatorFamily",
    "NoisyData",
    "residual",
    "make_noisy_data",
    "noise_directions",
    "sample_ball_pairs",
    "estimate_tangential_cone",
]


class DomainViolation(ValueError):
    """Raised when a point leaves the admissible box of an operator family.

    Attributes
    ----------
    index : int
        Coordinate of the first violated bound.
    bound : str
        ``"lower"`` or ``"upper"``.
    """

    def __init__(self, index: int, bound: str, value: float, limit: float):
        self.index = index
        self.bound = bound
        self.value = value
        self.limit = limit
        super().__init__(
            f"coordinate {index} = {value:.6g} violates {bound} bound {limit:.6g}"
        )


@dataclass(frozen=True)
class OperatorFamily:
    """The system ``F_i : R^dim_x -> R^{dim_y[i]}``, ``i = 0..N-1``.

    ``eta`` is the tangential-cone constant claimed by whoever built the
    family; it is metadata, never enforced. ``lipschitz_bound`` may be a
    number or ``None``, in which case :meth:`bound_C` estimates it at a
    given point.
    """

    n_equations: int
    dim_x: int
    dim_y: tuple
    evaluate_i: Callable[[int, np.ndarray], np.ndarray]
    linearize_i: Callable[[int, np.ndarray], LinearMap]
    eta: float = 0.0
    lipschitz_bound: Optional[float] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    ground_truth: Optional[np.ndarray] = None
    monitor_radius: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.n_equations < 1:
            raise ValueError("n_equations must be positive")
        if len(self.dim_y) != self.n_equations:
            raise ValueError("dim_y must list one dimension per equation")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        for arr in (self.lower, self.upper, self.ground_truth):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def N(self) -> int:
        return self.n_equations

    def check_domain(self, x: np.ndarray) -> None:
        if self.lower is not None:
            bad = np.flatnonzero(x < self.lower)
            if bad.size:
                j = int(bad[0])
                raise DomainViolation(j, "lower", float(x[j]), float(self.lower[j]))
        if self.upper is not None:
            bad = np.flatnonzero(x > self.upper)
            if bad.size:
                j = int(bad[0])
                raise DomainViolation(j, "upper", float(x[j]), float(self.upper[j]))

    def evaluate(self, i: int, x) -> np.ndarray:
        x = self._as_point(x)
        self._check_index(i)
        self.check_domain(x)
        return np.asarray(self.evaluate_i(i, x), dtype=float)

    def linearize(self, i: int, x) -> LinearMap:
        x = self._as_point(x)
        self._check_index(i)
        self.check_domain(x)
        return self.linearize_i(i, x)

    def bound_C(self, x, iters: int = 100, seed: int = 0) -> float:
        """Return ``lipschitz_bound`` or a safety-scaled estimate at ``x``."""
        if self.lipschitz_bound is not None:
            return float(self.lipschitz_bound)
        return NORM_SAFETY * max(
            estimate_operator_norm(self.linearize(i, x), iters, seed)
            for i in range(self.N)
        )

    def _as_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim_x,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim_x},)")
        return x

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.N:
            raise IndexError(f"equation index {i} out of range for N={self.N}")


@dataclass(frozen=True)
class NoisyData:
    """Perturbed data ``y_delta[i]`` with ``|y_delta[i] - y[i]| <= delta[i]``."""

    y_delta: tuple
    delta: np.ndarray
    seed: Optional[int] = None
    exact_y: Optional[tuple] = None
    rel_noise: float = 0.0

    @property
    def is_exact(self) -> bool:
        return bool(np.all(self.delta == 0.0))

    @property
    def delta_min(self) -> float:
        return float(np.min(self.delta))

    @classmethod
    def exact(cls, y: Sequence) -> "NoisyData":
        y = tuple(np.array(v, dtype=float) for v in y)
        return cls(y, np.zeros(len(y)), None, y, 0.0)


def residual(family: OperatorFamily, i: int, x, data: NoisyData):
    """Return ``(y_delta[i] - F_i(x), |y_delta[i] - F_i(x)|)``.

    Raises :class:`DomainViolation` if ``x`` is outside the family's box.
    """
    r = data.y_delta[i] - family.evaluate(i, x)
    return r, float(np.linalg.norm(r))


def make_noisy_data(
    exact_y: Sequence,
    rel_noise: float,
    seed: int,
    directions: Optional[Sequence] = None,
) -> NoisyData:
    """Add Gaussian noise rescaled to norm exactly ``rel_noise * |y_i|``.

    ``directions`` overrides the random draw with fixed unit-normalized
    directions; a noise sweep uses this to scale one direction by several
    amplitudes.
    """
    if not rel_noise >= 0.0 or not np.isfinite(rel_noise):
        raise ValueError(f"rel_noise must be a finite nonnegative number, got {rel_noise}")
    exact = tuple(np.array(y, dtype=float) for y in exact_y)
    for y in exact:
        if not np.all(np.isfinite(y)):
            raise ValueError("exact data contains non-finite values")
    if directions is None:
        directions = noise_directions(exact, seed)
    y_delta = []
    delta = np.empty(len(exact))
    for i, (y, d) in enumerate(zip(exact, directions)):
        delta[i] = rel_noise * np.linalg.norm(y)
        nd = np.linalg.norm(d)
        if delta[i] == 0.0 or nd == 0.0:
            y_delta.append(y.copy())
            continue
        y_delta.append(y + (delta[i] / nd) * d)
    delta.setflags(write=False)
    return NoisyData(tuple(y_delta), delta, seed, exact, float(rel_noise))


def noise_directions(exact_y: Sequence, seed: int) -> list:
    """Seeded unit Gaussian directions, one per data block."""
    rng = np.random.default_rng(seed)
    out = []
    for y in exact_y:
        d = rng.standard_normal(np.shape(y))
        out.append(d / np.linalg.norm(d))
    return out


def estimate_tangential_cone(
    family: OperatorFamily,
    i: int,
    x_center,
    radius: float,
    n_samples: int = 50,
    seed: int = 0,
) -> float:
    """Empirical lower bound on the tangential-cone constant of ``F_i``.

    Draws pairs ``(x, xbar)`` uniformly in the ball of the given radius
    around ``x_center`` (rejecting points outside the family's box) and
    returns the largest ratio

        |F(xbar) - F(x) - F'(x)(xbar - x)| / |F(xbar) - F(x)|.

    Pairs with denominator below ``1e-14`` are skipped.
    """
    x_center = np.asarray(x_center, dtype=float)
    rng = np.random.default_rng(seed)
    pairs = sample_ball_pairs(family, x_center, radius, n_samples, rng)
    worst = None
    for x, xbar in pairs:
        Fx = family.evaluate(i, x)
        diff = family.evaluate(i, xbar) - Fx
        den = np.linalg.norm(diff)
        if den < 1e-14:
            continue
        lin = family.linearize(i, x).forward(xbar - x)
        ratio = np.linalg.norm(diff - lin) / den
        worst = ratio if worst is None else max(worst, ratio)
    if worst is None:
        raise ValueError("no informative samples")
    return float(worst)


def sample_ball_pairs(family, x_center, radius, n_samples, rng, max_tries=100):
    """Seeded pairs of points in the ball around ``x_center`` within the box."""

    def draw():
        for _ in range(max_tries):
            d = rng.standard_normal(family.dim_x)
            d *= radius * rng.uniform() ** (1.0 / family.dim_x) / np.linalg.norm(d)
            p = x_center + d
            try:
                family.check_domain(p)
            except DomainViolation:
                continue
            return p
        raise ValueError("could not sample an admissible point in the ball")

    return [(draw(), draw()) for _ in range(n_samples)]
