"""Linear operators and the regularized normal-equation solve.

Every operator here is matrix-free: only forward and adjoint products are
required. Dense materialization is used only when a map is small enough
(see :class:`InnerSolvePolicy.dense_threshold`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

__all__ = [
    "LinearMap",
    "InnerSolvePolicy",
    "InnerSolveResult",
    "apply",
    "apply_adjoint",
    "as_dense",
    "adjoint_mismatch",
    "solve_regularized_normal",
    "resolvent_residual",
    "estimate_operator_norm",
    "NORM_SAFETY",
]

#: Factor applied to power-iteration estimates before they are used as an
#: upper bound on the operator norm.
NORM_SAFETY = 1.05

Vector = np.ndarray


@dataclass(frozen=True)
class LinearMap:
    """A bounded linear map ``R^dim_in -> R^dim_out`` with its adjoint.

    Parameters
    ----------
    dim_in, dim_out : int
        Input and output dimensions.
    forward : callable
        ``u -> A u``.
    adjoint : callable
        ``w -> A^T w`` with respect to the Euclidean inner products.
    """

    dim_in: int
    dim_out: int
    forward: Callable[[Vector], Vector]
    adjoint: Callable[[Vector], Vector]

    @classmethod
    def from_matrix(cls, matrix) -> "LinearMap":
        A = np.array(matrix, dtype=float)
        if A.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        A.setflags(write=False)
        return cls(A.shape[1], A.shape[0], lambda u: A @ u, lambda w: A.T @ w)

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(n, n, lambda u: np.array(u, dtype=float), lambda w: np.array(w, dtype=float))

    @classmethod
    def zero(cls, dim_in: int, dim_out: int) -> "LinearMap":
        return cls(dim_in, dim_out, lambda u: np.zeros(dim_out), lambda w: np.zeros(dim_in))

    def __matmul__(self, u):
        return apply(self, u)


def _check_vector(v, n: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != n:
        raise ValueError(f"{what} has shape {v.shape}, expected ({n},)")
    return v


def apply(map: LinearMap, u) -> np.ndarray:
    """Return ``A u``; raises ``ValueError`` on a dimension mismatch."""
    u = _check_vector(u, map.dim_in, "input vector")
    return np.asarray(map.forward(u.copy()), dtype=float)


def apply_adjoint(map: LinearMap, w) -> np.ndarray:
    """Return ``A^T w``; raises ``ValueError`` on a dimension mismatch."""
    w = _check_vector(w, map.dim_out, "output vector")
    return np.asarray(map.adjoint(w.copy()), dtype=float)


def as_dense(map: LinearMap) -> np.ndarray:
    """Materialize ``map`` column by column."""
    cols = np.empty((map.dim_out, map.dim_in))
    e = np.zeros(map.dim_in)
    for j in range(map.dim_in):
        e[j] = 1.0
        cols[:, j] = apply(map, e)
        e[j] = 0.0
    return cols


def adjoint_mismatch(map: LinearMap, n_probes: int = 100, seed: int = 0) -> float:
    """Largest normalized gap ``|<Au, w> - <u, A^T w>|`` over random probes.

    Each gap is divided by ``|Au||w| + |u||A^T w|`` (plus a tiny floor), so
    the result is a relative error suitable for a ``1e-8`` threshold.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(map.dim_in)
        w = rng.standard_normal(map.dim_out)
        Au = apply(map, u)
        Atw = apply_adjoint(map, w)
        scale = np.linalg.norm(Au) * np.linalg.norm(w) + np.linalg.norm(u) * np.linalg.norm(Atw)
        gap = abs(Au @ w - u @ Atw) / (scale + np.finfo(float).tiny)
        worst = max(worst, gap)
    return worst


@dataclass(frozen=True)
class InnerSolvePolicy:
    """How the Levenberg-Marquardt linear system is solved.

    ``mode`` is ``"direct-dense"`` or ``"conjugate-gradient"``. Direct mode
    is only allowed when both dimensions of the map are at most
    ``dense_threshold``.
    """

    mode: str = "conjugate-gradient"
    cg_max_iters: int = 500
    cg_rel_tol: float = 1e-10
    dense_threshold: int = 400
    warm_start: bool = False

    def __post_init__(self):
        if self.mode not in ("direct-dense", "conjugate-gradient"):
            raise ValueError(f"unknown inner-solve mode {self.mode!r}")
        if not 0.0 < self.cg_rel_tol < 1.0:
            raise ValueError("cg_rel_tol must lie in (0, 1)")
        if self.cg_max_iters < 1:
            raise ValueError("cg_max_iters must be >= 1")
        if self.dense_threshold < 1:
            raise ValueError("dense_threshold must be positive")

    @classmethod
    def tight(cls) -> "InnerSolvePolicy":
        return cls(mode="conjugate-gradient", cg_max_iters=1000, cg_rel_tol=1e-10)

    @classmethod
    def three_cg_steps(cls) -> "InnerSolvePolicy":
        return cls(mode="conjugate-gradient", cg_max_iters=3, cg_rel_tol=1e-2)


@dataclass
class InnerSolveResult:
    h: np.ndarray
    iterations: int
    residual: float
    rhs_norm: float
    converged: bool
    residual_history: list = field(default_factory=list)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.rhs_norm if self.rhs_norm > 0 else 0.0


def _normal_residual(map, h, alpha, g):
    return apply_adjoint(map, apply(map, h)) + alpha * h - g


def solve_regularized_normal(
    map: LinearMap,
    rhs,
    alpha: float,
    policy: InnerSolvePolicy | None = None,
    x0=None,
) -> InnerSolveResult:
    """Approximate ``h = (A^T A + alpha I)^{-1} A^T rhs``.

    In conjugate-gradient mode the normal equations are iterated using only
    products with ``A`` and ``A^T``; the iteration stops once the residual
    ``|(A^T A + alpha I) h - A^T rhs|`` drops below ``cg_rel_tol * |A^T rhs|``
    or after ``cg_max_iters`` steps. ``x0`` is an optional warm start.
    """
    policy = policy or InnerSolvePolicy()
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rhs = _check_vector(rhs, map.dim_out, "rhs")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs contains non-finite values")

    g = apply_adjoint(map, rhs)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return InnerSolveResult(np.zeros(map.dim_in), 0, 0.0, 0.0, True, [0.0])

    if policy.mode == "direct-dense":
        if max(map.dim_in, map.dim_out) > policy.dense_threshold:
            raise ValueError(
                f"direct-dense solve refused for a {map.dim_out}x{map.dim_in} map "
                f"(dense_threshold={policy.dense_threshold})"
            )
        A = as_dense(map)
        if map.dim_out < map.dim_in:
            # push-through identity: (A^T A + aI)^{-1} A^T = A^T (A A^T + aI)^{-1}
            K = A @ A.T + alpha * np.eye(map.dim_out)
            h = A.T @ scipy.linalg.solve(K, rhs, assume_a="pos")
        else:
            K = A.T @ A + alpha * np.eye(map.dim_in)
            h = scipy.linalg.solve(K, g, assume_a="pos")
        res = float(np.linalg.norm(_normal_residual(map, h, alpha, g)))
        return InnerSolveResult(h, 0, res, gnorm, True, [res])

    h = np.zeros(map.dim_in) if x0 is None else _check_vector(x0, map.dim_in, "x0").copy()
    r = g - (apply_adjoint(map, apply(map, h)) + alpha * h) if x0 is not None else g.copy()
    p = r.copy()
    rr = float(r @ r)
    history = [np.sqrt(rr)]
    target = policy.cg_rel_tol * gnorm
    it = 0
    while np.sqrt(rr) > target and it < policy.cg_max_iters:
        Ap = apply(map, p)
        Kp = apply_adjoint(map, Ap) + alpha * p
        curv = float(Ap @ Ap + alpha * (p @ p))
        step = rr / curv
        h += step * p
        r -= step * Kp
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
        history.append(np.sqrt(rr))
    res = float(np.sqrt(rr))
    return InnerSolveResult(h, it, res, gnorm, res <= target, history)


def resolvent_residual(
    map: LinearMap,
    r,
    alpha: float,
    policy: InnerSolvePolicy | None = None,
) -> np.ndarray:
    """Return ``alpha (A A^T + alpha I)^{-1} r`` computed in data space.

    This is independent of :func:`solve_regularized_normal`: it works on the
    data-space system directly, so comparing the two gives a genuine check.
    """
    policy = policy or InnerSolvePolicy.tight()
    r = _check_vector(r, map.dim_out, "r")
    if max(map.dim_in, map.dim_out) <= policy.dense_threshold:
        A = as_dense(map)
        K = A @ A.T + alpha * np.eye(map.dim_out)
        return alpha * scipy.linalg.solve(K, r, assume_a="pos")
    # CG on (A A^T + alpha I) z = r, then alpha z
    z = np.zeros(map.dim_out)
    res = r.copy()
    p = res.copy()
    rr = float(res @ res)
    target = min(policy.cg_rel_tol, 1e-12) * np.linalg.norm(r)
    for _ in range(max(policy.cg_max_iters, 10 * map.dim_out)):
        if np.sqrt(rr) <= target:
            break
        Atp = apply_adjoint(map, p)
        Kp = apply(map, Atp) + alpha * p
        step = rr / float(Atp @ Atp + alpha * (p @ p))
        z += step * p
        res -= step * Kp
        rr_new = float(res @ res)
        p = res + (rr_new / rr) * p
        rr = rr_new
    return alpha * z


def estimate_operator_norm(map: LinearMap, iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral norm of ``map``.

    Iterates with ``A^T A`` from a seeded random start. The result is a lower
    estimate; callers that need an upper bound multiply by
    :data:`NORM_SAFETY`.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if map.dim_in == 0 or map.dim_out == 0:
        raise ValueError("cannot estimate the norm of a zero-dimensional map")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(map.dim_in)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = apply_adjoint(map, apply(map, v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        sigma = np.sqrt(nw)
        v = w / nw
    return float(sigma)
