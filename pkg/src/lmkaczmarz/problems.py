"""Test problems with known ground truth.

* a block-partitioned cumulative-integration operator (affine, ``eta = 0``);
* a 1D elliptic coefficient-identification problem ``-(gamma u')' = f_i``
  with ``N`` localized source loads.

Grid problems work in scaled coordinates: a grid function ``g`` with cell
width ``h`` is stored as ``sqrt(h) * g``, so the Euclidean norm of the
stored vector approximates the L2 norm of the function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .linop import NORM_SAFETY, LinearMap, estimate_operator_norm
from .model import NoisyData, OperatorFamily, make_noisy_data

__all__ = [
    "BlockLinearProblem",
    "Elliptic1DProblem",
    "build_block_linear",
    "build_elliptic_1d",
    "solve_state",
    "GAMMA_PROFILES",
    "PROBLEMS",
    "ExperimentInstance",
    "make_experiment_instance",
    "list_problems",
]


# --------------------------------------------------------------------------
# block-linear problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockLinearProblem:
    n: int
    N: int
    kernel: np.ndarray
    blocks: tuple
    x_true: np.ndarray
    x0: np.ndarray
    family: OperatorFamily
    exact_y: tuple

    @property
    def C(self) -> float:
        return max(np.linalg.norm(self.kernel[b], 2) for b in self.blocks)


def integration_matrix(n: int) -> np.ndarray:
    """Midpoint cumulative integration on ``n`` cells of ``[0, 1]``.

    Row ``i`` integrates a piecewise-constant function from 0 to the centre
    of cell ``i``.
    """
    h = 1.0 / n
    A = np.tril(np.full((n, n), h), -1)
    A[np.diag_indices(n)] = 0.5 * h
    return A


def build_block_linear(n: int = 64, N: int = 8, seed: int = 0) -> BlockLinearProblem:
    """Cumulative integration with its rows split into ``N`` contiguous blocks.

    Working in scaled coordinates leaves the matrix unchanged (both sides
    scale by ``sqrt(h)``). The ground truth is ``A^T A w`` for a smooth
    profile ``w`` with a seed-dependent phase, normalized to unit maximum;
    the initial guess is zero.
    """
    if N < 1 or n < 1:
        raise ValueError("n and N must be positive")
    if N > n:
        raise ValueError(f"cannot split {n} rows into N={N} nonempty blocks")
    A = integration_matrix(n)
    A.setflags(write=False)
    bounds = np.linspace(0, n, N + 1).round().astype(int)
    blocks = tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))

    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    phase = np.random.default_rng(seed).uniform(0.0, 0.5)
    w = np.sin(np.pi * t) ** 2 * (1.0 + 0.5 * np.cos(2 * np.pi * (t + phase)))
    # smoothing w twice puts the truth in the range of A^T A
    g_true = A.T @ (A @ w)
    g_true /= np.max(np.abs(g_true))
    x_true = np.sqrt(h) * g_true
    x_true.setflags(write=False)
    x0 = np.zeros(n)

    mats = tuple(np.ascontiguousarray(A[b]) for b in blocks)
    for m in mats:
        m.setflags(write=False)
    maps = tuple(LinearMap.from_matrix(m) for m in mats)

    def evaluate(i, x):
        return mats[i] @ x

    def linearize(i, x):
        return maps[i]

    C = max(np.linalg.norm(m, 2) for m in mats)
    family = OperatorFamily(
        n_equations=N,
        dim_x=n,
        dim_y=tuple(m.shape[0] for m in mats),
        evaluate_i=evaluate,
        linearize_i=linearize,
        eta=0.0,
        lipschitz_bound=float(C),
        ground_truth=x_true,
        name=f"block-linear-{n}",
    )
    exact_y = tuple(m @ x_true for m in mats)
    return BlockLinearProblem(n, N, A, blocks, x_true, x0, family, exact_y)


# --------------------------------------------------------------------------
# 1D elliptic coefficient problem
# --------------------------------------------------------------------------


def _bump(t):
    return 1.0 + 0.25 * np.exp(-(((t - 0.4) / 0.12) ** 2))


def _two_bumps(t):
    return 1.0 + 0.25 * np.exp(-(((t - 0.3) / 0.08) ** 2)) - 0.15 * np.exp(-(((t - 0.7) / 0.1) ** 2))


def _smooth_step(t):
    # gamma rises from 1 to 2 around t = 0.55
    return 1.0 + 0.5 * (1.0 + np.tanh((t - 0.55) / 0.06))


GAMMA_PROFILES: dict = {
    "bump": _bump,
    "two-bumps": _two_bumps,
    "smooth-step": _smooth_step,
}


def _tridiag(gamma: np.ndarray, h: float) -> np.ndarray:
    """Banded storage of ``K = D^T diag(gamma) D / h^2`` on interior nodes."""
    n = gamma.size
    ab = np.zeros((3, n - 1))
    ab[1] = (gamma[:-1] + gamma[1:]) / h**2
    ab[0, 1:] = -gamma[1:-1] / h**2
    ab[2, :-1] = -gamma[1:-1] / h**2
    return ab


def _diff(u_full: np.ndarray) -> np.ndarray:
    return np.diff(u_full)


def _diff_T(s: np.ndarray) -> np.ndarray:
    """Adjoint of ``u_interior -> diff(pad(u, 0))``."""
    return s[:-1] - s[1:]


def solve_state(gamma, f, left: float = 0.0, right: float = 0.0) -> np.ndarray:
    """Solve ``-(gamma u')' = f`` on ``[0, 1]`` with Dirichlet data.

    ``gamma`` holds cell values (``n`` cells), ``f`` the source at the
    ``n - 1`` interior nodes. Returns the full nodal solution (``n + 1``
    values, boundary included). Finite volumes with harmonic-free
    two-point fluxes; the matrix is symmetric positive definite whenever
    ``gamma > 0``.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    h = 1.0 / n
    rhs = np.array(f, dtype=float)
    rhs[0] += gamma[0] * left / h**2
    rhs[-1] += gamma[-1] * right / h**2
    ab = _tridiag(gamma, h)
    u = scipy.linalg.solve_banded((1, 1), ab, rhs)
    return np.concatenate(([left], u, [right]))


@dataclass(frozen=True)
class Elliptic1DProblem:
    n_cells: int
    gamma_bounds: tuple
    loads: tuple
    load_centers: np.ndarray
    gamma_true: np.ndarray
    x0: np.ndarray
    measurement: str
    parametrization: str
    family: OperatorFamily
    exact_y: tuple
    data_grid_factor: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    def to_gamma(self, x) -> np.ndarray:
        return _coefficient_map(self.parametrization, self.h)(np.asarray(x, dtype=float))[0]

    def from_gamma(self, gamma) -> np.ndarray:
        return _parameter_of(np.asarray(gamma, dtype=float), self.parametrization, self.h)


def _parameter_of(gamma, parametrization, h):
    sh = np.sqrt(h)
    return sh * gamma if parametrization == "conductivity" else sh / gamma


def _load_vector(center: float, nodes: np.ndarray, width: float) -> np.ndarray:
    return (np.abs(nodes - center) <= width).astype(float)


def _coefficient_map(parametrization: str, h: float):
    """Return ``x -> (gamma, dgamma/dx)`` for the scaled parameter vector."""
    sh = np.sqrt(h)
    if parametrization == "conductivity":
        return lambda x: (x / sh, np.full(x.shape, 1.0 / sh))
    if parametrization == "resistivity":
        # x = sqrt(h) / gamma
        return lambda x: (sh / x, -sh / x**2)
    raise ValueError("parametrization must be 'conductivity' or 'resistivity'")


def _elliptic_operators(n: int, loads, measurement: str, parametrization: str):
    """Forward map and linearization for every load on an ``n``-cell grid."""
    h = 1.0 / n
    sh = np.sqrt(h)
    loads = tuple(np.asarray(f, dtype=float) for f in loads)
    coefficient = _coefficient_map(parametrization, h)

    def observe(gamma, u_full):
        if measurement == "full-field":
            return sh * u_full[1:-1]
        s = _diff(u_full)
        return np.array([gamma[0] * s[0] / h, gamma[-1] * s[-1] / h])

    def evaluate(i, x):
        gamma, _ = coefficient(x)
        return observe(gamma, solve_state(gamma, loads[i]))

    def linearize(i, x):
        gamma, jac = coefficient(x)
        s = _diff(solve_state(gamma, loads[i]))
        ab = _tridiag(gamma, h)
        ab.setflags(write=False)

        def K_inv(v):
            return scipy.linalg.solve_banded((1, 1), ab, v)

        # K(gamma) u = f  =>  du = -K^{-1} D^T (s * dgamma) / h^2
        def du_of(dg):
            return -K_inv(_diff_T(s * dg)) / h**2

        def du_adj(z):
            return -s * np.diff(np.concatenate(([0.0], K_inv(z), [0.0]))) / h**2

        if measurement == "full-field":

            def fwd(dx):
                return sh * du_of(jac * dx)

            def adj(w):
                return jac * du_adj(sh * w)

            dim_out = n - 1
        else:

            def fwd(dx):
                dg = jac * dx
                du = du_of(dg)
                ds = np.diff(np.concatenate(([0.0], du, [0.0])))
                return np.array([
                    (dg[0] * s[0] + gamma[0] * ds[0]) / h,
                    (dg[-1] * s[-1] + gamma[-1] * ds[-1]) / h,
                ])

            def adj(w):
                v = np.zeros(n)
                v[0] = gamma[0] * w[0] / h
                v[-1] += gamma[-1] * w[1] / h
                out = du_adj(_diff_T(v))
                out[0] += s[0] * w[0] / h
                out[-1] += s[-1] * w[1] / h
                return jac * out

            dim_out = 2
        return LinearMap(n, dim_out, fwd, adj)

    dim_y = n - 1 if measurement == "full-field" else 2
    return evaluate, linearize, dim_y


def build_elliptic_1d(
    n_cells: int = 64,
    N: int = 9,
    profile: str = "smooth-step",
    seed: int = 0,
    gamma_bounds: tuple = (0.2, 5.0),
    measurement: str = "full-field",
    parametrization: str = "resistivity",
    data_grid_factor: int = 1,
    eta: float = 0.3,
    load_halfwidth: float = 2.0**-4,
    gamma0: float = 1.0,
) -> Elliptic1DProblem:
    """Identify ``gamma`` in ``-(gamma u_i')' = f_i``, ``u_i(0) = u_i(1) = 0``.

    Load ``i`` is the indicator of ``|t - t_i| <= load_halfwidth`` with
    centres ``t_i = (i + 1/2)/N`` uniformly spaced in ``[0, 1]``.

    The unknown is stored as a scaled cell vector: ``sqrt(h) / gamma``
    (``parametrization="resistivity"``, the default, for which the forward
    map is much closer to linear) or ``sqrt(h) * gamma``. The initial guess
    is the constant ``gamma = gamma0``. With ``data_grid_factor > 1``
    the exact data come from a finer grid, sampled at the coarse nodes.
    ``seed`` is accepted for interface symmetry; the built-in profiles are
    deterministic. ``eta`` is the tangential-cone constant asserted for the
    family (see :func:`lmkaczmarz.model.estimate_tangential_cone`).
    """
    if n_cells < 8:
        raise ValueError("n_cells must be at least 8")
    if profile not in GAMMA_PROFILES:
        raise ValueError(f"unknown gamma profile {profile!r}; choose from {sorted(GAMMA_PROFILES)}")
    if measurement not in ("full-field", "boundary-flux"):
        raise ValueError("measurement must be 'full-field' or 'boundary-flux'")
    g_lo, g_hi = gamma_bounds
    if not 0 < g_lo < g_hi:
        raise ValueError("gamma bounds must satisfy 0 < gamma_m < gamma_M")
    prof = GAMMA_PROFILES[profile]
    h = 1.0 / n_cells
    gamma_true = prof((np.arange(n_cells) + 0.5) * h)
    if np.any(gamma_true < g_lo) or np.any(gamma_true > g_hi):
        raise ValueError("gamma profile leaves the admissible bounds")
    if not g_lo <= gamma0 <= g_hi:
        raise ValueError("initial coefficient gamma0 leaves the admissible bounds")

    nodes = np.arange(1, n_cells) * h
    load_centers = (np.arange(N) + 0.5) / N
    loads = tuple(_load_vector(c, nodes, load_halfwidth) for c in load_centers)
    evaluate, linearize, dim_y = _elliptic_operators(n_cells, loads, measurement, parametrization)

    x_true = _parameter_of(gamma_true, parametrization, h)
    x_true.setflags(write=False)
    x0 = _parameter_of(np.full(n_cells, float(gamma0)), parametrization, h)
    # C must bound |F_i'| on the region the iterates explore, so take the
    # larger of the estimates at the start and at the truth
    C = NORM_SAFETY * max(
        estimate_operator_norm(linearize(i, p), 100)
        for i in range(N)
        for p in (x0, x_true)
    )
    box = np.sort([_parameter_of(g_lo, parametrization, h), _parameter_of(g_hi, parametrization, h)])
    family = OperatorFamily(
        n_equations=N,
        dim_x=n_cells,
        dim_y=(dim_y,) * N,
        evaluate_i=evaluate,
        linearize_i=linearize,
        eta=eta,
        lipschitz_bound=float(C),
        lower=np.full(n_cells, box[0]),
        upper=np.full(n_cells, box[1]),
        ground_truth=x_true,
        name=f"elliptic1d-{N}loads",
    )

    if data_grid_factor == 1:
        exact_y = tuple(evaluate(i, x_true) for i in range(N))
    else:
        m = n_cells * data_grid_factor
        hf = 1.0 / m
        fine_nodes = np.arange(1, m) * hf
        fine_loads = tuple(_load_vector(c, fine_nodes, load_halfwidth) for c in load_centers)
        ev_f, _, _ = _elliptic_operators(m, fine_loads, measurement, parametrization)
        xf = _parameter_of(prof((np.arange(m) + 0.5) * hf), parametrization, hf)
        exact_y = []
        for i in range(N):
            yf = ev_f(i, xf)
            if measurement == "full-field":
                # coarse node j is fine node j * factor; rescale sqrt(hf) -> sqrt(h)
                yf = yf[data_grid_factor - 1 :: data_grid_factor] * np.sqrt(h / hf)
            exact_y.append(yf)
        exact_y = tuple(exact_y)

    return Elliptic1DProblem(
        n_cells, (g_lo, g_hi), loads, load_centers, gamma_true, x0,
        measurement, parametrization, family, exact_y, data_grid_factor,
    )


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentInstance:
    problem_id: str
    family: OperatorFamily
    data: NoisyData
    x0: np.ndarray
    problem: object


def _block(n, N):
    return lambda seed: build_block_linear(n, N, seed=0)


PROBLEMS: dict = {
    "block-linear-64": (_block(64, 8), "cumulative integration, n=64, 8 row blocks"),
    "block-linear-16-single": (_block(16, 1), "cumulative integration, n=16, one block"),
    "elliptic1d-9loads": (
        lambda seed: build_elliptic_1d(64, 9, "smooth-step"),
        "-(gamma u')' = f_i, 64 cells, 9 source loads, full-field data",
    ),
    "elliptic1d-9loads-fine": (
        lambda seed: build_elliptic_1d(64, 9, "smooth-step", data_grid_factor=2),
        "as elliptic1d-9loads, data synthesized on a 2x finer grid",
    ),
    "elliptic1d-flux": (
        lambda seed: build_elliptic_1d(64, 9, "smooth-step", measurement="boundary-flux"),
        "as elliptic1d-9loads, boundary fluxes only (harder)",
    ),
}


def list_problems() -> dict:
    return {name: desc for name, (_, desc) in PROBLEMS.items()}


def make_experiment_instance(
    problem_id: str, rel_noise: float = 0.05, seed: int = 0, directions=None
) -> ExperimentInstance:
    """Build a registered problem and its noisy data deterministically.

    Raises ``KeyError`` for an unknown problem id.
    """
    if problem_id not in PROBLEMS:
        raise KeyError(f"unknown problem id {problem_id!r}; known: {sorted(PROBLEMS)}")
    builder, _ = PROBLEMS[problem_id]
    prob = builder(seed)
    data = make_noisy_data(prob.exact_y, rel_noise, seed, directions=directions)
    return ExperimentInstance(problem_id, prob.family, data, np.array(prob.x0), prob)
