"""Loping Levenberg-Marquardt-Kaczmarz and Landweber-Kaczmarz iterations.

The iterations cycle through the equations ``F_i(x) = y_i``, one equation
per step. Step ``k`` works on equation ``[k] = k mod N`` and is skipped
("loped") when that equation's residual is already below ``tau * delta``.
The run stops at the first cycle in which every step was skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .linop import (
    InnerSolvePolicy,
    LinearMap,
    adjoint_mismatch,
    apply,
    apply_adjoint,
    as_dense,
    resolvent_residual,
    solve_regularized_normal,
)
from .model import DomainViolation, NoisyData, OperatorFamily, residual

__all__ = [
    "InfeasibleParameters",
    "InsufficientTrace",
    "ParameterChoice",
    "SolverConfig",
    "StepRecord",
    "RunResult",
    "MatchedAlpha",
    "select_parameters",
    "check_feasible",
    "lmk_step",
    "landweber_step",
    "compute_Bk",
    "run_llmk",
    "run_lmk",
    "run_llk",
    "residual_matched_alpha",
    "verify_monotonicity",
    "verify_summability",
    "MonotonicityReport",
    "SummabilityReport",
]

ALPHA_MODES = ("fixed", "residual-matched")
RECORD_LEVELS = ("summary", "full-trace")
STOP_REASONS = ("discrepancy-cycle", "cycle-budget", "exact-data-converged", "domain-violation")


class InfeasibleParameters(ValueError):
    """A parameter triple violates one of the admissibility constraints.

    ``constraint`` names the violated inequality: ``"tau"``, ``"q"``,
    ``"alpha"`` or ``"safety"``.
    """

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"infeasible parameters ({constraint}): {message}")


class InsufficientTrace(ValueError):
    """A check needs per-step records that a summary-level run did not keep."""


class ParameterChoice(NamedTuple):
    tau: float
    q: float
    alpha: float


def check_feasible(alpha: float, tau: float, q: float, eta: float, C: float) -> None:
    """Raise :class:`InfeasibleParameters` unless all constraints hold strictly.

    The constraints are ``tau > (1+eta)/(1-eta)``,
    ``eta + (1+eta)/tau < q < 1`` and ``alpha > C^2 q / (1-q)``.
    """
    if not 0.0 <= eta < 1.0:
        raise InfeasibleParameters("eta", f"eta={eta} must lie in [0, 1)")
    if not tau > (1 + eta) / (1 - eta):
        raise InfeasibleParameters(
            "tau", f"tau={tau} must exceed (1+eta)/(1-eta)={(1 + eta) / (1 - eta):.6g}"
        )
    q_low = eta + (1 + eta) / tau
    if not q_low < q < 1.0:
        raise InfeasibleParameters("q", f"q={q} must lie in ({q_low:.6g}, 1)")
    a_low = C**2 * q / (1 - q)
    if not alpha > a_low:
        raise InfeasibleParameters("alpha", f"alpha={alpha} must exceed C^2 q/(1-q)={a_low:.6g}")


def select_parameters(
    eta: float, C: float, tau: Optional[float] = None, safety: float = 1.05
) -> ParameterChoice:
    """Pick ``(tau, q, alpha)`` satisfying the admissibility constraints.

    ``tau`` defaults to ``2 (1+eta)/(1-eta)``; ``q`` is the midpoint of the
    admissible interval ``(eta + (1+eta)/tau, 1)``; ``alpha`` is ``safety``
    times its lower bound ``C^2 q/(1-q)``.

    Examples
    --------
    >>> select_parameters(0.0, 1.0, tau=2.0, safety=1.1)
    ParameterChoice(tau=2.0, q=0.75, alpha=3.3000000000000003)
    """
    if not 0.0 <= eta < 1.0:
        raise InfeasibleParameters("eta", f"eta={eta} must lie in [0, 1)")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    if not safety > 1.0:
        raise InfeasibleParameters("safety", f"safety={safety} must exceed 1 for strict feasibility")
    tau_low = (1 + eta) / (1 - eta)
    if tau is None:
        tau = 2.0 * tau_low
    elif not tau > tau_low:
        raise InfeasibleParameters("tau", f"tau={tau} must exceed (1+eta)/(1-eta)={tau_low:.6g}")
    q_low = eta + (1 + eta) / tau
    if q_low >= 1.0:
        raise InfeasibleParameters(
            "q", f"empty interval: eta + (1+eta)/tau = {q_low:.6g} >= 1"
        )
    q = 0.5 * (q_low + 1.0)
    alpha = safety * C**2 * q / (1 - q)
    check_feasible(alpha, tau, q, eta, C)
    return ParameterChoice(float(tau), float(q), float(alpha))


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of an l-LMK / l-LK run.

    In ``"fixed"`` alpha mode the constraints checked by
    :func:`check_feasible` are enforced at construction unless
    ``validate=False`` (used only for negative controls).
    """

    alpha: float
    tau: float
    q: float
    eta: float
    C: float
    alpha_mode: str = "fixed"
    inner_policy: InnerSolvePolicy = field(default_factory=InnerSolvePolicy.tight)
    max_cycles: int = 500
    exact_data_tol: float = 1e-10
    record_level: str = "full-trace"
    alpha_bracket: Optional[tuple] = None
    alpha_match_tol: float = 1e-4
    bk_diagnostics: bool = False
    adjoint_probes: int = 0
    validate: bool = True

    def __post_init__(self):
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}")
        if self.record_level not in RECORD_LEVELS:
            raise ValueError(f"record_level must be one of {RECORD_LEVELS}")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if not self.alpha > 0 or not self.C > 0:
            raise ValueError("alpha and C must be positive")
        if self.validate:
            if self.alpha_mode == "fixed":
                check_feasible(self.alpha, self.tau, self.q, self.eta, self.C)
            else:
                check_feasible(math.inf, self.tau, self.q, self.eta, self.C)

    @classmethod
    def from_constants(
        cls, eta: float, C: float, tau: Optional[float] = None, safety: float = 1.05, **kwargs
    ) -> "SolverConfig":
        tau, q, alpha = select_parameters(eta, C, tau, safety)
        return cls(alpha=alpha, tau=tau, q=q, eta=eta, C=C, **kwargs)

    @property
    def bracket(self) -> tuple:
        if self.alpha_bracket is not None:
            return tuple(self.alpha_bracket)
        return (1e-6 * self.C**2, 1e6 * self.C**2)

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class StepRecord:
    k: int
    sub_index: int
    omega: int
    residual_norm: float
    threshold: float
    Bk_norm: float
    h_norm: float
    error_to_truth: float
    alpha_used: float
    cg_iters: int
    cg_rel_residual: float = 0.0
    Bk_form_gap: float = math.nan
    alpha_matched: bool = True


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run.

    ``stop_index`` is a multiple of ``N`` for every stop reason except a
    domain violation. For full-trace runs ``trace`` has one record per
    executed step (so a discrepancy stop has ``stop_index + N`` records,
    the last ``N`` of them loped) and ``iterates`` holds ``x_0 .. x_K``;
    summary runs keep neither.
    """

    method: str
    stop_index: int
    stop_reason: str
    final_x: np.ndarray
    trace: tuple
    nonloped_per_cycle: tuple
    config: SolverConfig
    delta: np.ndarray
    final_residuals: np.ndarray
    x0: np.ndarray
    initial_error: float = math.nan
    final_error: float = math.nan
    iterates: Optional[np.ndarray] = None
    adjoint_checks: tuple = ()
    message: str = ""

    @property
    def N(self) -> int:
        return len(self.delta)

    @property
    def cycles(self) -> int:
        return self.stop_index // self.N

    @property
    def total_nonloped(self) -> int:
        return int(sum(self.nonloped_per_cycle))

    @property
    def n_steps(self) -> int:
        return len(self.trace)


class MatchedAlpha(NamedTuple):
    alpha: float
    matched: bool
    evaluations: int


def _resolvent_norm_fn(map: LinearMap, r: np.ndarray, policy: InnerSolvePolicy):
    """Return ``alpha -> |alpha (A A^T + alpha I)^{-1} r|``."""
    if max(map.dim_in, map.dim_out) <= policy.dense_threshold:
        A = as_dense(map)
        AAt = A @ A.T
        eye = np.eye(map.dim_out)

        def fn(alpha):
            return float(np.linalg.norm(alpha * scipy.linalg.solve(AAt + alpha * eye, r, assume_a="pos")))

        return fn
    return lambda alpha: float(np.linalg.norm(resolvent_residual(map, r, alpha, policy)))


def residual_matched_alpha(
    map: LinearMap,
    r,
    q: float,
    alpha_bracket: tuple,
    tol: float = 1e-4,
    strict: bool = False,
    warm_start: Optional[float] = None,
    policy: Optional[InnerSolvePolicy] = None,
    max_evals: int = 200,
) -> MatchedAlpha:
    """Choose ``alpha`` so that ``|alpha (A A^T + alpha I)^{-1} r| = q |r|``.

    The left side increases monotonically with ``alpha``, so the root is
    found by bisection on ``log(alpha)`` within ``alpha_bracket``. If the
    bracket does not straddle the root the nearest endpoint is returned
    with ``matched=False`` (or a ``ValueError`` is raised when ``strict``).
    ``warm_start``, typically the previous step's value, is tried first and
    used to shrink the bracket.
    """
    policy = policy or InnerSolvePolicy.tight()
    r = np.asarray(r, dtype=float)
    lo, hi = (float(a) for a in alpha_bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid alpha bracket {alpha_bracket}")
    rn = float(np.linalg.norm(r))
    if rn == 0.0:
        guess = warm_start if warm_start is not None else math.sqrt(lo * hi)
        return MatchedAlpha(float(guess), True, 0)
    norm_B = _resolvent_norm_fn(map, r, policy)
    target = q * rn
    g = lambda a: norm_B(a) - target  # noqa: E731
    evals = 0

    g_lo, g_hi = g(lo), g(hi)
    evals += 2
    if abs(g_lo) <= tol * rn:
        return MatchedAlpha(lo, True, evals)
    if abs(g_hi) <= tol * rn:
        return MatchedAlpha(hi, True, evals)
    if g_lo > 0 or g_hi < 0:
        if strict:
            raise ValueError("alpha bracket does not straddle the matching equation")
        return MatchedAlpha(lo if g_lo > 0 else hi, False, evals)

    if warm_start is not None and lo < warm_start < hi:
        g_w = g(warm_start)
        evals += 1
        if abs(g_w) <= tol * rn:
            return MatchedAlpha(float(warm_start), True, evals)
        if g_w < 0:
            lo = warm_start
        else:
            hi = warm_start

    log_lo, log_hi = math.log(lo), math.log(hi)
    mid = math.exp(0.5 * (log_lo + log_hi))
    while evals < max_evals:
        mid = math.exp(0.5 * (log_lo + log_hi))
        g_mid = g(mid)
        evals += 1
        if abs(g_mid) <= tol * rn:
            return MatchedAlpha(mid, True, evals)
        if g_mid < 0:
            log_lo = math.log(mid)
        else:
            log_hi = math.log(mid)
        if log_hi - log_lo < 1e-15:
            break
    return MatchedAlpha(mid, False, evals)


def compute_Bk(
    family: OperatorFamily,
    x,
    x_next,
    i: int,
    data: NoisyData,
    alpha: Optional[float] = None,
    policy: Optional[InnerSolvePolicy] = None,
):
    """Return ``B = F_i'(x)(x_next - x) + F_i(x) - y_i`` and its norm.

    When ``alpha`` is given the resolvent form
    ``alpha (A A^T + alpha I)^{-1} (F_i(x) - y_i)`` is also evaluated and
    the result is ``(B, |B|, B_resolvent, relative_gap)``.
    """
    x = np.asarray(x, dtype=float)
    A = family.linearize(i, x)
    r, _ = residual(family, i, x, data)
    B = apply(A, np.asarray(x_next, dtype=float) - x) - r
    nB = float(np.linalg.norm(B))
    if alpha is None:
        return B, nB
    B_res = -resolvent_residual(A, r, alpha, policy)
    scale = max(nB, float(np.linalg.norm(B_res)), np.finfo(float).tiny)
    return B, nB, B_res, float(np.linalg.norm(B - B_res) / scale)


def _error(x, x_star):
    return math.nan if x_star is None else float(np.linalg.norm(x - x_star))


def lmk_step(
    family: OperatorFamily,
    data: NoisyData,
    x,
    k: int,
    config: SolverConfig,
    loping: bool = True,
    alpha_prev: Optional[float] = None,
    h_prev: Optional[np.ndarray] = None,
):
    """One Levenberg-Marquardt-Kaczmarz step on equation ``k mod N``.

    Returns ``(x_next, record)``. With ``loping`` the step is skipped when
    the residual norm is below ``tau * delta``; a residual exactly at the
    threshold is not skipped, so exact data never lopes.
    """
    return _step(family, data, x, k, config, loping, "lmk", alpha_prev, h_prev)


def landweber_step(
    family: OperatorFamily,
    data: NoisyData,
    x,
    k: int,
    config: SolverConfig,
    step_size: float,
    loping: bool = True,
):
    """One Landweber-Kaczmarz step ``x + step_size * F'(x)^T (y - F(x))``."""
    return _step(family, data, x, k, config, loping, "lk", step_size=step_size)


def _step(family, data, x, k, config, loping, method, alpha_prev=None, h_prev=None, step_size=None):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("iterate contains non-finite values")
    i = k % family.N
    r, rn = residual(family, i, x, data)
    threshold = config.tau * float(data.delta[i])
    omega = 1 if (not loping or rn >= threshold) else 0
    err = _error(x, family.ground_truth)

    if omega == 0:
        rec = StepRecord(k, i, 0, rn, threshold, math.nan, 0.0, err, math.nan, 0)
        return x, rec

    A = family.linearize(i, x)
    alpha = config.alpha
    matched = True
    cg_iters, cg_rel = 0, 0.0
    if method == "lk":
        h = step_size * apply_adjoint(A, r)
        alpha = math.nan
    else:
        if config.alpha_mode == "residual-matched":
            choice = residual_matched_alpha(
                A, r, config.q, config.bracket, config.alpha_match_tol,
                warm_start=alpha_prev, policy=config.inner_policy,
            )
            alpha, matched = choice.alpha, choice.matched
        warm = h_prev if config.inner_policy.warm_start else None
        sol = solve_regularized_normal(A, r, alpha, config.inner_policy, x0=warm)
        h = sol.h
        cg_iters, cg_rel = sol.iterations, sol.relative_residual

    B = apply(A, h) - r
    gap = math.nan
    if config.bk_diagnostics and method == "lmk":
        B_res = -resolvent_residual(A, r, alpha, InnerSolvePolicy.tight())
        scale = max(float(np.linalg.norm(B)), float(np.linalg.norm(B_res)), np.finfo(float).tiny)
        gap = float(np.linalg.norm(B - B_res) / scale)
    rec = StepRecord(
        k, i, 1, rn, threshold, float(np.linalg.norm(B)), float(np.linalg.norm(h)),
        err, alpha, cg_iters, cg_rel, gap, matched,
    )
    return x + h, rec


def _run(family, data, x0, config, method, loping, step_size=None) -> RunResult:
    N = family.N
    if len(data.delta) != N:
        raise ValueError("data and family disagree on the number of equations")
    x = np.array(x0, dtype=float)
    family.check_domain(x)
    x0 = x.copy()
    exact_mode = data.is_exact or not loping
    full = config.record_level == "full-trace"
    trace, nonloped, iterates, adj = [], [], [x0.copy()], []
    stop_reason, stop_index, message = "cycle-budget", config.max_cycles * N, ""
    alpha_prev, h_prev = None, None
    data_scale = max(float(np.linalg.norm(y)) for y in data.y_delta)
    k = 0
    try:
        for cycle in range(config.max_cycles):
            if config.adjoint_probes:
                adj.append(adjoint_mismatch(family.linearize(0, x), config.adjoint_probes, seed=cycle))
            count = 0
            cycle_res = []
            for _ in range(N):
                if method == "llk":
                    x_new, rec = landweber_step(family, data, x, k, config, step_size, loping)
                else:
                    x_new, rec = lmk_step(family, data, x, k, config, loping, alpha_prev, h_prev)
                    if rec.omega:
                        alpha_prev = rec.alpha_used
                        h_prev = x_new - x
                if full:
                    trace.append(rec)
                cycle_res.append(rec.residual_norm)
                count += rec.omega
                x = x_new
                k += 1
                if full:
                    iterates.append(x.copy())
            nonloped.append(count)
            if exact_mode:
                if max(cycle_res) <= config.exact_data_tol * data_scale:
                    stop_reason, stop_index = "exact-data-converged", (cycle + 1) * N
                    break
            elif count == 0:
                stop_reason, stop_index = "discrepancy-cycle", cycle * N
                break
    except DomainViolation as exc:
        stop_reason, stop_index, message = "domain-violation", k, str(exc)

    if stop_reason == "domain-violation":
        final_res = np.full(N, math.nan)
    else:
        final_res = np.array([residual(family, i, x, data)[1] for i in range(N)])
    return RunResult(
        method=method if loping else "lmk-exact",
        stop_index=stop_index,
        stop_reason=stop_reason,
        final_x=x,
        trace=tuple(trace),
        nonloped_per_cycle=tuple(nonloped),
        config=config,
        delta=np.array(data.delta, dtype=float),
        final_residuals=final_res,
        x0=x0,
        initial_error=_error(x0, family.ground_truth),
        final_error=_error(x, family.ground_truth),
        iterates=np.array(iterates) if full else None,
        adjoint_checks=tuple(adj),
        message=message,
    )


def run_llmk(family: OperatorFamily, data: NoisyData, x0, config: SolverConfig) -> RunResult:
    """Run the loping Levenberg-Marquardt-Kaczmarz iteration.

    Stops with ``"discrepancy-cycle"`` at the first cycle whose ``N`` steps
    all lope; ``stop_index`` is then the index at the start of that cycle.
    With all ``delta_i = 0`` no step ever lopes and the run stops once every
    residual seen during a cycle is at most ``exact_data_tol`` times the
    largest data norm (``"exact-data-converged"``).
    Running out of cycles is reported as ``"cycle-budget"``; leaving the
    admissible box ends the run with ``"domain-violation"`` and the partial
    trace.
    """
    return _run(family, data, x0, config, "llmk", loping=True)


def run_lmk(family: OperatorFamily, data: NoisyData, x0, config: SolverConfig) -> RunResult:
    """Levenberg-Marquardt-Kaczmarz without loping (every step updates)."""
    return _run(family, data, x0, config, "lmk", loping=False)


def run_llk(
    family: OperatorFamily,
    data: NoisyData,
    x0,
    config: SolverConfig,
    step_size: Optional[float] = None,
) -> RunResult:
    """Loping Landweber-Kaczmarz with the same loping and stopping rules.

    ``step_size`` defaults to ``0.9 / C^2``; ``step_size * C^2 <= 1`` is
    required.
    """
    if step_size is None:
        step_size = 0.9 / config.C**2
    if not step_size > 0 or step_size * config.C**2 > 1.0 + 1e-12:
        raise ValueError(f"step_size={step_size} violates step_size * C^2 <= 1")
    return _run(family, data, x0, config, "llk", loping=True, step_size=step_size)


# --------------------------------------------------------------------------
# trace diagnostics
# --------------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    checked: int
    violations: list
    estimate_violations: list
    slack: float
    max_increase: float

    @property
    def ok(self) -> bool:
        """Distance monotonicity holds; the per-step estimate is advisory."""
        return not self.violations

    @property
    def estimate_ok(self) -> bool:
        return not self.estimate_violations


def _errors(result: RunResult, x_star) -> np.ndarray:
    """Distances ``|x_k - x*|``, from the iterates or else from the records."""
    if result.config.record_level != "full-trace":
        raise InsufficientTrace("insufficient trace: per-step records are required")
    if result.iterates is not None and x_star is not None:
        return np.linalg.norm(result.iterates - np.asarray(x_star, dtype=float), axis=1)
    # records carry the distance before each step; the last one comes from final_error
    by_k = {rec.k: rec.error_to_truth for rec in result.trace}
    last = result.stop_index if result.stop_reason != "domain-violation" else len(result.trace)
    e = np.array([by_k.get(k, math.nan) for k in range(last + 1)])
    if math.isnan(e[last]):
        e[last] = result.final_error
    if np.any(np.isnan(e)):
        raise InsufficientTrace("distances to the truth are missing from the trace")
    return e


def verify_monotonicity(result: RunResult, x_star=None, slack_rel: float = 1e-10) -> MonotonicityReport:
    """Check that the distance to ``x_star`` never grows before the stop.

    A step ``k`` is a violation when
    ``|x_{k+1} - x*| > |x_k - x*| + slack_rel * |x_0 - x*|``. Each
    non-loped LMK step is also compared with the bound

        |x_{k+1}-x*|^2 - |x_k-x*|^2
            <= 2/alpha |B_k| ((eta - q)|r_k| + (1+eta) delta) - |x_{k+1}-x_k|^2

    with the same slack (scaled by ``|x_0 - x*|^2``). That estimate relies
    on the tangential-cone constant ``eta`` holding along the iterates, so
    its failures are listed separately and do not affect ``ok``.
    """
    e = _errors(result, x_star)
    cfg = result.config
    slack = slack_rel * e[0]
    slack_sq = slack_rel * e[0] ** 2
    k_stop = result.stop_index if result.stop_reason != "domain-violation" else len(result.trace)
    viol, est_viol = [], []
    max_inc = 0.0
    checked = 0
    for rec in result.trace[:k_stop]:
        k = rec.k
        checked += 1
        inc = e[k + 1] - e[k]
        max_inc = max(max_inc, inc)
        if inc > slack:
            viol.append(k)
        if rec.omega and result.method in ("llmk", "lmk-exact", "lmk"):
            delta = result.delta[rec.sub_index] if result.method == "llmk" else 0.0
            rhs = (
                2.0 / rec.alpha_used * rec.Bk_norm
                * ((cfg.eta - cfg.q) * rec.residual_norm + (1 + cfg.eta) * delta)
                - rec.h_norm**2
            )
            if e[k + 1] ** 2 - e[k] ** 2 > rhs + slack_sq:
                est_viol.append(k)
    return MonotonicityReport(checked, viol, est_viol, slack, max_inc)


@dataclass
class SummabilityReport:
    sums: dict
    bounds: dict

    @property
    def ok(self) -> bool:
        return all(self.sums[key] <= self.bounds[key] * (1 + 1e-10) + 1e-300 for key in self.sums)


def verify_summability(result: RunResult, x_star=None) -> SummabilityReport:
    """Partial sums of an exact-data run against their a-priori bounds.

    With ``e0 = |x_0 - x*|`` and the configured ``alpha, q, eta``:

    * ``sum |r_k|^2        <= alpha / (2 q (q - eta)) e0^2``
    * ``sum |B_k| |r_k|    <= alpha / (2 (q - eta)) e0^2``
    * ``sum |x_{k+1}-x_k|^2 <= e0^2``
    * ``sum |B_k|^2        <= alpha / (2 (q - eta)) e0^2``
    """
    if result.config.record_level != "full-trace":
        raise InsufficientTrace("insufficient trace: per-step records are required")
    cfg = result.config
    if x_star is None:
        e0sq = float(result.initial_error) ** 2
    else:
        e0sq = float(np.linalg.norm(result.x0 - np.asarray(x_star, dtype=float)) ** 2)
    upd = [rec for rec in result.trace if rec.omega]
    r2 = sum(rec.residual_norm**2 for rec in upd)
    br = sum(rec.Bk_norm * rec.residual_norm for rec in upd)
    dx2 = sum(rec.h_norm**2 for rec in upd)
    b2 = sum(rec.Bk_norm**2 for rec in upd)
    gap = cfg.q - cfg.eta
    if gap > 0:
        c = cfg.alpha / (2 * gap) * e0sq
        bounds = {"residual_sq": c / cfg.q, "B_times_residual": c, "step_sq": e0sq, "B_sq": c}
    else:
        bounds = {"residual_sq": -math.inf, "B_times_residual": -math.inf, "step_sq": e0sq, "B_sq": -math.inf}
    sums = {"residual_sq": r2, "B_times_residual": br, "step_sq": dx2, "B_sq": b2}
    return SummabilityReport(sums, bounds)
