"""Experiment orchestration, artifact files and the verification suite.

A run is described by an :class:`ExperimentSpec`. :func:`run_experiment`
builds the problem instance, runs the solver and writes three artifacts
into ``<out_dir>/<run name>/``:

``trace.csv``
    one row per iterate ``k = 0 .. stop_index`` with the step taken there;
``cycles.csv``
    the number of non-loped steps in every cycle;
``summary.json``
    stop index and reason, parameters, seed, noise levels and checksums.

Floats are written with 17 significant digits and every file is written
to a temporary name first and then renamed, so repeated runs produce
byte-identical files and readers never see a partial file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import yaml

from .kaczmarz import (
    InfeasibleParameters,
    InsufficientTrace,
    RunResult,
    SolverConfig,
    StepRecord,
    run_llk,
    run_llmk,
    run_lmk,
    select_parameters,
    verify_monotonicity,
    verify_summability,
)
from .linop import InnerSolvePolicy
from .model import make_noisy_data, noise_directions
from .problems import PROBLEMS, ExperimentInstance, make_experiment_instance

__all__ = [
    "ENV_OUT_DIR",
    "SOLVERS",
    "OUTPUTS",
    "TRACE_COLUMNS",
    "ConfigurationError",
    "ExperimentSpec",
    "SolverSummary",
    "ComparisonReport",
    "CheckOutcome",
    "VerificationReport",
    "SweepReport",
    "build_config",
    "execute",
    "run_experiment",
    "compare",
    "noise_sweep",
    "verify_run",
    "verify_suite",
    "load_run",
    "load_config",
    "spec_from_mapping",
    "resolve_out_dir",
    "atomic_write",
]

#: Environment variable that overrides the default output directory.
ENV_OUT_DIR = "LMK_OUTPUT_DIR"
DEFAULT_OUT_DIR = "lmk-output"

SOLVERS = ("llmk", "lmk-exact", "llk")
OUTPUTS = ("trace-csv", "summary-json", "cycle-series-csv")
TRACE_COLUMNS = (
    "k", "sub_index", "omega", "residual_norm", "Bk_norm",
    "h_norm", "error_to_truth", "alpha_used", "cg_iters",
)
OVERRIDE_KEYS = frozenset({
    "alpha", "tau", "q", "safety", "alpha_mode", "max_cycles", "cg_iters",
    "cg_tol", "inner_mode", "warm_start", "exact_data_tol", "step_size",
    "record_level", "bk_diagnostics",
})
FILE_NAMES = {
    "trace-csv": "trace.csv",
    "cycle-series-csv": "cycles.csv",
    "summary-json": "summary.json",
}
FORMAT_TAG = "lmkaczmarz-run/1"

# relative slack for the B_k bounds and the matching equation
BK_BOUND_SLACK = 1e-10
MATCH_TOL = 0.01


class ConfigurationError(ValueError):
    """An experiment spec or its overrides cannot be run.

    ``constraint`` names the violated parameter inequality when the error
    comes from the feasibility check, otherwise it is ``None``.
    """

    def __init__(self, message: str, constraint: Optional[str] = None):
        self.constraint = constraint
        super().__init__(message)


# --------------------------------------------------------------------------
# specs and configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """One solver run on one registered problem.

    ``overrides`` may set any of ``alpha, tau, q, safety, alpha_mode,
    max_cycles, cg_iters, cg_tol, inner_mode, warm_start, exact_data_tol,
    step_size, record_level, bk_diagnostics``.
    """

    problem: str
    solver: str = "llmk"
    rel_noise: float = 0.05
    seed: int = 0
    overrides: Mapping = field(default_factory=dict)
    outputs: tuple = OUTPUTS

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem id {self.problem!r}; known: {sorted(PROBLEMS)}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if not (math.isfinite(self.rel_noise) and self.rel_noise >= 0):
            raise ConfigurationError(f"rel_noise must be finite and nonnegative, got {self.rel_noise}")
        unknown = set(self.overrides) - OVERRIDE_KEYS
        if unknown:
            raise ConfigurationError(f"unknown override keys {sorted(unknown)}")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ConfigurationError(f"unknown outputs {sorted(bad)}")
        object.__setattr__(self, "overrides", dict(self.overrides))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def run_name(self) -> str:
        name = f"{self.problem}__{self.solver}__noise-{self.rel_noise:g}__seed-{self.seed}"
        if self.overrides:
            blob = _dumps(self.overrides).encode()
            name += "__" + hashlib.sha256(blob).hexdigest()[:10]
        return name

    def with_(self, **changes) -> "ExperimentSpec":
        fields = dict(
            problem=self.problem, solver=self.solver, rel_noise=self.rel_noise,
            seed=self.seed, overrides=self.overrides, outputs=self.outputs,
        )
        fields.update(changes)
        return ExperimentSpec(**fields)


def build_config(spec: ExperimentSpec, instance: ExperimentInstance) -> SolverConfig:
    """Solver configuration for ``spec``: defaults from the problem, then overrides.

    ``tau, q, alpha`` come from :func:`select_parameters` with the family's
    ``eta`` and ``C``. Overriding ``q`` recomputes the default ``alpha``.
    Raises :class:`ConfigurationError` when the result is infeasible.
    """
    ov = dict(spec.overrides)
    fam = instance.family
    C = fam.bound_C(instance.x0)
    safety = float(ov.get("safety", 1.05))
    try:
        policy = InnerSolvePolicy(
            mode=ov.get("inner_mode", "conjugate-gradient"),
            cg_max_iters=int(ov.get("cg_iters", 1000)),
            cg_rel_tol=float(ov.get("cg_tol", 1e-10)),
            warm_start=bool(ov.get("warm_start", False)),
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    try:
        tau, q, alpha = select_parameters(fam.eta, C, ov.get("tau"), safety)
        if "q" in ov:
            q = float(ov["q"])
            alpha = safety * C**2 * q / (1 - q) if q < 1 else math.inf
        alpha = float(ov.get("alpha", alpha))
        return SolverConfig(
            alpha=alpha, tau=float(tau), q=q, eta=fam.eta, C=C,
            alpha_mode=ov.get("alpha_mode", "fixed"),
            inner_policy=policy,
            max_cycles=int(ov.get("max_cycles", 500)),
            exact_data_tol=float(ov.get("exact_data_tol", 1e-10)),
            record_level=ov.get("record_level", "full-trace"),
            bk_diagnostics=bool(ov.get("bk_diagnostics", True)),
        )
    except InfeasibleParameters as exc:
        raise ConfigurationError(str(exc), exc.constraint) from exc
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def _step_size(spec: ExperimentSpec, config: SolverConfig) -> float:
    return float(spec.overrides.get("step_size", 0.9 / config.C**2))


def load_config(path) -> dict:
    """Read a JSON or YAML experiment file into a plain mapping."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at the top level")
    return data


_SPEC_KEYS = {"problem", "solver", "noise", "rel_noise", "seed", "outputs", "out_dir", "overrides"}


def spec_from_mapping(mapping: Mapping) -> tuple:
    """Turn a flat config mapping into ``(ExperimentSpec, out_dir or None)``.

    Keys besides ``problem, solver, noise, seed, outputs, out_dir`` are
    treated as overrides (hyphens and underscores are interchangeable).
    """
    m = {str(k).replace("-", "_"): v for k, v in mapping.items() if v is not None}
    if "problem" not in m:
        raise ConfigurationError("no problem given")
    overrides = dict(m.pop("overrides", {}) or {})
    for key in list(m):
        if key not in _SPEC_KEYS:
            overrides[key] = m.pop(key)
    noise = m.get("noise", m.get("rel_noise", 0.05))
    spec = ExperimentSpec(
        problem=m["problem"],
        solver=m.get("solver", "llmk"),
        rel_noise=float(noise),
        seed=int(m.get("seed", 0)),
        overrides=overrides,
        outputs=tuple(m.get("outputs", OUTPUTS)),
    )
    return spec, m.get("out_dir")


def resolve_out_dir(out_dir=None) -> Path:
    """``out_dir`` if given, else ``$LMK_OUTPUT_DIR``, else ``./lmk-output``."""
    if out_dir is None:
        out_dir = os.environ.get(ENV_OUT_DIR) or DEFAULT_OUT_DIR
    return Path(out_dir)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    """17-significant-digit text for a float; integers stay integers."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _json_scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return format(v, ".17g")
    return json.dumps(str(v))


def _dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with sorted keys and 17-digit floats."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(x, (Mapping, list, tuple, np.ndarray)) for x in seq):
            return "[" + ", ".join(_json_scalar(x) for x in seq) + "]"
        return "[\n" + ",\n".join(pad + _dumps(x, indent + 1) for x in seq) + "\n" + end + "]"
    return _json_scalar(obj)


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temporary file next to ``path``, then rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _iterate_errors(result: RunResult, x_star) -> Optional[np.ndarray]:
    if result.iterates is None or x_star is None:
        return None
    return np.linalg.norm(result.iterates - np.asarray(x_star), axis=1)


def trace_rows(result: RunResult, x_star=None) -> list:
    """Rows ``k = 0 .. stop_index`` of the trace CSV.

    Row ``k`` describes iterate ``x_k`` and the step taken from it. The
    final row of a run that ended without executing step ``stop_index``
    (budget, exact-data convergence or domain violation) carries the
    residual of ``x_k`` and leaves the step columns blank or ``nan``.
    """
    if result.config.record_level != "full-trace":
        raise InsufficientTrace("summary-level runs have no per-step trace")
    errs = _iterate_errors(result, x_star)
    by_k = {rec.k: rec for rec in result.trace}
    N = result.N
    rows = []
    for k in range(result.stop_index + 1):
        rec = by_k.get(k)
        err = errs[k] if errs is not None and k < len(errs) else (rec.error_to_truth if rec else result.final_error)
        if rec is not None:
            rows.append([k, rec.sub_index, rec.omega, rec.residual_norm, rec.Bk_norm,
                         rec.h_norm, err, rec.alpha_used, rec.cg_iters])
        else:
            i = k % N
            rows.append([k, i, "", result.final_residuals[i], math.nan, math.nan, err, math.nan, ""])
    return rows


def _csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def _summary(spec: ExperimentSpec, result: RunResult, config: SolverConfig, step_size) -> dict:
    pol = config.inner_policy
    return {
        "format": FORMAT_TAG,
        "problem": spec.problem,
        "solver": spec.solver,
        "method": result.method,
        "rel_noise": float(spec.rel_noise),
        "seed": int(spec.seed),
        "N": result.N,
        "stop_index": result.stop_index,
        "stop_reason": result.stop_reason,
        "cycles": result.cycles,
        "total_nonloped": result.total_nonloped,
        "nonloped_per_cycle": list(result.nonloped_per_cycle),
        "parameters": {
            "alpha": config.alpha,
            "tau": config.tau,
            "q": config.q,
            "eta": config.eta,
            "C": config.C,
            "alpha_mode": config.alpha_mode,
            "max_cycles": config.max_cycles,
            "exact_data_tol": config.exact_data_tol,
            "record_level": config.record_level,
            "step_size": step_size,
            "inner_policy": {
                "mode": pol.mode,
                "cg_max_iters": pol.cg_max_iters,
                "cg_rel_tol": pol.cg_rel_tol,
                "dense_threshold": pol.dense_threshold,
                "warm_start": pol.warm_start,
            },
        },
        "overrides": dict(spec.overrides),
        "delta": [float(d) for d in result.delta],
        "thresholds": [float(config.tau * d) for d in result.delta],
        "final_residuals": [float(r) for r in result.final_residuals],
        "initial_error": result.initial_error,
        "final_error": result.final_error,
        "message": result.message,
    }


def write_artifacts(spec: ExperimentSpec, result: RunResult, run_dir, x_star=None, step_size=None) -> dict:
    """Write the requested artifacts of one run; return ``{output: path}``."""
    run_dir = Path(run_dir)
    paths, checksums = {}, {}
    full = result.config.record_level == "full-trace"
    if "trace-csv" in spec.outputs and full:
        blob = _csv_bytes(TRACE_COLUMNS, trace_rows(result, x_star))
        p = run_dir / FILE_NAMES["trace-csv"]
        atomic_write(p, blob)
        paths["trace-csv"], checksums[p.name] = p, hashlib.sha256(blob).hexdigest()
    if "cycle-series-csv" in spec.outputs:
        rows = [(c, n) for c, n in enumerate(result.nonloped_per_cycle)]
        blob = _csv_bytes(("cycle", "nonloped_count"), rows)
        p = run_dir / FILE_NAMES["cycle-series-csv"]
        atomic_write(p, blob)
        paths["cycle-series-csv"], checksums[p.name] = p, hashlib.sha256(blob).hexdigest()
    if "summary-json" in spec.outputs:
        summary = _summary(spec, result, result.config, step_size)
        summary["files"] = {k: Path(v).name for k, v in paths.items()}
        summary["checksums"] = {k: "sha256:" + v for k, v in checksums.items()}
        p = run_dir / FILE_NAMES["summary-json"]
        atomic_write(p, (_dumps(summary) + "\n").encode())
        paths["summary-json"] = p
    return paths


# --------------------------------------------------------------------------
# loading artifacts back
# --------------------------------------------------------------------------


def _parse(v: str, kind=float):
    if v == "":
        return None
    return kind(v)


def load_run(run_dir) -> RunResult:
    """Rebuild a :class:`RunResult` from a run directory.

    The rebuilt trace holds the CSV rows that record an executed step; it
    has no iterates, so checks use the recorded distances to the truth.
    Raises :class:`InsufficientTrace` when the directory has no trace CSV.
    """
    run_dir = Path(run_dir)
    summary = json.loads((run_dir / FILE_NAMES["summary-json"]).read_text())
    trace_path = run_dir / FILE_NAMES["trace-csv"]
    if not trace_path.exists():
        raise InsufficientTrace(f"{run_dir}: no trace CSV (summary-only run)")
    par = summary["parameters"]
    pol = par["inner_policy"]
    config = SolverConfig(
        alpha=par["alpha"], tau=par["tau"], q=par["q"], eta=par["eta"], C=par["C"],
        alpha_mode=par["alpha_mode"],
        inner_policy=InnerSolvePolicy(
            mode=pol["mode"], cg_max_iters=pol["cg_max_iters"], cg_rel_tol=pol["cg_rel_tol"],
            dense_threshold=pol["dense_threshold"], warm_start=pol["warm_start"],
        ),
        max_cycles=par["max_cycles"], exact_data_tol=par["exact_data_tol"],
        record_level=par["record_level"], validate=False,
    )
    delta = np.array(summary["delta"], dtype=float)
    records, errs = [], []
    with open(trace_path, newline="") as fh:
        for row in csv.DictReader(fh):
            err = float(row["error_to_truth"])
            errs.append(err)
            if row["omega"] == "":
                continue
            i = int(row["sub_index"])
            records.append(StepRecord(
                k=int(row["k"]), sub_index=i, omega=int(row["omega"]),
                residual_norm=float(row["residual_norm"]), threshold=config.tau * delta[i],
                Bk_norm=float(row["Bk_norm"]), h_norm=float(row["h_norm"]),
                error_to_truth=err, alpha_used=float(row["alpha_used"]),
                cg_iters=int(row["cg_iters"]),
            ))
    nonloped = tuple(summary["nonloped_per_cycle"])
    cyc_path = run_dir / FILE_NAMES["cycle-series-csv"]
    if cyc_path.exists():
        with open(cyc_path, newline="") as fh:
            nonloped = tuple(int(r["nonloped_count"]) for r in csv.DictReader(fh))
    return RunResult(
        method=summary["method"],
        stop_index=int(summary["stop_index"]),
        stop_reason=summary["stop_reason"],
        final_x=np.array([]),
        trace=tuple(records),
        nonloped_per_cycle=nonloped,
        config=config,
        delta=delta,
        final_residuals=np.array(summary["final_residuals"], dtype=float),
        x0=np.array([]),
        initial_error=errs[0] if errs else math.nan,
        final_error=errs[-1] if errs else math.nan,
        iterates=None,
        message=summary.get("message", ""),
    )


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverSummary:
    solver: str
    cycles: int
    stop_index: int
    stop_reason: str
    total_nonloped: int
    nonloped_per_cycle: tuple
    final_residuals: tuple
    final_error: float
    run_dir: Optional[str] = None
    verdicts: tuple = ()


@dataclass(frozen=True)
class ComparisonReport:
    """Per-solver outcomes of runs on one problem instance."""

    problem: str
    rel_noise: float
    seed: int
    entries: tuple

    def entry(self, solver: str) -> SolverSummary:
        for e in self.entries:
            if e.solver == solver:
                return e
        raise KeyError(f"no {solver!r} run in this report")

    def orderings(self) -> dict:
        """Orderings between the l-LMK and l-LK entries."""
        a, b = self.entry("llmk"), self.entry("llk")
        return {
            "fewer_cycles": a.cycles < b.cycles,
            "nonloped_not_more": a.total_nonloped <= b.total_nonloped,
            "both_discrepancy": a.stop_reason == b.stop_reason == "discrepancy-cycle",
        }

    @classmethod
    def from_run_dirs(cls, run_dirs: Sequence) -> "ComparisonReport":
        """Recompute a report from serialized runs only."""
        entries, meta = [], None
        for d in run_dirs:
            d = Path(d)
            summary = json.loads((d / FILE_NAMES["summary-json"]).read_text())
            run = load_run(d)
            nonloped = sum(1 for r in run.trace if r.k < run.stop_index and r.omega)
            entries.append(SolverSummary(
                solver=summary["solver"],
                cycles=run.stop_index // run.N,
                stop_index=run.stop_index,
                stop_reason=run.stop_reason,
                total_nonloped=nonloped,
                nonloped_per_cycle=run.nonloped_per_cycle,
                final_residuals=tuple(run.final_residuals.tolist()),
                final_error=run.final_error,
                run_dir=str(d),
            ))
            meta = meta or (summary["problem"], summary["rel_noise"], summary["seed"])
        return cls(meta[0], meta[1], meta[2], tuple(entries))

    def lines(self) -> list:
        out = [f"problem {self.problem}, noise {self.rel_noise:g}, seed {self.seed}"]
        for e in self.entries:
            out.append(
                f"  {e.solver:10s} cycles={e.cycles:<5d} nonloped={e.total_nonloped:<6d} "
                f"stop={e.stop_reason:<22s} error={e.final_error:.6g}"
            )
        return out


def execute(spec: ExperimentSpec, instance: Optional[ExperimentInstance] = None):
    """Run ``spec`` in memory; return ``(RunResult, instance, step_size)``."""
    if instance is None:
        instance = make_experiment_instance(spec.problem, spec.rel_noise, spec.seed)
    config = build_config(spec, instance)
    fam, data, x0 = instance.family, instance.data, instance.x0
    step_size = None
    if spec.solver == "llmk":
        result = run_llmk(fam, data, x0, config)
    elif spec.solver == "lmk-exact":
        result = run_lmk(fam, data, x0, config)
    else:
        step_size = _step_size(spec, config)
        result = run_llk(fam, data, x0, config, step_size)
    return result, instance, step_size


def _summarize(spec, result, run_dir, verdicts) -> SolverSummary:
    return SolverSummary(
        solver=spec.solver,
        cycles=result.cycles,
        stop_index=result.stop_index,
        stop_reason=result.stop_reason,
        total_nonloped=result.total_nonloped,
        nonloped_per_cycle=result.nonloped_per_cycle,
        final_residuals=tuple(float(r) for r in result.final_residuals),
        final_error=result.final_error,
        run_dir=None if run_dir is None else str(run_dir),
        verdicts=verdicts,
    )


def _run_and_record(spec, out_dir, instance, verify):
    result, instance, step_size = execute(spec, instance)
    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir) / spec.run_name
        write_artifacts(spec, result, run_dir, instance.family.ground_truth, step_size)
    verdicts = ()
    if verify and result.config.record_level == "full-trace":
        rep = verify_run(result, instance.family.ground_truth, source=spec.run_name)
        verdicts = tuple((c.name, c.status) for c in rep.checks)
    return result, _summarize(spec, result, run_dir, verdicts)


def run_experiment(spec: ExperimentSpec, out_dir=None, verify: bool = True, write: bool = True) -> ComparisonReport:
    """Run one spec, write its artifacts and return a one-entry report.

    ``out_dir`` defaults to :func:`resolve_out_dir`; ``write=False`` skips
    the files entirely.
    """
    out = resolve_out_dir(out_dir) if write else None
    _, entry = _run_and_record(spec, out, None, verify)
    return ComparisonReport(spec.problem, spec.rel_noise, spec.seed, (entry,))


def compare(
    problem: str,
    rel_noise: float = 0.05,
    seed: int = 0,
    overrides: Optional[Mapping] = None,
    out_dir=None,
    solvers: Sequence[str] = ("llmk", "llk"),
    verify: bool = True,
    write: bool = True,
) -> ComparisonReport:
    """Run several solvers on one shared problem instance (same noise draw)."""
    base = ExperimentSpec(problem, solvers[0], rel_noise, seed, overrides or {})
    instance = make_experiment_instance(problem, rel_noise, seed)
    out = resolve_out_dir(out_dir) if write else None
    entries = []
    for solver in solvers:
        _, entry = _run_and_record(base.with_(solver=solver), out, instance, verify)
        entries.append(entry)
    return ComparisonReport(problem, rel_noise, seed, tuple(entries))


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    status: str  # "pass", "fail" or "skipped"
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    source: str
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if c.status == "fail"]

    def status(self, name: str) -> str:
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    def lines(self) -> list:
        out = [f"{self.source}: {'PASS' if self.ok else 'FAIL'}"]
        for c in self.checks:
            out.append(f"  [{c.status:7s}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return out


def _check(name, ok, detail=""):
    return CheckOutcome(name, "pass" if ok else "fail", detail)


def _is_lmk(result):
    return result.method in ("llmk", "lmk", "lmk-exact")


def _loping_check(result) -> CheckOutcome:
    exact = not np.any(result.delta > 0) or result.method == "lmk-exact"
    bad = []
    for rec in result.trace:
        expected = 1 if exact else int(rec.residual_norm >= rec.threshold)
        if rec.omega != expected:
            bad.append(rec.k)
    return _check("loping-correctness", not bad, f"mismatched omega at k={bad[:5]}" if bad else "")


def _stationarity_check(result) -> CheckOutcome:
    bad = []
    for rec in result.trace:
        if rec.omega:
            continue
        k = rec.k
        if result.iterates is not None and k + 1 < len(result.iterates):
            same = np.array_equal(result.iterates[k], result.iterates[k + 1])
        else:
            same = rec.h_norm == 0.0
        if not same:
            bad.append(k)
    return _check("stationarity", not bad, f"loped steps moved x at k={bad[:5]}" if bad else "")


def _stopping_check(result) -> CheckOutcome:
    N = result.N
    thr = result.config.tau * result.delta
    if result.stop_reason == "discrepancy-cycle":
        res = result.final_residuals
        ok = bool(np.all(res < thr)) and result.stop_index % N == 0
        return _check("stopping-soundness", ok, f"max residual/threshold = {np.max(res / thr):.6g}")
    if result.stop_reason == "domain-violation":
        return _check("stopping-soundness", False, f"left the admissible box: {result.message}")
    exact = not np.any(result.delta > 0) or result.method == "lmk-exact"
    if exact:
        return _check("stopping-soundness", True, f"exact-data run ended by {result.stop_reason}")
    return _check("stopping-soundness", False, "noisy run exhausted the cycle budget")


def _inner_tight(config) -> bool:
    pol = config.inner_policy
    return pol.mode == "direct-dense" or pol.cg_rel_tol <= 1e-8


def _bk_form_check(result) -> CheckOutcome:
    name = "bk-two-form"
    if not _is_lmk(result):
        return CheckOutcome(name, "skipped", "not an LMK run")
    gaps = [r.Bk_form_gap for r in result.trace if r.omega]
    if not gaps:
        return CheckOutcome(name, "skipped", "no non-loped steps")
    if any(math.isnan(g) for g in gaps):
        return CheckOutcome(name, "skipped", "resolvent form not recorded (rerun with bk_diagnostics)")
    worst = max(gaps)
    pol = result.config.inner_policy
    tol = max(1e-8, 10 * pol.cg_rel_tol) if pol.mode == "conjugate-gradient" else 1e-8
    cg = max(r.cg_rel_residual for r in result.trace if r.omega)
    detail = f"max relative gap {worst:.3g} (tolerance {tol:.3g}, inner residual {cg:.3g})"
    if not _inner_tight(result.config):
        return CheckOutcome(name, "pass" if worst <= tol else "skipped", detail + "; loose inner solve")
    return _check(name, worst <= tol, detail)


def _bk_bounds_check(result) -> CheckOutcome:
    name = "bk-bounds"
    if not _is_lmk(result):
        return CheckOutcome(name, "skipped", "not an LMK run")
    cfg = result.config
    steps = [r for r in result.trace if r.omega]
    if cfg.alpha_mode == "residual-matched":
        bad = [r.k for r in steps
               if not r.alpha_matched or abs(r.Bk_norm - cfg.q * r.residual_norm) > MATCH_TOL * cfg.q * r.residual_norm]
        return _check("residual-matching", not bad, f"unmatched steps k={bad[:5]}" if bad else f"{len(steps)} steps matched")
    bad = [r.k for r in steps
           if not (cfg.q * r.residual_norm * (1 - BK_BOUND_SLACK) <= r.Bk_norm <= r.residual_norm * (1 + BK_BOUND_SLACK))]
    detail = f"bound violated at k={bad[:5]}" if bad else f"{len(steps)} steps within [q|r|, |r|]"
    if bad and not _inner_tight(cfg):
        cg = max(r.cg_rel_residual for r in steps)
        return CheckOutcome(name, "skipped", f"{detail}; loose inner solve, residual {cg:.3g}")
    return _check(name, not bad, detail)


def _monotonicity_check(result, x_star) -> CheckOutcome:
    name = "monotonicity"
    if not _is_lmk(result):
        return CheckOutcome(name, "skipped", "l-LK run")
    if result.config.alpha_mode == "residual-matched":
        return CheckOutcome(name, "skipped", "experimental mode: residual-matched alpha is not covered")
    rep = verify_monotonicity(result, x_star)
    detail = f"{len(rep.violations)} violations in {rep.checked} steps"
    if rep.estimate_violations:
        detail += f"; per-step estimate exceeded at {len(rep.estimate_violations)} steps (advisory)"
    return _check(name, rep.ok, detail)


def _summability_check(result, x_star) -> CheckOutcome:
    name = "summability"
    exact = not np.any(result.delta > 0)
    if not (_is_lmk(result) and exact and result.config.alpha_mode == "fixed"):
        return CheckOutcome(name, "skipped", "only for exact-data fixed-alpha LMK runs")
    rep = verify_summability(result, x_star)
    worst = max(rep.sums[k] / rep.bounds[k] for k in rep.sums if rep.bounds[k] > 0)
    return _check(name, rep.ok, f"largest sum/bound ratio {worst:.3g}")


def verify_run(result: RunResult, x_star=None, source: str = "run") -> VerificationReport:
    """Run every applicable check on a full-trace result.

    Raises :class:`InsufficientTrace` for summary-level results.
    """
    if result.config.record_level != "full-trace":
        raise InsufficientTrace("verification needs a full trace")
    checks = [
        _loping_check(result),
        _stationarity_check(result),
        _stopping_check(result),
        _bk_form_check(result),
        _bk_bounds_check(result),
        _monotonicity_check(result, x_star),
        _summability_check(result, x_star),
    ]
    return VerificationReport(source, tuple(checks))


def verify_suite(target, out_dir=None) -> VerificationReport:
    """Verify an :class:`ExperimentSpec`, a :class:`RunResult` or a run directory.

    A spec is executed first (its artifacts are written when ``out_dir`` is
    given). A run directory is checked from its files alone.
    """
    if isinstance(target, ExperimentSpec):
        if target.overrides.get("record_level", "full-trace") != "full-trace":
            raise InsufficientTrace("verification needs record_level='full-trace'")
        result, instance, step_size = execute(target)
        if out_dir is not None:
            write_artifacts(target, result, Path(out_dir) / target.run_name,
                            instance.family.ground_truth, step_size)
        return verify_run(result, instance.family.ground_truth, target.run_name)
    if isinstance(target, RunResult):
        return verify_run(target, None, target.method)
    return verify_run(load_run(target), None, str(target))


# --------------------------------------------------------------------------
# noise sweep
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepReport:
    """Outcome of a noise-amplitude sweep with one shared noise direction.

    ``fixed_k_distance[j]`` is ``|x_k^{delta_j} - x_k|`` at ``k = fixed_k``
    where ``x_k`` follows the exact-data LMK iteration; a noisy run that
    stopped before ``fixed_k`` contributes its final iterate.
    """

    problem: str
    amplitudes: tuple
    delta_min: tuple
    k_star: tuple
    stop_reasons: tuple
    final_error: tuple
    fixed_k: int
    fixed_k_distance: tuple
    slope: float

    def slope_ok(self, limit: float = -2.2) -> bool:
        return bool(np.isfinite(self.slope) and self.slope >= limit)

    @staticmethod
    def _nonincreasing(values, slack):
        return all(b <= a * (1 + slack) for a, b in zip(values, values[1:]))

    def final_error_nonincreasing(self, slack: float = 0.05) -> bool:
        return self._nonincreasing(self.final_error, slack)

    def fixed_k_nonincreasing(self, slack: float = 0.05) -> bool:
        return self._nonincreasing(self.fixed_k_distance, slack)

    def lines(self) -> list:
        out = [f"noise sweep on {self.problem} (fixed k = {self.fixed_k}), slope {self.slope:.4g}"]
        for j, a in enumerate(self.amplitudes):
            out.append(
                f"  noise {a:<8g} delta_min {self.delta_min[j]:.4g}  k* {self.k_star[j]:<6d} "
                f"error {self.final_error[j]:.5g}  |x_k^d - x_k| {self.fixed_k_distance[j]:.5g}"
            )
        return out


def noise_sweep(
    spec: ExperimentSpec,
    amplitudes: Sequence[float],
    out_dir=None,
    fixed_k: Optional[int] = None,
) -> SweepReport:
    """Run ``spec`` at several noise amplitudes along one noise direction.

    ``amplitudes`` must be positive, strictly decreasing and at least three
    long. The slope is the least-squares fit of ``log k*`` against
    ``log delta_min``; it is ``nan`` if some run stopped at ``k* = 0``.
    """
    amps = [float(a) for a in amplitudes]
    if len(amps) < 3:
        raise ValueError("a noise sweep needs at least 3 amplitudes")
    if any(a <= 0 for a in amps) or any(b >= a for a, b in zip(amps, amps[1:])):
        raise ValueError("amplitudes must be positive and strictly decreasing")

    exact = make_experiment_instance(spec.problem, 0.0, spec.seed)
    fam, x0 = exact.family, exact.x0
    exact_y = exact.data.exact_y
    directions = noise_directions(exact_y, spec.seed)
    config = build_config(spec, exact)
    N = fam.N
    k_fix = 2 * N if fixed_k is None else int(fixed_k)

    ref = run_lmk(fam, exact.data, x0, config.with_(max_cycles=max(1, -(-k_fix // N)), record_level="full-trace"))
    x_ref = ref.iterates[min(k_fix, len(ref.iterates) - 1)]

    dmins, kstars, reasons, errs, dists = [], [], [], [], []
    for a in amps:
        data = make_noisy_data(exact_y, a, spec.seed, directions=directions)
        inst = ExperimentInstance(spec.problem, fam, data, x0, exact.problem)
        result, _, _ = execute(spec.with_(rel_noise=a), inst)
        dmins.append(data.delta_min)
        kstars.append(result.stop_index)
        reasons.append(result.stop_reason)
        errs.append(result.final_error)
        xk = result.iterates[min(k_fix, len(result.iterates) - 1)]
        dists.append(float(np.linalg.norm(xk - x_ref)))

    ks = np.array(kstars, dtype=float)
    if np.all(ks > 0):
        slope = float(np.polyfit(np.log(dmins), np.log(ks), 1)[0])
    else:
        slope = math.nan
    report = SweepReport(
        spec.problem, tuple(amps), tuple(dmins), tuple(kstars), tuple(reasons),
        tuple(errs), k_fix, tuple(dists), slope,
    )
    if out_dir is not None:
        rows = zip(amps, dmins, kstars, reasons, errs, dists)
        blob = _csv_bytes(
            ("amplitude", "delta_min", "k_star", "stop_reason", "final_error", "fixed_k_distance"), rows
        )
        base = Path(out_dir) / f"sweep__{spec.problem}__{spec.solver}__seed-{spec.seed}"
        atomic_write(base / "sweep.csv", blob)
        meta = {"problem": spec.problem, "solver": spec.solver, "seed": spec.seed,
                "fixed_k": k_fix, "slope": slope, "overrides": dict(spec.overrides),
                "checksums": {"sweep.csv": "sha256:" + hashlib.sha256(blob).hexdigest()}}
        atomic_write(base / "summary.json", (_dumps(meta) + "\n").encode())
    return report
