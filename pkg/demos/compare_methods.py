"""Compare l-LMK, residual-matched l-LMK and l-LK on the elliptic problem.

Run with ``python3 demos/compare_methods.py``. Nothing is written to disk.
"""

from lmkaczmarz.harness import ExperimentSpec, execute
from lmkaczmarz.problems import make_experiment_instance

PROBLEM = "elliptic1d-9loads"
SEED = 7


def main():
    for noise in (0.05, 0.01):
        inst = make_experiment_instance(PROBLEM, noise, SEED)
        print(f"{PROBLEM}, noise {noise:g}, seed {SEED}")
        runs = [
            ("l-LMK fixed alpha", ExperimentSpec(PROBLEM, "llmk", noise, SEED, {"max_cycles": 1000})),
            ("l-LMK matched alpha", ExperimentSpec(PROBLEM, "llmk", noise, SEED, {"alpha_mode": "residual-matched"})),
            ("l-LK", ExperimentSpec(PROBLEM, "llk", noise, SEED, {"max_cycles": 1000})),
        ]
        for label, spec in runs:
            res, _, _ = execute(spec, inst)
            print(
                f"  {label:20s} cycles {res.cycles:4d}  non-loped steps {res.total_nonloped:4d}  "
                f"stop {res.stop_reason:18s}  error {res.final_error:.4f}"
            )
        print()


if __name__ == "__main__":
    main()
