"""Stopping index and reconstruction error as the noise level shrinks.

All amplitudes share one noise direction, so the runs differ only in the
size of the perturbation. Run with ``python3 demos/noise_sweep.py``.
"""

from lmkaczmarz.harness import ExperimentSpec, noise_sweep


def main():
    spec = ExperimentSpec("block-linear-64", "llmk", seed=0, overrides={"max_cycles": 2000})
    rep = noise_sweep(spec, [0.08, 0.04, 0.02, 0.01, 0.005])
    print("\n".join(rep.lines()))
    print(f"final error non-increasing: {rep.final_error_nonincreasing()}")


if __name__ == "__main__":
    main()
