"""A small seeded Monte-Carlo run: estimator RMSE against the bounds.

Each trial draws theta from the Beta(a, a) prior, then the sufficient
statistic t given theta, then asks every estimator for its answer.
Trials live in counter-based RNG substreams keyed by (seed, N, trial),
so the numbers below are a pure function of the seed and identical no
matter how many worker processes are used.

Two thousand trials is enough to see the shape; the shipped experiment
uses twenty thousand. The CLI form, including a manifest file with a
checksum next to the CSV:

    covbounds fig1 --out fig1.csv --workers 4
"""
from covbounds import ExperimentConfig, run_experiment


def main():
    cfg = ExperimentConfig(
        a=3.0,
        n_list=(2, 8, 32, 128, 512),
        trials=2000,
        seed=424242,
        estimators=("map", "ml", "mmse"),
    )
    rows = run_experiment(cfg, workers=2)

    head = (f"{'N':>5} {'rmse_map':>10} {'rmse_ml':>10} {'rmse_mmse':>10} "
            f"{'sqrt_tbcrb':>11} {'sqrt_bcrb':>10} {'sqrt_mmse':>10}")
    print(head)
    print("-" * len(head))
    for r in rows:
        print(f"{r.n:>5} {r.rmse['map']:>10.5f} {r.rmse['ml']:>10.5f} "
              f"{r.rmse['mmse']:>10.5f} {r.sqrt_tbcrb:>11.5f} "
              f"{r.sqrt_bcrb:>10.5f} {r.sqrt_mmse_theory:>10.5f}")

    print()
    r = rows[-1]
    print(f"at N={r.n} the mmse estimator sits "
          f"{100 * (r.rmse['mmse'] / r.sqrt_tbcrb - 1):+.1f}% from the "
          f"tighter bound (MC standard error "
          f"{100 * r.se['mmse'] / r.sqrt_tbcrb:.1f}%)")
    print("no estimator can beat sqrt_mmse; the tighter bound tracks it,")
    print("the classical bound does not.")


if __name__ == "__main__":
    main()
