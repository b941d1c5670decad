"""MAE and MSE tables for the tvAR(1) sine model under three innovation laws."""
import argparse
from pathlib import Path

from tvlad.cli import parse_innovation
from tvlad.experiments import StudyConfig, run_mae_study
from tvlad.process import example1_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", default="100,500,1000", help="comma list of sample sizes")
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--innovations", default="gaussian,t2,cauchy")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    T_list = tuple(int(t) for t in args.T.split(","))
    for name in args.innovations.split(","):
        cfg = StudyConfig(example1_model(parse_innovation(name)), T_list=T_list,
                          replications=args.replications, seed=args.seed, workers=args.workers)
        for metric in ("MAE", "MSE"):
            table = run_mae_study(cfg, metric)
            table.write(out / f"{metric.lower()}_{name}")
            print(table.to_text(), end="\n\n")


if __name__ == "__main__":
    main()
