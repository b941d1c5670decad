"""Rejection rates of the two-point equivalence test for beta(u) = 0.8 sin(4 pi u)."""
import argparse
from pathlib import Path

from tvlad.cli import parse_innovation
from tvlad.experiments import StudyConfig, run_size_power_study
from tvlad.process import equivalence_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", default="100,500,1000")
    ap.add_argument("--replications", type=int, default=300)
    ap.add_argument("--M", type=int, default=500)
    ap.add_argument("--u1", type=float, default=0.2)
    ap.add_argument("--u2", default="0.7,0.75,0.8", help="0.7 is the null point")
    ap.add_argument("--innovations", default="gaussian,t2,cauchy")
    ap.add_argument("--weight", help="estimator label, default LSW2q2")
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.innovations.split(","):
        cfg = StudyConfig(equivalence_model(parse_innovation(name)),
                          T_list=tuple(int(t) for t in args.T.split(",")),
                          replications=args.replications, M=args.M, seed=args.seed,
                          weight=args.weight, workers=args.workers)
        table = run_size_power_study(cfg, args.u1, [float(u) for u in args.u2.split(",")])
        table.write(out / f"power_{name}")
        print(table.to_text(), end="\n\n")


if __name__ == "__main__":
    main()
