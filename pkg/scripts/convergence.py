"""Validation curves of SGD and L-BFGS from identical initial weights.

Writes one CSV per seed with columns epoch,sgd_val_loss,sgd_val_acc,lbfgs_val_loss,lbfgs_val_acc
and prints epochs-to-target per seed.
"""
import argparse
import csv
from pathlib import Path

from egosocial.experiments import convergence_trial, median_epochs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--budget", type=int, default=40, help="epochs per optimizer")
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sgd_epochs, lbfgs_epochs = [], []
    for seed in args.seeds:
        trial = convergence_trial(seed, args.budget)
        s = trial.summary
        sgd_epochs.append(s.sgd_epochs)
        lbfgs_epochs.append(s.lbfgs_epochs)
        with open(out / f"curves_seed{seed}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "sgd_val_loss", "sgd_val_acc", "lbfgs_val_loss", "lbfgs_val_acc"])
            for e in range(max(trial.sgd.epochs, trial.lbfgs.epochs)):
                pick = lambda xs: repr(xs[e]) if e < len(xs) else ""  # noqa: E731
                w.writerow([e + 1, pick(trial.sgd.val_loss), pick(trial.sgd.val_acc),
                            pick(trial.lbfgs.val_loss), pick(trial.lbfgs.val_acc)])
        print(f"seed {seed}: target {s.target:.4f}  sgd {s.sgd_epochs}  lbfgs {s.lbfgs_epochs}  "
              f"(lbfgs fallbacks {trial.lbfgs.fallbacks})", flush=True)
    print(f"median epochs-to-target: sgd {median_epochs(sgd_epochs, args.budget):g}, "
          f"lbfgs {median_epochs(lbfgs_epochs, args.budget):g} (not reached counts as {args.budget + 1})")


if __name__ == "__main__":
    main()
