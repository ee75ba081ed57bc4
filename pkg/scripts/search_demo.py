"""Desk-scale random search over blocks, learning rate, momentum and batch size."""
import argparse
from pathlib import Path

from egosocial.dataset import AugmentSpec
from egosocial.experiments import scaled_batch_size
from egosocial.search import SearchSpace, random_search, write_summary_csv
from egosocial.synthetic import make_dataset
from egosocial.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=25)
    ap.add_argument("--max-epochs", type=int, default=15)
    ap.add_argument("--patience", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/search")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    data = make_dataset(augment_train=AugmentSpec(copies_per_series=10),
                        augment_eval=AugmentSpec(copies_per_series=5), seed=args.seed)
    n = len(data.train)
    # the batch interval keeps its proportion to a 10,000-series training set
    space = SearchSpace(batch_size=(scaled_batch_size(n * 200 // 500), scaled_batch_size(n * 1000 // 500) + 1))
    ranked = random_search(space, data.train, data.val, args.trials, args.seed,
                           base_train=TrainConfig(max_epochs=args.max_epochs, patience=args.patience),
                           workers=args.workers, log_path=out / "search_log.jsonl")
    write_summary_csv(out / "search_summary.csv", ranked)
    for rank, r in enumerate(ranked[:5], 1):
        print(f"{rank}. trial {r.trial}: blocks {r.lstm.num_blocks} lr {r.train.learning_rate:.2e} "
              f"momentum {r.train.momentum:.3f} batch {r.train.batch_size} "
              f"val_loss {r.val_loss:.4f} val_acc {r.val_acc:.3f}")


if __name__ == "__main__":
    main()
