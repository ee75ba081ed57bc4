"""Command line entry point: ``egosocial <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 training diverged.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseline, dataset, evaluation, geometry, lstm, search, synthetic, training
from .experiments import scaled_batch_size
from .errors import DivergedError, InvalidArgumentError, ValidationError

log = logging.getLogger("egosocial")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def cmd_calibrate(args):
    if args.samples:
        samples = geometry.read_calibration_csv(args.samples)
    else:
        samples = synthetic.calibration_samples(noise_cm=args.noise_cm, seed=args.seed)
        geometry.write_calibration_csv(_out(args) / "calibration.csv", samples)
    model = geometry.fit_distance_model(samples)
    model.save(_out(args) / "distance_model.txt")
    h = np.array([s[0] for s in samples])
    d = np.array([s[1] for s in samples])
    pred = np.array([geometry.estimate_distance(model, x) for x in h])
    print(f"c0={model.c0:.6g} c1={model.c1:.6g} c2={model.c2:.6g} range=[{model.h_min:g}, {model.h_max:g}] "
          f"rmse={np.sqrt(np.mean((pred - d) ** 2)):.3f} cm")


def cmd_generate(args):
    out = _out(args)
    aug_train = dataset.AugmentSpec(copies_per_series=args.copies, injection_fraction=args.injection_fraction,
                                    bias_fraction=args.bias_fraction, seed=args.seed)
    aug_eval = dataset.AugmentSpec(copies_per_series=args.eval_copies, injection_fraction=args.injection_fraction,
                                   bias_fraction=args.bias_fraction, seed=args.seed + 1)
    if args.tracks:
        dm = geometry.DistanceModel.load(args.distance_model) if args.distance_model else \
            geometry.fit_distance_model(synthetic.calibration_samples())
        tracks = dataset.read_tracks_jsonl(args.tracks)
        series = [dataset.build_series(geometry.impute_poses(t), dm) for t in tracks]
        if any(s.label is None for s in series):
            dataset.write_series_csv(out / "series.csv", series)
            print(f"wrote {len(series)} unlabelled series")
            return
        train, val, test = dataset.split_dataset(series, dataset.SplitSpec(seed=args.seed))
        sets = {
            "train": dataset.augment_all(train, aug_train),
            "val": dataset.augment_all(val, aug_eval),
            "test": dataset.augment_all(test, dataset.AugmentSpec(**{**aug_eval.__dict__, "seed": args.seed + 2})),
            "real_train": train, "real_val": val, "real_test": test,
        }
    else:
        corpus = synthetic.CorpusSpec(n_people=args.people, seed=args.seed)
        dm = geometry.fit_distance_model(synthetic.calibration_samples())
        dataset.write_tracks_jsonl(out / "tracks.jsonl", synthetic.simulate_tracks(corpus))
        data = synthetic.make_dataset(corpus, aug_train, aug_eval)
        sets = {name: getattr(data, name) for name in ("train", "val", "test", "real_train", "real_val", "real_test")}
    dm.save(out / "distance_model.txt")
    for name, items in sets.items():
        dataset.write_series_csv(out / f"{name}.csv", items)
    print(" ".join(f"{k}={len(v)}" for k, v in sets.items()))


def _train_config(args, n_train) -> training.TrainConfig:
    batch = args.batch_size or scaled_batch_size(n_train)
    return training.TrainConfig(
        optimizer=args.optimizer, learning_rate=args.lr, momentum=args.momentum, batch_size=batch,
        max_epochs=args.max_epochs, patience=args.patience, lbfgs_memory=args.lbfgs_memory,
        lbfgs_batch_size=args.lbfgs_batch_size, seed=args.seed, workers=args.workers)


def cmd_train(args):
    out = _out(args)
    train_set = dataset.read_series_csv(args.train)
    val_set = dataset.read_series_csv(args.val)
    cfg = lstm.LstmConfig(num_blocks=args.blocks, alpha=args.alpha, seed=args.seed)
    tcfg = _train_config(args, len(train_set))
    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_acc"])

        def on_epoch(epoch, tl, vl, va):
            writer.writerow([epoch, repr(float(tl)), repr(float(vl)), repr(float(va))])
            fh.flush()
            log.info("epoch %d train_loss %.5f val_loss %.5f val_acc %.4f", epoch, tl, vl, va)

        run = training.train(lstm.init_model(cfg), train_set, val_set, tcfg, on_epoch=on_epoch)
    lstm.save_checkpoint(run.model, out / "checkpoint.json")
    print(f"best epoch {run.best_epoch}: val_loss {run.best_val_loss:.5f} val_acc {run.best_val_acc:.4f}")


def cmd_search(args):
    out = _out(args)
    train_set = dataset.read_series_csv(args.train)
    val_set = dataset.read_series_csv(args.val)
    base_train = training.TrainConfig(max_epochs=args.max_epochs, patience=args.patience)
    ranked = search.random_search(search.SearchSpace(), train_set, val_set, args.trials, args.seed,
                                  lstm.LstmConfig(alpha=args.alpha), base_train, workers=args.workers,
                                  log_path=out / "search_log.jsonl")
    search.write_summary_csv(out / "search_summary.csv", ranked)
    best = ranked[0]
    print(f"best trial {best.trial}: blocks {best.lstm.num_blocks} lr {best.train.learning_rate:.3g} "
          f"momentum {best.train.momentum:.3g} batch {best.train.batch_size} val_loss {best.val_loss:.5f}")


def cmd_baseline(args):
    out = _out(args)
    series = dataset.read_series_csv(args.series)
    grid = [args.threshold] if args.threshold is not None else baseline.default_grid(args.grid_step)
    result = baseline.sweep_threshold(series, grid)
    with open(out / "baseline_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall", "f_measure"])
        for row in result.rows():
            w.writerow([repr(v) for v in row])
    m = result.best
    _write_json(out / "baseline_metrics.json", {"method": "HVFF", "threshold": result.best_threshold, **m.__dict__})
    print(f"best threshold {result.best_threshold:g}: P {m.precision:.3f} R {m.recall:.3f} F {m.f_measure:.3f}")


def cmd_evaluate(args):
    model = lstm.load_checkpoint(args.checkpoint)
    series = dataset.read_series_csv(args.series)
    out = _out(args)
    probs = training.predict_proba(model, series)
    preds = (probs > evaluation.LSTM_DECISION_THRESHOLD).astype(int)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series_id", "probability", "prediction", "label"])
        for s, p, y in zip(series, probs, preds):
            w.writerow([s.series_id, repr(float(p)), int(y), "" if s.label is None else s.label])
    if all(s.label is not None for s in series):
        m = evaluation.compute_metrics(preds.tolist(), [s.label for s in series])
        _write_json(out / "metrics.json", {"method": args.name, **m.__dict__})
        print(f"{args.name}: P {m.precision:.3f} R {m.recall:.3f} F {m.f_measure:.3f} acc {m.accuracy:.3f}")


def cmd_gradcheck(args):
    if args.checkpoint:
        model = lstm.load_checkpoint(args.checkpoint)
    else:
        model = lstm.init_model(lstm.LstmConfig(num_blocks=args.blocks, init_range=(-0.5, 0.5), seed=args.seed))
    if args.series:
        series = dataset.read_series_csv(args.series)[: args.max_series]
    else:
        rng = np.random.default_rng(args.seed)
        series = [dataset.InteractionSeries("s0", np.column_stack([rng.uniform(10, 500, 6), rng.uniform(-90, 90, 6)]),
                                            int(rng.integers(2)))]
    worst, mean = training.gradient_check(model, series, args.step)
    print(f"max relative error {worst:.3e}, mean {mean:.3e} over {model.params.size} parameters")


def cmd_report(args):
    runs = []
    if args.reported_fixture:
        runs.extend(evaluation.REPORTED_TABLE)
    for path in args.metrics:
        rec = json.loads(Path(path).read_text())
        runs.append((rec.get("method", Path(path).stem), rec["precision"], rec["recall"], rec["f_measure"]))
    table = evaluation.compare_report(runs)
    (_out(args) / "report.txt").write_text(table + "\n")
    print(table)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file of option defaults; command line flags win")
    common.add_argument("--out", default="out", help="directory for all written artifacts")
    common.add_argument("-v", "--verbose", action="store_true")

    # global flags live on each subcommand: `egosocial train --seed 3 ...`
    parser = argparse.ArgumentParser(prog="egosocial")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit the face-height to distance regressor")
    p.add_argument("--samples", help="CSV with header face_height_px,distance_cm (default: synthetic pinhole)")
    p.add_argument("--noise-cm", type=float, default=0.0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("generate", parents=[common], help="build split, augmented series datasets")
    p.add_argument("--tracks", help="JSONL track file (default: simulate a corpus)")
    p.add_argument("--distance-model")
    p.add_argument("--people", type=int, default=100)
    p.add_argument("--copies", type=int, default=60)
    p.add_argument("--eval-copies", type=int, default=10)
    p.add_argument("--injection-fraction", type=float, default=0.3)
    p.add_argument("--bias-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_generate)

    def hyper(p):
        p.add_argument("--train", required=True)
        p.add_argument("--val", required=True)
        p.add_argument("--alpha", type=float, default=3.5)
        p.add_argument("--max-epochs", type=int, default=200)
        p.add_argument("--patience", type=int, default=20)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", parents=[common], help="train the LSTM")
    hyper(p)
    p.add_argument("--optimizer", choices=["sgd", "lbfgs"], default="sgd")
    p.add_argument("--blocks", type=int, default=35)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.8)
    p.add_argument("--batch-size", type=int, default=None, help="default: 5%% of the training set, at most 500")
    p.add_argument("--lbfgs-memory", type=int, default=10)
    p.add_argument("--lbfgs-batch-size", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search", parents=[common], help="random hyperparameter search")
    hyper(p)
    p.add_argument("--trials", type=int, default=25)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("baseline", parents=[common], help="frame-vote threshold baseline")
    p.add_argument("--series", required=True)
    p.add_argument("--threshold", type=float, default=None, help="single threshold instead of a sweep")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on a series file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--name", default="LSTM")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", parents=[common], help="compare BPTT with finite differences")
    p.add_argument("--checkpoint")
    p.add_argument("--series")
    p.add_argument("--max-series", type=int, default=4)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--step", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", parents=[common], help="precision/recall/F-measure table")
    p.add_argument("metrics", nargs="*", help="metrics.json files from evaluate/baseline")
    p.add_argument("--reported-fixture", action="store_true", help="include the originally reported numbers")
    p.set_defaults(func=cmd_report)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {args.config}: {exc}") from exc
        section = {**{k: v for k, v in defaults.items() if not isinstance(v, dict)},
                   **defaults.get(args.command, {})}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(section) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        sub.set_defaults(**section)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
