"""Command-line interface: ``mssicnn {synth,featurize,train,eval,trials,predict}``."""

import argparse
import json
import logging
import os
import sys
from collections import Counter
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import fileio
from .features import FeatureConfig, Signal, featurize_dataset
from .pipeline import LabeledDataset, TrainConfig, evaluate, predict, run_trials, train
from .synth import CLASSES, SynthSpec, synth_bearing_signal
from .seeding import derive_seed

logger = logging.getLogger("mssicnn")

FEATURES_FILE = "features.mssi"
MODEL_FILE = "model.msdn"
HISTORY_FILE = "history.csv"
CONFUSION_FILE = "confusion.json"
REPORT_FILE = "report.json"


class CliError(Exception):
    pass


class _Outputs:
    """Track written files so a failed command leaves nothing behind."""

    def __init__(self):
        self.paths = []

    def write(self, path, data):
        fileio.atomic_write(path, data)
        self.paths.append(Path(path))
        return path

    def remove_all(self):
        for p in self.paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _class_list(text):
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in tokens if t not in CLASSES]
    if bad or not tokens:
        raise argparse.ArgumentTypeError(f"unknown class token(s) {bad}; choose from {','.join(CLASSES)}")
    return tokens


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    return out


def _feature_config(args):
    return FeatureConfig(m_min=args.m_min, m_max=args.m_max, seg_len=args.seg_len)


def _train_config(args):
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        split_ratio=getattr(args, "split_ratio", 0.7),
        seed=args.seed,
    )


def _load_dataset(path):
    images, labels, names = fileio.read_feature_cache(path)
    return LabeledDataset(images, labels, names)


def _echo(args, text):
    if not args.json:
        print(text, flush=True)


def cmd_synth(args, outputs):
    out = _out_dir(args)
    ext = ".txt" if args.format == "text" else ".f64"
    duration = args.segments * args.seg_len / args.sampling_rate
    records = []
    for cls in args.classes:
        files = []
        for i in range(args.per_class):
            spec = SynthSpec(
                cls,
                sampling_rate=args.sampling_rate,
                shaft_hz=args.shaft_hz,
                duration=duration,
                snr_db=args.snr_db,
                seed=derive_seed(args.seed, f"synth/{cls}/{i}"),
            )
            sig = synth_bearing_signal(spec)
            name = f"{cls}_{i:03d}{ext}"
            outputs.write(out / name, fileio.encode_signal(sig.samples, args.format))
            records.append(fileio.ManifestRecord(name, args.format, args.sampling_rate, cls, f"{cls}_{i:03d}"))
            files.append(name)
        _echo(args, f"{cls}: {' '.join(files)}")
    manifest = outputs.write(out / "manifest.json", fileio.manifest_json(records))
    _echo(args, f"wrote {len(records)} signals and {manifest}")
    return {"manifest": str(manifest), "signals": [r.path for r in records]}


def cmd_featurize(args, outputs):
    cfg = _feature_config(args)
    signals = fileio.load_signals(args.manifest)
    images = featurize_dataset(signals, cfg)
    # a cache may hold a single class; the two-class minimum applies at training time
    names = args.classes if args.classes else sorted({str(im.label) for im in images})
    index = {name: i for i, name in enumerate(names)}
    unknown = sorted({str(im.label) for im in images} - set(index))
    if unknown:
        raise CliError(f"label(s) {unknown} not among --classes {names}")
    labels = np.array([index[str(im.label)] for im in images], dtype=np.int64)
    pixels = np.stack([im.pixels for im in images]) if images else np.empty((0, 1792))
    out = _out_dir(args)
    path = out / FEATURES_FILE
    outputs.write(path, fileio.encode_feature_cache(pixels, labels))
    outputs.write(fileio.classes_path(path), json.dumps(names) + "\n")
    hist = dict(zip(names, np.bincount(labels, minlength=len(names)).tolist()))
    _echo(args, f"seg_len {cfg.seg_len}, m {cfg.m_min}..{cfg.m_max}")
    _echo(args, f"{len(labels)} images -> {path}")
    for name, count in hist.items():
        _echo(args, f"  {name}: {count}")
    return {"cache": str(path), "count": len(labels), "seg_len": cfg.seg_len, "histogram": hist}


def cmd_train(args, outputs):
    cfg = _train_config(args)
    ds = _load_dataset(args.features)
    test = _load_dataset(args.test_features) if args.test_features else None
    if test is not None and test.class_names != ds.class_names:
        raise CliError("training and test caches have different class lists")
    model, history = train(ds, cfg, test)
    out = _out_dir(args)
    model_path = out / MODEL_FILE
    outputs.write(model_path, fileio.encode_model(model))
    outputs.write(fileio.classes_path(model_path), json.dumps(ds.class_names) + "\n")
    outputs.write(out / HISTORY_FILE, fileio.history_csv(history))
    last = history[-1]
    _echo(args, f"trained {cfg.epochs} epochs on {len(ds)} images: loss {last['mean_loss']:.4f}, "
                f"train accuracy {last['train_accuracy']:.4f}")
    _echo(args, f"model -> {model_path}")
    return {"model": str(model_path), "history": str(out / HISTORY_FILE), "final": last}


def cmd_eval(args, outputs):
    model = fileio.load_model(args.model)
    ds = _load_dataset(args.features)
    if model.n_classes != ds.n_classes:
        raise CliError(f"model has {model.n_classes} classes but {args.features} has {ds.n_classes}")
    acc, cm = evaluate(model, ds)
    out = _out_dir(args)
    doc = {"accuracy": acc, "confusion": cm.tolist(), "class_names": ds.class_names}
    outputs.write(out / CONFUSION_FILE, json.dumps(doc, indent=2) + "\n")
    _echo(args, f"accuracy {acc:.4f} on {len(ds)} images")
    return doc


def cmd_trials(args, outputs):
    cfg = _train_config(args)
    ds = _load_dataset(args.features)
    report = run_trials(ds, cfg, n_trials=args.n_trials)
    out = _out_dir(args)
    outputs.write(out / REPORT_FILE, fileio.report_json(report))
    _echo(args, f"mean accuracy {report.mean_accuracy:.4f}, std {report.std_deviation:.4f} "
                f"over {len(report.per_trial_accuracy)} trials -> {out / REPORT_FILE}")
    return report.to_dict()


def cmd_predict(args, outputs):
    model = fileio.load_model(args.model)
    samples = fileio.read_signal_file(args.signal, args.format)
    signal = Signal(samples, args.sampling_rate, source_id=str(args.signal))
    names_file = Path(args.classes_file) if args.classes_file else fileio.classes_path(args.model)
    names = json.loads(names_file.read_text()) if names_file.exists() else [str(i) for i in range(model.n_classes)]
    if len(names) != model.n_classes:
        raise CliError(f"{names_file} lists {len(names)} classes but the model has {model.n_classes}")
    rows = []
    for idx, cls, probs in predict(model, signal, _feature_config(args)):
        rows.append({"segment": idx, "class": names[cls], "probabilities": [float(p) for p in probs]})
        _echo(args, f"{idx}\t{names[cls]}\t" + " ".join(f"{p:.4f}" for p in probs))
    return {"classes": names, "segments": rows}


def _add_feature_flags(p, seg_len=2048):
    p.add_argument("--seg-len", type=int, default=seg_len, help="segment length in samples")
    p.add_argument("--m-min", type=int, default=3)
    p.add_argument("--m-max", type=int, default=9)


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--dropout", type=float, default=0.5)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed for all randomness")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--json", action="store_true", help="print a machine-readable JSON result")
    common.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="mssicnn", description="Synthesize, featurize, train, evaluate and predict bearing health states."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write synthetic signals and a manifest")
    p.add_argument("--classes", type=_class_list, default=list(CLASSES))
    p.add_argument("--per-class", type=int, default=4)
    p.add_argument("--segments", type=int, default=10, help="segments per signal")
    p.add_argument("--seg-len", type=int, default=8192)
    p.add_argument("--sampling-rate", type=float, default=20_000.0)
    p.add_argument("--shaft-hz", type=float, default=18.0)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--format", choices=fileio.SIGNAL_FORMATS, default="f64le")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", parents=[common], help="build the MSSI feature cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", type=lambda s: [t.strip() for t in s.split(",") if t.strip()], default=None,
                   help="comma-separated class order (default: sorted labels)")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="train a model on a feature cache")
    p.add_argument("--features", required=True)
    p.add_argument("--test-features", default=None, help="cache used for the test-accuracy curve")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a model on a feature cache")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trials", parents=[common], help="run the repeated split/train/test protocol")
    p.add_argument("--features", required=True)
    p.add_argument("--n-trials", type=int, default=10)
    p.add_argument("--split-ratio", type=float, default=0.7)
    _add_train_flags(p)
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("predict", parents=[common], help="classify each segment of a signal file")
    p.add_argument("--model", required=True)
    p.add_argument("--signal", required=True)
    p.add_argument("--format", choices=fileio.SIGNAL_FORMATS, default="text")
    p.add_argument("--sampling-rate", type=float, required=True)
    p.add_argument("--classes-file", default=None)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_predict)
    return parser


def _thread_limit(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    outputs = _Outputs()
    try:
        with _thread_limit(args.threads):
            result = args.func(args, outputs)
    except (CliError, ValueError, OSError) as exc:
        outputs.remove_all()
        if args.json:
            print(json.dumps({"error": str(exc)}), file=sys.stderr)
        else:
            print(f"mssicnn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        outputs.remove_all()
        raise
    if args.json:
        print(json.dumps(result, default=_jsonable))
    return 0


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


if __name__ == "__main__":
    sys.exit(main())
