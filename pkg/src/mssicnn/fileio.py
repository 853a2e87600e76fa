"""On-disk formats: signal files, dataset manifests, the MSSI feature cache,
model files, trial reports and training-history CSV.

Binary layouts (all little-endian):

feature cache
    ``b"MSSI"``, version u32, count u32, then per image a label u32 followed
    by 1792 float32 pixels (row-major 32 x 56).
model
    ``b"MSDN"``, version u32, class count u32, then for each parameter tensor
    in architectural order: rank u32, each dim u32, float32 values.
"""

import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import MSSI_SHAPE, MSSI_SIZE, Signal
from .nn import PARAM_ORDER, CnnModel

SIGNAL_FORMATS = ("text", "f64le")
CACHE_MAGIC = b"MSSI"
CACHE_VERSION = 1
MODEL_MAGIC = b"MSDN"
MODEL_VERSION = 1


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to ``path`` via a temporary file and rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- signals and manifests ---------------------------------------------------


def read_signal_file(path, fmt):
    if fmt == "text":
        values = np.loadtxt(path, dtype=np.float64, ndmin=1)
    elif fmt == "f64le":
        values = np.fromfile(path, dtype="<f8")
    else:
        raise ValueError(f"unknown signal format {fmt!r}; expected one of {SIGNAL_FORMATS}")
    return values


def encode_signal(samples, fmt):
    samples = np.asarray(samples, dtype=np.float64)
    if fmt == "text":
        return "".join(f"{v!r}\n" for v in samples.tolist())
    if fmt == "f64le":
        return samples.astype("<f8").tobytes()
    raise ValueError(f"unknown signal format {fmt!r}; expected one of {SIGNAL_FORMATS}")


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    format: str
    sampling_rate_hz: float
    label: str
    source_id: str

    def resolve(self, base_dir):
        p = Path(self.path)
        return p if p.is_absolute() else Path(base_dir) / p


def parse_manifest(entries):
    if not isinstance(entries, list):
        raise ValueError("manifest must be a JSON array of records")
    records = []
    for i, e in enumerate(entries):
        where = f"manifest record {i}"
        if isinstance(e, dict) and "source_id" in e:
            where += f" ({e['source_id']})"
        if not isinstance(e, dict):
            raise ValueError(f"{where}: expected an object")
        missing = [k for k in ("path", "format", "sampling_rate_hz", "label", "source_id") if k not in e]
        if missing:
            raise ValueError(f"{where}: missing field(s) {', '.join(missing)}")
        if e["format"] not in SIGNAL_FORMATS:
            raise ValueError(f"{where}: unknown format {e['format']!r}")
        rate = e["sampling_rate_hz"]
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not rate > 0:
            raise ValueError(f"{where}: sampling_rate_hz must be a positive number")
        records.append(ManifestRecord(str(e["path"]), e["format"], float(rate), str(e["label"]), str(e["source_id"])))
    return records


def load_manifest(path):
    with open(path) as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return parse_manifest(entries)


def manifest_json(records):
    return json.dumps([r.__dict__ for r in records], indent=2) + "\n"


def load_signals(manifest_path):
    """Read every signal named by a manifest; errors carry the record's source_id."""
    base = Path(manifest_path).parent
    signals = []
    for rec in load_manifest(manifest_path):
        try:
            samples = read_signal_file(rec.resolve(base), rec.format)
            signals.append(Signal(samples, rec.sampling_rate_hz, rec.label, rec.source_id))
        except (OSError, ValueError) as exc:
            raise ValueError(f"{rec.source_id}: {exc}") from None
    return signals


# -- feature cache -------------------------------------------------------------


def encode_feature_cache(images, labels):
    images = np.asarray(images, dtype="<f4").reshape(-1, MSSI_SIZE)
    labels = np.asarray(labels, dtype="<u4").reshape(-1)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label counts differ")
    body = np.empty(len(labels), dtype=[("label", "<u4"), ("pixels", "<f4", (MSSI_SIZE,))])
    body["label"] = labels
    body["pixels"] = images
    return CACHE_MAGIC + struct.pack("<II", CACHE_VERSION, len(labels)) + body.tobytes()


def decode_feature_cache(data):
    if data[:4] != CACHE_MAGIC:
        raise ValueError("not an MSSI feature cache (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported feature cache version {version}")
    rec = np.dtype([("label", "<u4"), ("pixels", "<f4", (MSSI_SIZE,))])
    expected = 12 + count * rec.itemsize
    if len(data) != expected:
        raise ValueError(f"feature cache length {len(data)} does not match {count} images")
    body = np.frombuffer(data, dtype=rec, offset=12, count=count)
    images = body["pixels"].reshape((count,) + MSSI_SHAPE).astype(np.float32)
    return images, body["label"].astype(np.int64)


def classes_path(cache_path):
    return Path(cache_path).with_suffix(".classes.json")


def write_feature_cache(path, images, labels, class_names=None):
    atomic_write(path, encode_feature_cache(images, labels))
    if class_names is not None:
        atomic_write(classes_path(path), json.dumps(list(class_names)) + "\n")


def read_feature_cache(path):
    """Return ``(images, labels, class_names)``.

    Class names come from the ``.classes.json`` sidecar when present, else
    they are the label numbers as strings.
    """
    images, labels = decode_feature_cache(Path(path).read_bytes())
    side = classes_path(path)
    if side.exists():
        names = json.loads(side.read_text())
    else:
        names = [str(i) for i in range(int(labels.max()) + 1 if labels.size else 0)]
    return images, labels, names


# -- model ---------------------------------------------------------------------


def encode_model(model):
    out = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, model.n_classes)]
    for name in PARAM_ORDER:
        p = model.params[name]
        out.append(struct.pack(f"<I{p.ndim}I", p.ndim, *p.shape))
        out.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    return b"".join(out)


def decode_model(data):
    if data[:4] != MODEL_MAGIC:
        raise ValueError("not a model file (bad magic)")
    version, n_classes = struct.unpack_from("<II", data, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model file version {version}")
    buf = io.BytesIO(data[12:])
    tensors = []
    for name in PARAM_ORDER:
        head = buf.read(4)
        if len(head) < 4:
            raise ValueError(f"model file truncated before {name}")
        (rank,) = struct.unpack("<I", head)
        shape = struct.unpack(f"<{rank}I", buf.read(4 * rank))
        size = int(np.prod(shape))
        raw = buf.read(4 * size)
        if len(raw) != 4 * size:
            raise ValueError(f"model file truncated inside {name}")
        tensors.append(np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32))
    if buf.read(1):
        raise ValueError("trailing bytes after the last parameter tensor")
    params = dict(zip(PARAM_ORDER, tensors))
    flat = params["fc1.weight"].shape[1]
    side = int(round((flat / CnnModel.conv2_filters) ** 0.5)) * 4
    model = CnnModel(n_classes=n_classes, input_size=side)
    for name, t in params.items():
        if t.shape != model.params[name].shape:
            raise ValueError(f"{name} has shape {t.shape}, expected {model.params[name].shape}")
    model.params = params
    return model


def save_model(path, model):
    atomic_write(path, encode_model(model))


def load_model(path):
    return decode_model(Path(path).read_bytes())


# -- reports -------------------------------------------------------------------


def report_json(report):
    return json.dumps(report.to_dict(), indent=2) + "\n"


def history_csv(history):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "mean_loss", "train_accuracy", "test_accuracy"])
    for h in history:
        test = "" if h["test_accuracy"] is None else repr(h["test_accuracy"])
        writer.writerow([h["epoch"], repr(h["mean_loss"]), repr(h["train_accuracy"]), test])
    return buf.getvalue()
