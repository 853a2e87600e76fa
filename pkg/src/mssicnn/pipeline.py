"""Training and evaluation protocol: stratified split, mini-batch Adam
training, repeated trials and segment-level prediction."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.metrics import confusion_matrix

from .features import MSSI_SHAPE, FeatureConfig, as_image_stack, build_mssi, segment_signal, upscale_nearest
from .nn import Adam, CnnModel
from .nn.functional import softmax
from .seeding import make_rng

logger = logging.getLogger(__name__)


@dataclass
class LabeledDataset:
    """MSSI images with integer labels indexing ``class_names``."""

    images: np.ndarray
    labels: np.ndarray
    class_names: list

    def __post_init__(self):
        self.images = as_image_stack(self.images).astype(np.float32, copy=False)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.class_names = [str(c) for c in self.class_names]
        if len(self.class_names) < 2:
            raise ValueError("a dataset needs at least 2 classes")
        if self.labels.shape[0] != self.images.shape[0]:
            raise ValueError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    @classmethod
    def from_images(cls, images, class_names=None):
        """Build from :class:`~mssicnn.features.MssiImage` items with string labels.

        Without ``class_names`` the sorted distinct labels define the class order.
        """
        names = list(class_names) if class_names is not None else sorted({str(im.label) for im in images})
        index = {name: i for i, name in enumerate(names)}
        try:
            labels = [index[str(im.label)] for im in images]
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} is not among the classes {names}") from None
        pixels = np.stack([im.pixels for im in images]) if images else np.empty((0,) + MSSI_SHAPE)
        return cls(pixels, labels, names)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_classes(self):
        return len(self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx):
        return LabeledDataset(self.images[idx], self.labels[idx], self.class_names)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 10
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    dropout: float = 0.5
    split_ratio: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie strictly between 0 and 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def with_seed(self, seed):
        return TrainConfig(**{**asdict(self), "seed": seed})


@dataclass
class TrialReport:
    per_trial_accuracy: list
    mean_accuracy: float
    std_deviation: float
    confusion_matrix: np.ndarray
    class_names: list
    per_class_accuracy: list = field(default_factory=list)

    @classmethod
    def from_trials(cls, accuracies, confusions, class_names):
        acc = np.asarray(accuracies, dtype=np.float64)
        pooled = np.sum(confusions, axis=0).astype(np.int64)
        totals = pooled.sum(axis=1)
        per_class = [float(pooled[i, i] / t) if t else float("nan") for i, t in enumerate(totals)]
        return cls(
            per_trial_accuracy=[float(a) for a in acc],
            mean_accuracy=float(acc.mean()),
            std_deviation=float(acc.std()),  # population std
            confusion_matrix=pooled,
            class_names=list(class_names),
            per_class_accuracy=per_class,
        )

    def to_dict(self):
        return {
            "per_trial": self.per_trial_accuracy,
            "mean": self.mean_accuracy,
            "std": self.std_deviation,
            "confusion": self.confusion_matrix.tolist(),
            "class_names": self.class_names,
            "per_class_accuracy": self.per_class_accuracy,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            per_trial_accuracy=list(d["per_trial"]),
            mean_accuracy=d["mean"],
            std_deviation=d["std"],
            confusion_matrix=np.asarray(d["confusion"], dtype=np.int64),
            class_names=list(d["class_names"]),
            per_class_accuracy=list(d.get("per_class_accuracy", [])),
        )


def split_dataset(ds, ratio=0.7, seed=0):
    """Stratified random split.

    Each class contributes ``floor(ratio * n_c)`` items to the training set,
    capped so that at least one item per class is held out.
    """
    if not 0 < ratio < 1:
        raise ValueError("split ratio must lie strictly between 0 and 1")
    rng = make_rng(seed, "split")
    train_idx, test_idx = [], []
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size < 2:
            raise ValueError(f"class {ds.class_names[c]!r} has {idx.size} items; at least 2 are needed to split")
        perm = rng.permutation(idx)
        k = min(math.floor(ratio * idx.size + 1e-9), idx.size - 1)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def network_input(images):
    """Upscale ``(n, 32, 56)`` MSSI images to the ``(n, 128, 128, 1)`` network input."""
    return upscale_nearest(as_image_stack(images)).astype(np.float32)[..., None]


def _predict_logits(model, x, batch_size=50):
    out = [model.forward(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.empty((0, model.n_classes), model.dtype)


def predict_classes(model, images):
    """Arg-max class per image; ties resolve to the lowest index."""
    if len(images) == 0:
        return np.empty(0, dtype=np.int64)
    return _predict_logits(model, network_input(images)).argmax(axis=1)


def train(ds_train, cfg=TrainConfig(), ds_test=None):
    """Fit a fresh network on ``ds_train``.

    Returns ``(model, history)``. ``history`` has one dict per epoch with
    ``epoch``, ``mean_loss`` (cross-entropy plus L2, averaged over samples),
    ``train_accuracy`` (from the dropout-mode forward passes) and
    ``test_accuracy`` (``None`` unless ``ds_test`` is given).
    """
    if len(ds_train) == 0:
        raise ValueError("training set is empty")
    model = CnnModel(
        n_classes=ds_train.n_classes,
        dropout_rate=cfg.dropout,
        rng=make_rng(cfg.seed, "init"),
    )
    opt = Adam(model.params, lr=cfg.learning_rate)
    shuffle_rng = make_rng(cfg.seed, "shuffle")
    dropout_rng = make_rng(cfg.seed, "dropout")
    x = network_input(ds_train.images)
    y = ds_train.labels
    n = len(y)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads, logits = model.loss_and_grads(
                x[batch], y[batch], cfg.weight_decay, training=True, rng=dropout_rng
            )
            opt.step(grads)
            loss_sum += loss * len(batch)
            correct += int(np.sum(logits.argmax(axis=1) == y[batch]))
        record = {
            "epoch": epoch,
            "mean_loss": loss_sum / n,
            "train_accuracy": correct / n,
            "test_accuracy": evaluate(model, ds_test)[0] if ds_test is not None else None,
        }
        history.append(record)
        logger.info("epoch %d loss %.4f train_acc %.4f test_acc %s", epoch, record["mean_loss"],
                    record["train_accuracy"], record["test_accuracy"])
    model._cache = None
    return model, history


def evaluate(model, ds_test):
    """Eval-mode accuracy and ``C x C`` confusion matrix (rows are true classes)."""
    if model.n_classes != ds_test.n_classes:
        raise ValueError(f"model has {model.n_classes} classes but the dataset has {ds_test.n_classes}")
    if len(ds_test) == 0:
        raise ValueError("test set is empty")
    pred = predict_classes(model, ds_test.images)
    cm = confusion_matrix(ds_test.labels, pred, labels=np.arange(model.n_classes))
    return float(np.mean(pred == ds_test.labels)), cm


def run_trials(ds, cfg=TrainConfig(), n_trials=10, seeds=None):
    """Repeat split, train and test; trial ``i`` uses seed ``cfg.seed + i``
    unless explicit ``seeds`` are given."""
    if seeds is None:
        if n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        seeds = [cfg.seed + i for i in range(n_trials)]
    accuracies, confusions = [], []
    for i, seed in enumerate(seeds):
        train_ds, test_ds = split_dataset(ds, cfg.split_ratio, seed)
        model, _ = train(train_ds, cfg.with_seed(seed))
        acc, cm = evaluate(model, test_ds)
        logger.info("trial %d (seed %d): accuracy %.4f", i, seed, acc)
        accuracies.append(acc)
        confusions.append(cm)
    return TrialReport.from_trials(accuracies, confusions, ds.class_names)


def predict(model, signal, cfg=FeatureConfig()):
    """Classify every segment of ``signal``.

    Returns a list of ``(segment_index, predicted_class, probabilities)``.
    """
    segments = segment_signal(signal, cfg.seg_len)
    images = np.stack([build_mssi(seg, cfg) for seg in segments])
    logits = _predict_logits(model, network_input(images))
    probs = softmax(logits)
    return [(i, int(np.argmax(p)), p) for i, p in enumerate(probs)]


__all__ = [
    "LabeledDataset",
    "TrainConfig",
    "TrialReport",
    "evaluate",
    "network_input",
    "predict",
    "predict_classes",
    "run_trials",
    "split_dataset",
    "train",
]
