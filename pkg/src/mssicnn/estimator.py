"""scikit-learn wrapper around the CNN training pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted

from .features import MSSI_SIZE, as_image_stack
from .pipeline import LabeledDataset, TrainConfig, network_input, train


class MssiCnnClassifier(ClassifierMixin, BaseEstimator):
    """CNN classifier over MSSI images.

    ``X`` may be ``(n, 1792)`` flattened features, as produced by
    :class:`~mssicnn.features.MssiTransformer`, or ``(n, 32, 56)`` images.
    Defaults reproduce the reference training schedule (20 epochs, batches of
    10, Adam at 1e-3, L2 weight penalty 1e-4, dropout 0.5).

    Attributes
    ----------
    classes_ : ndarray
        Sorted distinct training labels.
    model_ : CnnModel
    history_ : list of dict
        Per-epoch loss and training accuracy.
    """

    def __init__(self, epochs=20, batch_size=10, learning_rate=1e-3, weight_decay=1e-4,
                 dropout=0.5, random_state=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.random_state = random_state

    def fit(self, X, y):
        images = as_image_stack(X)
        y = np.asarray(y)
        if y.shape[0] != images.shape[0]:
            raise ValueError(f"X has {images.shape[0]} samples but y has {y.shape[0]}")
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes to fit")
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            dropout=self.dropout,
            seed=int(self.random_state or 0),
        )
        ds = LabeledDataset(images, encoded, [str(c) for c in self.classes_])
        self.model_, self.history_ = train(ds, cfg)
        self.n_features_in_ = MSSI_SIZE
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        x = network_input(X)
        out = [self.model_.forward(x[i : i + 50]) for i in range(0, len(x), 50)]
        return np.concatenate(out).astype(np.float64)

    def predict_proba(self, X):
        from .nn import softmax

        return softmax(self.decision_function(X))

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
