"""The two-convolution, two-dense-layer classifier and its gradient check."""

import numpy as np

from . import functional as F

PARAM_ORDER = (
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
)
WEIGHT_NAMES = ("conv1.weight", "conv2.weight", "fc1.weight", "fc2.weight")


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class CnnModel:
    """Conv(16) -> ReLU -> Pool -> Conv(32) -> ReLU -> Pool -> FC(256, ReLU) -> Dropout -> FC(C).

    Parameters
    ----------
    n_classes : int
        Number of output logits, at least 2.
    input_size : int
        Side of the square single-channel input; must be divisible by 4.
        128 for the full network, smaller values give cheap variants for
        gradient checks.
    dropout_rate : float
    dtype : numpy dtype
        Parameter and activation precision.
    rng : numpy.random.Generator, optional
        Source for Glorot-uniform weight initialisation; biases start at zero.
    """

    conv1_filters = 16
    conv2_filters = 32
    hidden = 256

    def __init__(self, n_classes=10, input_size=128, dropout_rate=0.5, dtype=np.float32, rng=None):
        if n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if input_size < 4 or input_size % 4:
            raise ValueError("input_size must be a positive multiple of 4")
        self.n_classes = int(n_classes)
        self.input_size = int(input_size)
        self.dropout_rate = dropout_rate
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(0) if rng is None else rng
        c1, c2, hid = self.conv1_filters, self.conv2_filters, self.hidden
        flat = self.flat_features
        self.params = {
            "conv1.weight": _glorot(rng, (c1, 1, 3, 3), 9, 9 * c1, self.dtype),
            "conv1.bias": np.zeros(c1, self.dtype),
            "conv2.weight": _glorot(rng, (c2, c1, 3, 3), 9 * c1, 9 * c2, self.dtype),
            "conv2.bias": np.zeros(c2, self.dtype),
            "fc1.weight": _glorot(rng, (hid, flat), flat, hid, self.dtype),
            "fc1.bias": np.zeros(hid, self.dtype),
            "fc2.weight": _glorot(rng, (n_classes, hid), hid, n_classes, self.dtype),
            "fc2.bias": np.zeros(n_classes, self.dtype),
        }
        self._cache = None
        self._check_shape_chain()

    @property
    def flat_features(self):
        return (self.input_size // 4) ** 2 * self.conv2_filters

    def layer_shapes(self):
        s = self.input_size
        return [
            ("input", (s, s, 1)),
            ("conv1", (s, s, self.conv1_filters)),
            ("pool1", (s // 2, s // 2, self.conv1_filters)),
            ("conv2", (s // 2, s // 2, self.conv2_filters)),
            ("pool2", (s // 4, s // 4, self.conv2_filters)),
            ("fc1", (self.hidden,)),
            ("fc2", (self.n_classes,)),
        ]

    def _check_shape_chain(self):
        x = np.zeros((1, self.input_size, self.input_size, 1), self.dtype)
        _, shapes = self._forward(x, training=False, rng=None, record=True)
        expected = [shape for _, shape in self.layer_shapes()[1:]]
        if shapes != expected:
            raise AssertionError(f"layer shape chain {shapes} != {expected}")

    @property
    def weights(self):
        return [self.params[k] for k in WEIGHT_NAMES]

    def astype(self, dtype):
        other = object.__new__(CnnModel)
        other.__dict__.update(self.__dict__)
        other.dtype = np.dtype(dtype)
        other.params = {k: v.astype(dtype) for k, v in self.params.items()}
        other._cache = None
        return other

    def _as_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        s = self.input_size
        if x.shape in ((s, s), (s, s, 1)):
            x = x.reshape(1, s, s, 1)
        elif x.ndim == 3 and x.shape[1:] == (s, s):
            x = x[..., None]
        if x.ndim != 4 or x.shape[1:] != (s, s, 1):
            raise ValueError(f"input must be ({s}, {s}, 1) or a batch of those, got {np.shape(x)}")
        return x

    def _forward(self, x, training, rng, record=False):
        p = self.params
        # ReLU and max pooling commute; pooling first halves the work
        z1, c1 = F.conv2d_forward(x, p["conv1.weight"], p["conv1.bias"])
        m1, i1 = F.maxpool_forward(z1)
        h1 = F.relu(m1)
        z2, c2 = F.conv2d_forward(h1, p["conv2.weight"], p["conv2.bias"])
        m2, i2 = F.maxpool_forward(z2)
        h2 = F.relu(m2)
        flat = h2.reshape(h2.shape[0], -1)
        z3 = F.fc_forward(flat, p["fc1.weight"], p["fc1.bias"])
        a3 = F.relu(z3)
        d3, mask = F.dropout(a3, self.dropout_rate, training, rng)
        logits = F.fc_forward(d3, p["fc2.weight"], p["fc2.bias"])
        rate = self.dropout_rate if training else 0.0
        self._cache = (c1, m1, i1, c2, m2, i2, flat, z3, d3, mask, rate)
        if record:
            shapes = [z1.shape[1:], m1.shape[1:], z2.shape[1:], m2.shape[1:], z3.shape[1:], logits.shape[1:]]
            return logits, shapes
        return logits

    def forward(self, x, training=False, rng=None):
        """Logits for one ``(S, S[, 1])`` image or a batch ``(N, S, S[, 1])``."""
        s = self.input_size
        single = np.shape(x) in ((s, s), (s, s, 1))
        logits = self._forward(self._as_input(x), training, rng)
        return logits[0] if single else logits

    def backward(self, grad_logits):
        """Parameter gradients of the most recent forward pass (data term only)."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        c1, m1, i1, c2, m2, i2, flat, z3, d3, mask, rate = self._cache
        p = self.params
        g = np.atleast_2d(grad_logits).astype(self.dtype)
        grads = {}
        g, grads["fc2.weight"], grads["fc2.bias"] = F.fc_backward(g, d3, p["fc2.weight"])
        if rate:
            g = F.dropout_backward(g, mask, rate)
        g = F.relu_backward(g, z3)
        g, grads["fc1.weight"], grads["fc1.bias"] = F.fc_backward(g, flat, p["fc1.weight"])
        g = F.relu_backward(g.reshape(m2.shape), m2)
        g = F.maxpool_backward(g, i2)
        g, grads["conv2.weight"], grads["conv2.bias"] = F.conv2d_backward(g, c2)
        g = F.relu_backward(g, m1)
        g = F.maxpool_backward(g, i1)
        _, grads["conv1.weight"], grads["conv1.bias"] = F.conv2d_backward(g, c1, need_input_grad=False)
        return {k: grads[k] for k in PARAM_ORDER}

    def loss(self, x, labels, weight_decay=0.0, training=False, rng=None):
        logits = self.forward(x, training, rng)
        return F.loss_ce_l2(logits, labels, weight_decay, self.weights)[0]

    def loss_and_grads(self, x, labels, weight_decay=0.0, training=True, rng=None):
        """Batch-mean loss and gradients including the L2 weight penalty."""
        x = self._as_input(x)
        logits = self._forward(x, training, rng)
        loss, g_logits = F.loss_ce_l2(logits, labels, weight_decay, self.weights)
        grads = self.backward(g_logits)
        if weight_decay:
            coef = self.dtype.type(2 * weight_decay)
            for k in WEIGHT_NAMES:
                g = grads[k]
                # in place: fc1 has millions of entries
                g += np.multiply(self.params[k], coef, out=np.empty_like(g))
        return loss, grads, logits

    def predict_proba(self, x, batch_size=32):
        x = self._as_input(x)
        out = [F.softmax(self._forward(x[i : i + batch_size], False, None)) for i in range(0, len(x), batch_size)]
        self._cache = None
        return np.concatenate(out) if out else np.empty((0, self.n_classes))


def _activation_pattern(model):
    """Pool winners and ReLU signs of the most recent forward pass."""
    c1, m1, i1, c2, m2, i2, flat, z3, d3, mask, rate = model._cache
    return (i1, m1 > 0, i2, m2 > 0, z3 > 0)


def _same_pattern(a, b):
    return all(np.array_equal(u, v) for u, v in zip(a, b))


def grad_check(model, x, label, eps=1e-5, weight_decay=0.0, n_samples=100, rng=None, return_skipped=False):
    """Worst relative error between backprop and central differences.

    The model is evaluated in float64 and eval mode (dropout off). Up to
    ``n_samples`` coordinates of every parameter tensor are checked.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``. The floor,
    ``1e4 * u * max(|L|, 1) / eps`` with ``u`` the float64 unit roundoff and
    ``L`` the loss, is the gradient size at which rounding in the difference
    quotient alone reaches 1e-4 relative; smaller gradients are compared on
    that absolute scale (about 5e-7 for a loss near 2 at ``eps = 1e-5``).

    A coordinate whose ``+eps`` or ``-eps`` evaluation changes a ReLU sign
    or a max-pool winner straddles a kink, where the difference quotient is
    not an estimate of the derivative; such coordinates are excluded and
    counted. With ``return_skipped`` the result is ``(worst, n_skipped)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    m = model.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    labels = np.atleast_1d(label)
    loss, analytic, _ = m.loss_and_grads(x, labels, weight_decay, training=False)
    base = _activation_pattern(m)
    floor = 1e4 * np.finfo(np.float64).eps * max(abs(loss), 1.0) / eps
    worst, skipped = 0.0, 0
    for name in PARAM_ORDER:
        p = m.params[name]
        flat = p.reshape(-1)
        k = min(n_samples, flat.size)
        idx = rng.choice(flat.size, size=k, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            plus = m.loss(x, labels, weight_decay)
            smooth = _same_pattern(base, _activation_pattern(m))
            flat[i] = orig - eps
            minus = m.loss(x, labels, weight_decay)
            smooth = smooth and _same_pattern(base, _activation_pattern(m))
            flat[i] = orig
            if not smooth:
                skipped += 1
                continue
            numeric = (plus - minus) / (2 * eps)
            a = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), floor))
    return (worst, skipped) if return_skipped else worst
