import numpy as np


class Adam:
    """Adam with bias-corrected moments.

    Parameters and gradients are dicts of arrays keyed by name; parameters are
    updated in place.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self._tmp = {k: np.empty_like(p) for k, p in params.items()}

    def step(self, grads):
        if grads.keys() != self.params.keys():
            raise ValueError("gradient keys do not match parameters")
        for k, g in grads.items():
            if g.shape != self.params[k].shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {self.params[k].shape}")
        self.t += 1
        bc1 = 1 - self.beta1**self.t
        bc2 = 1 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads[k]
            m, v, tmp = self.m[k], self.v[k], self._tmp[k]
            cast = p.dtype.type
            m *= cast(self.beta1)
            np.multiply(g, cast(1 - self.beta1), out=tmp)
            m += tmp
            v *= cast(self.beta2)
            np.square(g, out=tmp)
            tmp *= cast(1 - self.beta2)
            v += tmp
            np.multiply(v, cast(1 / bc2), out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += cast(self.eps)
            np.divide(m, tmp, out=tmp)
            tmp *= cast(self.lr / bc1)
            p -= tmp
