"""Numeric primitives: radix-2 FFT, a direct DFT reference and vector helpers.

All functions are pure. The transforms accept a batch of series stacked along
leading axes; the transform always runs over the last axis.
"""

from functools import lru_cache

import numpy as np

from ._validation import check_series, is_power_of_two


@lru_cache(maxsize=32)
def _dft_matrix(n):
    k = np.arange(n)
    # reduce n*k modulo n before scaling so large products keep full precision
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n)


def naive_dft(x):
    """Direct O(N^2) evaluation of ``X[k] = sum_n x[n] exp(-2j pi n k / N)``.

    Used as the reference for :func:`fft_radix2`; works for any length.
    """
    x = check_series(x, "x", allow_batch=True)
    return x @ _dft_matrix(x.shape[-1]).T


@lru_cache(maxsize=32)
def _bit_reversal(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=32)
def _twiddles(size):
    half = size // 2
    return np.exp(-2j * np.pi * np.arange(half) / size)


def fft_radix2(x):
    """Iterative decimation-in-time radix-2 FFT.

    Parameters
    ----------
    x : array_like
        Real samples, length ``2**m`` with ``m >= 1`` along the last axis.

    Returns
    -------
    ndarray of complex128, same shape as ``x``.
    """
    x = check_series(x, "x", allow_batch=True)
    n = x.shape[-1]
    if n < 2 or not is_power_of_two(n):
        raise ValueError("length must be a power of two")
    lead = x.shape[:-1]
    a = x[..., _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        a = a.reshape(lead + (n // size, size))
        even = a[..., :half]
        odd = a[..., half:] * _twiddles(size)
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(lead + (n,))


def magnitude_spectrum(x):
    """One-sided magnitude ``|X[k]|`` for ``k < N/2``."""
    spec = fft_radix2(x)
    n = spec.shape[-1]
    return np.abs(spec[..., : n // 2])


def remove_mean(x):
    x = check_series(x, "x")
    return x - x.mean()


def minmax_normalize(v):
    """Scale ``v`` onto ``[0, 1]``; a constant vector maps to all zeros."""
    v = check_series(v, "v")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def align_to_length(v, length):
    """Stretch ``v`` to ``length`` by proportional element duplication.

    Element ``j`` of the output is ``v[floor(j * l / length)]`` where ``l`` is
    the input length, so order is kept and every input element survives.
    """
    v = check_series(v, "v")
    if isinstance(length, bool) or int(length) != length or length < 1:
        raise ValueError(f"target length must be a positive integer, got {length!r}")
    length = int(length)
    l = v.shape[0]
    if l > length:
        raise ValueError("cannot shrink by alignment")
    return v[(np.arange(length) * l) // length]
