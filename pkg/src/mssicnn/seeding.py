"""Derive independent, labelled sub-seeds from one base seed."""

import hashlib

import numpy as np


def derive_seed(seed, label):
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed, label):
    return np.random.default_rng(derive_seed(seed, label))
