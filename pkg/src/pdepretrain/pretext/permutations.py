"""Permutation utilities for the shuffling pretext tasks."""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


def hamming_distance(perm) -> int:
    """Number of positions not fixed by ``perm``."""
    perm = np.asarray(perm)
    return int(np.count_nonzero(perm != np.arange(len(perm))))


def is_permutation(perm) -> bool:
    perm = np.asarray(perm)
    return perm.ndim == 1 and np.array_equal(np.sort(perm), np.arange(len(perm)))


def invert(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


@lru_cache(maxsize=None)
def lexicographic_permutations(n: int) -> tuple[tuple[int, ...], ...]:
    # itertools emits permutations of a sorted input in lexicographic order
    return tuple(itertools.permutations(range(n)))


def permutation_index(perm, n: int | None = None) -> int:
    perm = tuple(int(p) for p in perm)
    return lexicographic_permutations(n or len(perm)).index(perm)


@lru_cache(maxsize=None)
def _bank(n_patches: int, k: int) -> tuple[tuple[int, ...], ...]:
    perms = lexicographic_permutations(n_patches)
    # stable sort keeps lexicographic order inside each distance class
    ranked = sorted(perms, key=lambda p: -hamming_distance(p))
    return tuple(ranked[:k])


def jigsaw_bank(n_patches: int = 8, k: int = 1000) -> np.ndarray:
    """The ``k`` permutations farthest from the identity in Hamming distance.

    Ties are broken lexicographically, so the bank depends only on its
    arguments. Returned as an int array of shape ``[k, n_patches]``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if k > math.factorial(n_patches):
        raise ValueError(f"k={k} exceeds {n_patches}! = {math.factorial(n_patches)} permutations")
    return np.array(_bank(n_patches, k), dtype=np.int64)
