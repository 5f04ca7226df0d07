"""Stratified fold assignment and deterministic seed derivation."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k: int
    fold_of_row: np.ndarray
    seed: int

    def __post_init__(self):
        f = np.asarray(self.fold_of_row, dtype=np.int64)
        f.setflags(write=False)
        object.__setattr__(self, "fold_of_row", f)

    @property
    def n_rows(self) -> int:
        return self.fold_of_row.size

    def folds(self):
        """Yield ``(train_rows, test_rows)`` in canonical order.

        Canonical order sorts folds by their smallest row index, so renaming
        fold labels changes neither the order nor the derived seeds.
        """
        for f in self.canonical_labels():
            test = np.flatnonzero(self.fold_of_row == f)
            train = np.flatnonzero(self.fold_of_row != f)
            yield train, test

    def canonical_labels(self) -> list[int]:
        labels = np.unique(self.fold_of_row)
        first = [int(np.flatnonzero(self.fold_of_row == f)[0]) for f in labels]
        return [int(labels[i]) for i in np.argsort(first)]

    def digest(self) -> str:
        return hashlib.blake2b(self.fold_of_row.tobytes(), digest_size=16).hexdigest()

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "fold_of_row": self.fold_of_row.tolist()}


def stratified_kfold(target, k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle within each class, then round-robin fold assignment.

    Negatives continue the round-robin where positives stopped, which keeps
    fold sizes within one of each other as well.
    """
    y = np.asarray(target).ravel()
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    fold = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in (1, 0):
        idx = np.flatnonzero(y == c)
        if idx.size < k:
            raise ValueError(f"class {c} has {idx.size} members, fewer than k={k}")
        idx = idx[rng.permutation(idx.size)]
        fold[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return FoldAssignment(k=k, fold_of_row=fold, seed=seed)


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])
