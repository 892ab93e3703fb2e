"""Datasets of design vectors, z-score normalization, and CSV I/O.

The on-disk format is a plain CSV with header columns x0..x{d-1} and an
optional trailing reward column. Floats are written with %.17g so values
round-trip exactly through the file.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from rddkit.exceptions import DataError

STD_FLOOR = 1e-8


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass
class Dataset:
    X: np.ndarray
    rewards: np.ndarray = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def normalize(dataset):
    """Per-column z-score. Returns (normalized dataset, stats).

    Constant columns get their std floored at 1e-8 (with a warning) so the
    transform never divides by zero; denormalize still inverts exactly.
    """
    X = np.asarray(dataset.X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("normalization needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std < STD_FLOOR
    if np.any(degenerate):
        warnings.warn(
            f"{int(degenerate.sum())} constant column(s); std floored at {STD_FLOOR:g}"
        )
        std = np.where(degenerate, STD_FLOOR, std)
    Z = (X - mean) / std
    return Dataset(X=Z, rewards=dataset.rewards), NormStats(mean=mean, std=std)


def denormalize(x, stats):
    """Map z-score coordinates back to physical coordinates."""
    return np.asarray(x) * stats.std + stats.mean


def load_dataset(path):
    """Parse a design CSV; raises DataError with a line number on bad input."""
    with open(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    has_reward = header[-1] == "reward"
    d = len(header) - 1 if has_reward else len(header)
    expected = [f"x{i}" for i in range(d)] + (["reward"] if has_reward else [])
    if header != expected:
        raise DataError(f"{path}: line 1: bad header, expected x0..x{d - 1}" +
                        (",reward" if has_reward else ""))
    n_cols = len(header)
    rows = np.empty((len(lines) - 1, n_cols), dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DataError(f"{path}: line {i}: expected {n_cols} columns, got {len(parts)}")
        try:
            rows[i - 2] = [float(p) for p in parts]
        except ValueError as e:
            raise DataError(f"{path}: line {i}: {e}") from None
    if has_reward:
        return Dataset(X=rows[:, :-1], rewards=rows[:, -1].copy())
    return Dataset(X=rows, rewards=None)


def save_samples(path, designs, rewards=None):
    """Write designs (and optionally rewards) in the dataset CSV format."""
    X = np.asarray(designs, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("designs must be a 2-D array")
    d = X.shape[1]
    header = ",".join(f"x{i}" for i in range(d))
    if rewards is not None:
        rewards = np.asarray(rewards, dtype=np.float64)
        if rewards.shape[0] != X.shape[0]:
            raise ValueError("rewards length must match designs")
        header += ",reward"
    with open(path, "w") as f:
        f.write(header + "\n")
        for i in range(X.shape[0]):
            cells = [format(v, ".17g") for v in X[i]]
            if rewards is not None:
                cells.append(format(rewards[i], ".17g"))
            f.write(",".join(cells) + "\n")
