"""Upper confidence bounds on per-(agent, item) mean values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Feedback, InputError, PreconditionError

C_RAD_SCALE = 3.0


def radius(v_hat: float, n_samples: int, c_rad: float) -> float:
    """Confidence width sqrt(c_rad * v_hat / N) + c_rad / N."""
    if n_samples < 1:
        raise InputError("radius needs at least one sample")
    return math.sqrt(c_rad * v_hat / n_samples) + c_rad / n_samples


def radius_array(v_hat: np.ndarray, counts: np.ndarray, c_rad: float) -> np.ndarray:
    return np.sqrt(c_rad * v_hat / counts) + c_rad / counts


def default_c_rad(n: int, m: int, T: int) -> float:
    if min(n, m, T) < 1:
        raise InputError("n, m, T must be positive")
    return C_RAD_SCALE * max(math.log(m * n * T), 1.0)


@dataclass
class UcbState:
    counts: np.ndarray
    sums: np.ndarray
    c_rad: float
    clip: bool = True

    @classmethod
    def fresh(cls, n: int, m: int, c_rad: float, clip: bool = True) -> "UcbState":
        if c_rad <= 0:
            raise InputError("c_rad must be positive")
        return cls(np.zeros((n, m), dtype=np.int64), np.zeros((n, m)), float(c_rad), clip)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def means(self) -> np.ndarray:
        """Empirical means; NaN where a cell has no samples."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    def ucb_matrix(self) -> np.ndarray:
        if np.any(self.counts < 1):
            raise PreconditionError("every cell needs at least one sample")
        v_hat = self.sums / self.counts
        out = v_hat + radius_array(v_hat, self.counts, self.c_rad)
        return np.minimum(out, 1.0) if self.clip else out

    def copy(self) -> "UcbState":
        return UcbState(self.counts.copy(), self.sums.copy(), self.c_rad, self.clip)


def ucb_value(state: UcbState, i: int, e: int) -> float:
    n = int(state.counts[i, e])
    if n < 1:
        raise PreconditionError(f"cell ({i}, {e}) has no samples")
    v_hat = state.sums[i, e] / n
    out = v_hat + radius(v_hat, n, state.c_rad)
    return min(out, 1.0) if state.clip else out


def update(state: UcbState, fb: Feedback) -> UcbState:
    """Fold feedback into the counters in place and return the state."""
    for i, e, v in fb:
        if not 0.0 <= v <= 1.0:
            raise InputError(f"observed value {v} for ({i}, {e}) outside [0, 1]")
    for i, e, v in fb:
        state.counts[i, e] += 1
        state.sums[i, e] += v
    return state


def clean_cells(state: UcbState, true_means: np.ndarray) -> np.ndarray:
    """Per-cell clean flags; cells without samples count as clean."""
    sampled = state.counts > 0
    safe = np.maximum(state.counts, 1)
    v_hat = state.sums / safe
    ok = np.abs(true_means - v_hat) <= radius_array(v_hat, safe, state.c_rad)
    return ok | ~sampled


def is_clean(state: UcbState, true_means) -> bool:
    true_means = np.asarray(true_means, dtype=float)
    if true_means.shape != state.shape:
        raise InputError(f"means shape {true_means.shape} != state shape {state.shape}")
    if np.any(state.counts < 1):
        raise PreconditionError("is_clean needs every cell sampled")
    return bool(np.all(clean_cells(state, true_means)))
