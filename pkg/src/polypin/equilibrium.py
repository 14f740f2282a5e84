"""Exact equilibrium of the walled pinning model by transfer-matrix dynamic programming.

The weight of a path is ``lam ** N(eta)`` with ``N`` the number of interior
zeros. ``forward[i, h]`` sums the weights of prefixes from ``(-L, 0)`` to
``(i - L, h)`` (counting the factor at ``i`` itself) and ``backward[i, h]``
sums the weights of suffixes from ``(i - L, h)`` to ``(L, 0)`` (not counting
it). Columns are renormalised as they are built and their log scales kept,
so tables stay finite for any ``L``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .lattice import LatticePath
from .observables import fourier_weights

__all__ = [
    "PartitionTable",
    "partition_table",
    "partition_function",
    "log_partition_function",
    "partition_function_exact",
    "equilibrium_sample",
    "equilibrium_samples",
    "midpoint_pin_probability",
    "midpoint_neighbors_probability",
    "path_weight",
]


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError(f"equilibrium needs a finite pinning parameter >= 0, got {lam}")
    return lam


@dataclass(frozen=True)
class PartitionTable:
    """Forward and backward weights, each column scaled by ``exp(log_scale)``."""

    L: int
    lam: float
    forward: np.ndarray  # (2L+1, L+1)
    forward_log_scale: np.ndarray  # (2L+1,)
    backward: np.ndarray
    backward_log_scale: np.ndarray

    @property
    def log_total(self) -> float:
        return float(math.log(self.forward[-1, 0]) + self.forward_log_scale[-1])

    @property
    def total(self) -> float:
        return math.exp(self.log_total)

    def prefix_weight(self, x: int, h: int) -> float:
        """``Z[x][h]``: weighted count of prefixes ending at ``(x, h)``."""
        i = x + self.L
        if not 0 <= h <= self.L:
            return 0.0
        return float(self.forward[i, h] * math.exp(self.forward_log_scale[i]))

    def marginals(self) -> np.ndarray:
        """``P(eta(x) = h)`` as a ``(2L+1, L+1)`` array."""
        logp = self.forward_log_scale[:, None] + self.backward_log_scale[:, None] - self.log_total
        with np.errstate(divide="ignore"):
            return self.forward * self.backward * np.exp(logp)

    def mean_heights(self) -> np.ndarray:
        return self.marginals() @ np.arange(self.L + 1)

    def expected_contacts(self) -> float:
        return float(self.marginals()[1:-1, 0].sum())

    def expected_fourier(self) -> float:
        return float(fourier_weights(self.L) @ self.mean_heights())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,h,weight\n")
        for i in range(2 * self.L + 1):
            for h in range(self.L + 1):
                w = self.forward[i, h]
                if w > 0:
                    buf.write(f"{i - self.L},{h},{float(w * math.exp(self.forward_log_scale[i]))!r}\n")
        return buf.getvalue()


def _weights(L: int, lam: float) -> np.ndarray:
    w = np.ones((2 * L + 1, L + 1))
    w[1:-1, 0] = lam
    return w


def partition_table(L: int, lam) -> PartitionTable:
    if L < 1:
        raise ValueError("L must be positive")
    lam = _check_lambda(lam)
    n = 2 * L + 1
    w = _weights(L, lam)
    fwd = np.zeros((n, L + 1))
    fls = np.zeros(n)
    fwd[0, 0] = 1.0
    for i in range(1, n):
        col = np.zeros(L + 1)
        col[1:] += fwd[i - 1, :-1]
        col[:-1] += fwd[i - 1, 1:]
        col *= w[i]
        m = col.max()
        if m <= 0:
            raise ValueError(f"no admissible path for L={L}, lam={lam}")
        fwd[i] = col / m
        fls[i] = fls[i - 1] + math.log(m)
    bwd = np.zeros((n, L + 1))
    bls = np.zeros(n)
    bwd[-1, 0] = 1.0
    for i in range(n - 2, -1, -1):
        nxt = bwd[i + 1] * w[i + 1]
        col = np.zeros(L + 1)
        col[:-1] += nxt[1:]
        col[1:] += nxt[:-1]
        m = col.max()
        bwd[i] = col / m if m > 0 else col
        bls[i] = bls[i + 1] + (math.log(m) if m > 0 else 0.0)
    return PartitionTable(L, lam, fwd, fls, bwd, bls)


def log_partition_function(L: int, lam) -> float:
    return partition_table(L, lam).log_total


def partition_function(L: int, lam) -> float:
    """``Z = sum over walled paths of lam ** N(eta)`` (``inf`` if it overflows a double)."""
    try:
        return math.exp(log_partition_function(L, lam))
    except OverflowError:
        return math.inf


def partition_function_exact(L: int, lam) -> Fraction:
    """Same sum in exact rational arithmetic (``lam`` is converted to a ``Fraction``)."""
    lam = Fraction(lam)
    col = [Fraction(0)] * (L + 2)
    col[0] = Fraction(1)
    for i in range(1, 2 * L + 1):
        new = [Fraction(0)] * (L + 2)
        for h in range(L + 1):
            new[h] = (col[h - 1] if h > 0 else 0) + col[h + 1]
        if i < 2 * L:
            new[0] *= lam
        col = new
    return col[0]


def path_weight(path: LatticePath, lam) -> float:
    return float(lam) ** int(np.count_nonzero(path.heights[1:-1] == 0))


def equilibrium_samples(L: int, lam, n: int, seed: int, table: Optional[PartitionTable] = None) -> np.ndarray:
    """``n`` exact samples as an ``(n, 2L+1)`` height array, decoded forward with the backward table."""
    lam = _check_lambda(lam)
    if lam == 0:
        raise ValueError("sampling needs lam > 0")
    table = table if table is not None else partition_table(L, lam)
    w = _weights(L, lam)
    rng = np.random.default_rng(seed)
    out = np.zeros((n, 2 * L + 1), dtype=np.int64)
    h = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    for i in range(2 * L):
        col = table.backward[i + 1] * w[i + 1]
        padded = np.concatenate([col, [0.0]])
        up = padded[np.minimum(h + 1, L + 1)]
        down = np.where(h > 0, padded[np.maximum(h - 1, 0)], 0.0)
        p_up = up / (up + down)
        h = np.where(rng.random(n) < p_up, h + 1, h - 1)
        out[idx, i + 1] = h
    return out


def equilibrium_sample(L: int, lam, seed: int) -> LatticePath:
    """One exact sample from the equilibrium measure."""
    return LatticePath(equilibrium_samples(L, lam, 1, seed)[0], walled=True)


def midpoint_neighbors_probability(l: int, lam) -> float:
    """Probability that both neighbours of the midpoint of a ``2l``-step polymer sit at height 1."""
    if l < 2:
        raise ValueError("need l >= 2 for the midpoint to have interior neighbours")
    if l % 2:
        return 0.0  # the neighbours of the midpoint sit at even heights
    t = partition_table(l, lam)
    i = l
    # prefix to (-1, 1), then midpoint at 0 (weight lam) or 2 (weight 1), then suffix from (1, 1)
    logv = (math.log(t.forward[i - 1, 1]) + t.forward_log_scale[i - 1]
            + math.log(t.backward[i + 1, 1]) + t.backward_log_scale[i + 1] - t.log_total)
    return (1.0 + t.lam) * math.exp(logv)


def midpoint_pin_probability(l: int, lam) -> float:
    """Probability that the midpoint of a ``2l``-step polymer is pinned (``eta(0) = 0``)."""
    lam = _check_lambda(lam)
    if lam == 0 or l % 2:
        return 0.0
    return lam / (1.0 + lam) * midpoint_neighbors_probability(l, lam)
