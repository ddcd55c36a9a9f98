"""Weighted ensembles for sampling signed (non-classical) distributions.

A weighted average is ``E[w f(x)] / E[w]``.  A signed density ``P`` is
split into its positive and negative parts ``P = P+ + P-`` with masses
``C+ >= 1`` and ``C- <= 0``.  The variance-optimal sampler draws from
``P+/C+`` with probability ``C+/(C+ - C-)`` and from ``P-/C-`` otherwise,
and gives every sample weight ``+/-(C+ - C-)``; its inflation factor
``E[w^2]/E[w]^2`` is then ``(C+ - C-)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .streams import TAG_SPLIT, map_blocks


class ZeroWeightError(ZeroDivisionError):
    """The ensemble's total weight is zero, so weighted means are undefined."""


@dataclass
class WeightedEnsemble:
    points: np.ndarray
    weights: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or self.weights.size < 1:
            raise ValueError("an ensemble needs at least one weight")
        if len(self.points) != self.weights.size:
            raise ValueError("points and weights must have the same length")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def __len__(self):
        return self.weights.size


def _values(ens, f):
    return np.asarray(f(ens.points)) if callable(f) else np.asarray(f)


def _total(weights):
    s = float(np.sum(weights))
    if s == 0.0:
        raise ZeroWeightError("sum of weights is zero")
    return s


def weighted_mean(ens: WeightedEnsemble, f):
    """``sum(w f) / sum(w)``.  ``f`` is a callable on ``ens.points`` or an array of values."""
    w = ens.weights
    return np.sum(w * _values(ens, f)) / _total(w)


def weighted_moments(w: np.ndarray, fx: np.ndarray) -> tuple:
    """Sufficient sums ``(N, Sw, Sw2, Swf, Sw2f, Sw2|f|^2)`` for mean and standard error."""
    w = np.asarray(w, dtype=float)
    w2 = w * w
    return (
        w.size,
        float(np.sum(w)),
        float(np.sum(w2)),
        np.sum(w * fx),
        np.sum(w2 * fx),
        float(np.sum(w2 * np.abs(fx) ** 2)),
    )


def stats_from_moments(m: tuple) -> tuple:
    """Weighted mean and standard error from :func:`weighted_moments` sums.

    The error estimate is

        sigma^2 = (fbar^2 / N) (E[w^2 f^2]/E[w f]^2 - 2 E[w^2 f]/(E[w f] E[w]) + E[w^2]/E[w]^2)

    multiplied through by ``E[w f]^2 / fbar^2 = E[w]^2``, which removes the
    apparent singularity at ``E[w f] = 0``.
    """
    n, sw, sw2, swf, sw2f, sw2f2 = m
    if sw == 0.0:
        raise ZeroWeightError("sum of weights is zero")
    fbar = swf / sw
    ew = sw / n
    var = (sw2f2 / n - 2.0 * np.real(np.conj(fbar) * sw2f) / n + abs(fbar) ** 2 * sw2 / n) / (n * ew * ew)
    return fbar, math.sqrt(max(float(var), 0.0))


def weighted_stderr(ens: WeightedEnsemble, f) -> float:
    return stats_from_moments(weighted_moments(ens.weights, _values(ens, f)))[1]


def efficiency(ens: WeightedEnsemble) -> float:
    """Variance inflation ``E[w^2] / E[w]^2`` (1 for equal weights)."""
    w = ens.weights
    n = w.size
    return float((np.sum(w * w) / n) / (_total(w) / n) ** 2)


def grid_efficiency(ens: WeightedEnsemble) -> float:
    """Unsquared ratio ``E[w^2] / E[w]`` used to judge deterministic grid ensembles."""
    w = ens.weights
    return float(np.sum(w * w) / _total(w))


@dataclass
class SignedDistribution:
    """Tabulated signed density ``values[i]`` on ``points[i]`` with cell measure ``cell``.

    ``widths`` (per coordinate) turns on uniform jitter inside each cell when
    sampling continuous coordinates; leave it ``None`` for discrete support.
    """

    points: np.ndarray
    values: np.ndarray
    cell: float | np.ndarray = 1.0
    widths: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.cell = np.broadcast_to(np.asarray(self.cell, dtype=float), self.values.shape)
        if len(self.points) != self.values.size:
            raise ValueError("points and values must have the same length")
        total = self.c_plus + self.c_minus
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"distribution is not normalised: C+ + C- = {total!r}")

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.cell

    @property
    def positive(self) -> np.ndarray:
        # zeros belong to the positive part
        return self.values >= 0

    @property
    def c_plus(self) -> float:
        return float(np.sum(self.masses[self.positive]))

    @property
    def c_minus(self) -> float:
        return float(np.sum(self.masses[~self.positive]))

    @property
    def volume(self) -> float:
        return float(np.sum(self.cell))

    def exact_mean(self, f):
        return np.sum(self.masses * np.asarray(f(self.points)))


@dataclass(frozen=True)
class SplitRates:
    lam_plus: float
    lam_minus: float
    w_plus: float
    w_minus: float

    @property
    def efficiency(self) -> float:
        # E[w^2]/E[w]^2 = (C+ - C-)^2
        return self.w_plus**2


def optimal_split(dist: SignedDistribution | None = None, c_plus=None, c_minus=None) -> SplitRates:
    """Rates and weights minimising ``E[w^2]/E[w]^2`` for a split with masses ``C+``, ``C-``."""
    if dist is not None:
        c_plus, c_minus = dist.c_plus, dist.c_minus
    if c_plus is None or c_minus is None:
        raise TypeError("pass a distribution or both c_plus and c_minus")
    if not c_plus > 0:
        raise ValueError("positive part has zero mass; nothing to sample")
    spread = c_plus - c_minus
    lam_plus = c_plus / spread
    lam_minus = -c_minus / spread
    w_minus = -spread if lam_minus > 0 else 0.0
    return SplitRates(lam_plus, lam_minus, spread, w_minus)


def _inverse_cdf(masses, u):
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), masses.size - 1)


def sample_split(dist: SignedDistribution, n: int, seed: int, workers: int = 1) -> WeightedEnsemble:
    """Draw ``n`` weighted samples with the optimal positive/negative split."""
    if n < 1:
        raise ValueError("need at least one sample")
    rates = optimal_split(dist)
    m = dist.masses
    pos = dist.positive
    idx_plus = np.flatnonzero(pos & (m > 0))
    idx_minus = np.flatnonzero(~pos)
    if idx_plus.size == 0:
        raise ValueError("positive part of the distribution is empty")
    pts = dist.points
    widths = None if dist.widths is None else np.asarray(dist.widths, dtype=float)

    def block(lo, hi, rng):
        k = hi - lo
        u = rng.random((k, 3 if widths is None else 3 + pts[0].size))
        from_plus = u[:, 0] < rates.lam_plus
        choice = np.empty(k, dtype=np.int64)
        choice[from_plus] = idx_plus[_inverse_cdf(m[idx_plus], u[from_plus, 1])]
        if idx_minus.size:
            choice[~from_plus] = idx_minus[_inverse_cdf(-m[idx_minus], u[~from_plus, 1])]
        x = pts[choice].copy()
        if widths is not None:
            x = x + (u[:, 3:].reshape(x.shape) - 0.5) * widths
        w = np.where(from_plus, rates.w_plus, rates.w_minus)
        return x, w

    parts = map_blocks(block, n, seed, TAG_SPLIT, workers=workers)
    points = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    return WeightedEnsemble(points, weights, info={"rates": rates})


def sample_grid(dist: SignedDistribution) -> WeightedEnsemble:
    """Deterministic ensemble: one sample per grid point with weight ``V P(x_i)``.

    For non-uniform cells the weight is ``N * cell_i * P(x_i)``, which is the
    same thing on a uniform grid.
    """
    n = dist.values.size
    weights = n * dist.cell * dist.values
    ens = WeightedEnsemble(dist.points.copy(), weights)
    ens.info["efficiency_proxy"] = float(np.sum(dist.volume * dist.cell * dist.values**2))
    ens.info["ew2_over_ew"] = float(np.sum(weights**2) / n / (np.sum(weights) / n))
    ens.info["ew2_over_ew2"] = float((np.sum(weights**2) / n) / (np.sum(weights) / n) ** 2)
    return ens
