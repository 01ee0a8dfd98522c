"""Random coupling ensembles and level-spacing ratio statistics.

Random numbers come from numpy's PCG64 bit generator.  Realization ``i`` of
a run seeded with ``seed`` draws from ``SeedSequence(seed, spawn_key=(i,))``,
so realizations are independent streams and can be computed in any order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "EnsembleSpec",
    "SpectralStatistics",
    "realization_rng",
    "sample_coupling",
    "offdiagonal_std",
    "spacing_ratios",
    "analytic_pr",
    "analytic_cdf",
    "ratio_histogram",
    "ks_distance",
    "ensemble_ratios",
]

HIST_BINS = 50
HIST_RANGE = (0.0, 5.0)


def realization_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for realization ``index`` of run ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class EnsembleSpec:
    """Banded Gaussian ensemble; ``band_exponent == 0`` is the GOE."""

    dim: int
    band_exponent: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"coupling matrices need dim >= 2, got {self.dim}")
        if self.band_exponent < 0:
            raise ValueError("band exponent must be non-negative")


def offdiagonal_std(dim: int, band_exponent: float) -> np.ndarray:
    """Element standard deviations: 1 on the diagonal, 1/(sqrt2 |n-m|^alpha) off it."""
    n = np.arange(dim)
    dist = np.abs(n[:, None] - n[None, :]).astype(float)
    np.fill_diagonal(dist, 1.0)
    std = 1.0 / (np.sqrt(2.0) * dist**band_exponent)
    np.fill_diagonal(std, 1.0)
    return std


def sample_coupling(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one real symmetric coupling matrix.

    Only the upper triangle (diagonal included) of a standard-normal draw is
    used; the lower triangle is its mirror, so the result is symmetric bit
    for bit.
    """
    d = spec.dim
    z = rng.standard_normal((d, d))
    upper = np.triu(z * offdiagonal_std(d, spec.band_exponent))
    return upper + np.triu(upper, 1).T


@dataclass(frozen=True)
class SpectralStatistics:
    spectrum: np.ndarray
    spacings: np.ndarray
    ratios: np.ndarray
    valid: np.ndarray  # False where the denominator spacing vanished

    @property
    def usable_ratios(self) -> np.ndarray:
        return self.ratios[self.valid]


def spacing_ratios(spectrum) -> SpectralStatistics:
    """Ratios ``r_n = s_{n+1} / s_n`` of consecutive spacings of the sorted spectrum.

    >>> spacing_ratios([0, 1, 3]).ratios
    array([2.])
    """
    e = np.sort(np.asarray(spectrum, dtype=float))
    if e.size < 3:
        raise ValueError("need at least three levels for a spacing ratio")
    s = np.diff(e)
    valid = s[:-1] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(valid, s[1:] / np.where(valid, s[:-1], 1.0), np.nan)
    return SpectralStatistics(e, s, r, valid)


def analytic_pr(r, family: str):
    """Ratio density for integrable (Poisson) or GOE spectra.

    integrable: 1/(1+r)^2;  goe: 27 (r + r^2) / (8 (1 + r + r^2)^{5/2}).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("ratio must be non-negative")
    if family == "integrable":
        out = 1.0 / (1.0 + r) ** 2
    elif family == "goe":
        out = 27.0 * (r + r**2) / (8.0 * (1.0 + r + r**2) ** 2.5)
    else:
        raise ValueError(f"unknown family {family!r}")
    return out if out.ndim else float(out)


def analytic_cdf(r, family: str):
    """Cumulative distribution of :func:`analytic_pr` on ``[0, r]``."""
    r = np.asarray(r, dtype=float)
    if family == "integrable":
        out = r / (1.0 + r)
    elif family == "goe":
        out = 0.5 + (2 * r**3 + 3 * r**2 - 3 * r - 2) / (4.0 * (1.0 + r + r**2) ** 1.5)
    else:
        raise ValueError(f"unknown family {family!r}")
    return out if out.ndim else float(out)


def ks_distance(ratios, family: str) -> float:
    """Kolmogorov-Smirnov distance between sample ratios and an analytic family."""
    ratios = np.asarray(ratios, dtype=float)
    ratios = ratios[np.isfinite(ratios)]
    return float(stats.kstest(ratios, lambda x: analytic_cdf(x, family)).statistic)


def ratio_histogram(ratios, bins: int = HIST_BINS, range_=HIST_RANGE):
    """Normalized histogram of ratios with the mass beyond ``range_`` reported apart.

    Returns ``(edges, density, stderr, overflow)``; ``density`` integrates to
    ``1 - overflow`` over the binned range.
    """
    ratios = np.asarray(ratios, dtype=float)
    ratios = ratios[np.isfinite(ratios)]
    n = ratios.size
    counts, edges = np.histogram(ratios, bins=bins, range=range_)
    width = np.diff(edges)
    density = counts / (n * width)
    stderr = np.sqrt(counts) / (n * width)
    overflow = float(np.sum(ratios >= range_[1]) / n)
    return edges, density, stderr, overflow


def ensemble_ratios(spec: EnsembleSpec, n_matrices: int) -> np.ndarray:
    """Pooled usable ratios of ``n_matrices`` independent draws."""
    out = []
    for i in range(n_matrices):
        v = sample_coupling(spec, realization_rng(spec.seed, i))
        out.append(spacing_ratios(np.linalg.eigvalsh(v)).usable_ratios)
    return np.concatenate(out)
