"""Q-function histograms, marginals, conditional moments and excess variances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import RecordBatch
from .quantum import MomentSet, SNU_SCALE, UnitConvention

DEFAULT_BIN_WIDTH = 0.1
DEFAULT_HALF_RANGE = 6.0

#: Density of a natural-coordinate Q-function expressed over SNU axes: dx dy = 2 dRe dIm.
Q_SNU_JACOBIAN = 1.0 / SNU_SCALE**2

#: Peak of the vacuum heterodyne density in SNU coordinates, 1/(2 pi).
VACUUM_PEAK_SNU = Q_SNU_JACOBIAN / math.pi


@dataclass
class Histogram2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    density: np.ndarray  # indexed [ix, iy]
    total_count: int

    @property
    def bin_area(self) -> np.ndarray:
        return np.outer(np.diff(self.x_edges), np.diff(self.y_edges))

    @property
    def volume(self) -> float:
        return float(np.sum(self.density * self.bin_area))

    @property
    def peak(self) -> float:
        return float(self.density.max())

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[1:] + self.x_edges[:-1])

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[1:] + self.y_edges[:-1])


@dataclass
class Histogram1D:
    edges: np.ndarray
    density: np.ndarray
    total_count: int
    mean: float
    variance: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def peak(self) -> float:
        return float(self.density.max())


def _edges(values: np.ndarray, bin_width: float, half_range: float) -> np.ndarray:
    center = float(np.mean(values))
    n = int(math.ceil(half_range / bin_width))
    # anchor the grid at a multiple of bin_width so identical data give identical edges
    c0 = round(center / bin_width) * bin_width
    return c0 + bin_width * np.arange(-n, n + 1)


def build_q_histogram(
    records: RecordBatch, bin_width: float = DEFAULT_BIN_WIDTH, half_range: float = DEFAULT_HALF_RANGE
) -> Histogram2D:
    """Normalized 2-D outcome histogram, i.e. a direct Q-function estimate over SNU axes.

    No smoothing.  Outcomes outside the +-half_range window are dropped before
    normalization.  The peak estimates Q_SNU_JACOBIAN * Q(beta) at the mode.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if len(records) < 1:
        raise ValueError("need at least one record")
    x, y = records.outcome_x, records.outcome_y
    xe = _edges(x, bin_width, half_range)
    ye = _edges(y, bin_width, half_range)
    counts, _, _ = np.histogram2d(x, y, bins=(xe, ye))
    total = int(counts.sum())
    if total == 0:
        raise ValueError("no records inside the histogram window")
    area = np.outer(np.diff(xe), np.diff(ye))
    density = counts / (total * area)
    # absorb floating error of the edge arithmetic into the normalization
    density /= np.sum(density * area)
    return Histogram2D(xe, ye, density, total)


def marginal_histogram(
    records: RecordBatch,
    axis: str = "x",
    bin_width: float = DEFAULT_BIN_WIDTH,
    half_range: float = DEFAULT_HALF_RANGE,
) -> Histogram1D:
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    v = records.outcome_x if axis == "x" else records.outcome_y
    edges = _edges(v, bin_width, half_range)
    counts, _ = np.histogram(v, bins=edges)
    total = int(counts.sum())
    widths = np.diff(edges)
    density = counts / (total * widths)
    density /= np.sum(density * widths)
    return Histogram1D(edges, density, total, float(np.mean(v)), float(np.var(v, ddof=1)))


def moments_of(x: np.ndarray, y: np.ndarray, convention=UnitConvention.SNU) -> MomentSet:
    n = len(x)
    if n < 2:
        raise ValueError(f"insufficient data: {n} samples")
    cov = np.cov(np.vstack([x, y]), ddof=1)
    return MomentSet(
        mean_x=float(np.mean(x)),
        mean_y=float(np.mean(y)),
        var_x=float(cov[0, 0]),
        var_y=float(cov[1, 1]),
        cov_xy=float(cov[0, 1]),
        convention=convention,
        n_samples=n,
    )


def estimate_conditional_moments(records: RecordBatch, bit: int) -> MomentSet:
    """Sample moments (SNU) of the signal outcomes for which Alice sent ``bit``."""
    sel = records.with_bit(bit)
    return moments_of(sel.outcome_x, sel.outcome_y)


def vacuum_moments(records: RecordBatch) -> MomentSet:
    vac = records.vacuum
    return moments_of(vac.outcome_x, vac.outcome_y)


def excess_variance(signal_var: float, vacuum_var: float) -> float:
    """signal_var / vacuum_var - 1; negative values are allowed."""
    if vacuum_var <= 0:
        raise ValueError("vacuum variance must be positive")
    return signal_var / vacuum_var - 1.0


def excess_variance_error(ratio: float, n_signal: int, n_vacuum: int) -> float:
    """Standard error of signal_var/vacuum_var - 1 for Gaussian samples."""
    terms = 0.0
    if n_signal > 1:
        terms += 2.0 / (n_signal - 1)
    if n_vacuum > 1:
        terms += 2.0 / (n_vacuum - 1)
    return ratio * math.sqrt(terms)


def electronic_noise_correction(signal_var: float, vacuum_var: float, electronic_var: float) -> float:
    """Worst-case excess variance with electronic noise removed from the vacuum reference only."""
    if not 0.0 <= electronic_var < vacuum_var:
        raise ValueError("need 0 <= electronic_var < vacuum_var")
    return signal_var / (vacuum_var - electronic_var) - 1.0


@dataclass
class ExcessNoiseReport:
    E_x: float
    E_y: float
    stat_error_x: float
    stat_error_y: float
    vacuum_var_used: float
    corrected: bool
    n_signal: int = 0
    n_vacuum: int = 0


def _pooled_conditional(records: RecordBatch, axis: str) -> tuple[float, int]:
    """Variance of signal outcomes about their per-bit means, pooled over both bits."""
    sig = records.signal
    v = sig.outcome_x if axis == "x" else sig.outcome_y
    ss = 0.0
    dof = 0
    for b in (0, 1):
        vb = v[sig.bit == b]
        if len(vb) >= 2:
            ss += float(np.sum((vb - vb.mean()) ** 2))
            dof += len(vb) - 1
    if dof == 0:
        raise ValueError("insufficient signal data")
    return ss / dof, dof + 1


def excess_noise_report(records: RecordBatch, electronic_var: Optional[float] = None) -> ExcessNoiseReport:
    """Heterodyne excess variances of the conditional signal states vs the batch vacuum slots.

    With ``electronic_var`` (SNU) the worst-case correction is applied.
    """
    vac = records.vacuum
    if len(vac) < 2:
        raise ValueError("no vacuum calibration slots in batch")
    n_vac = len(vac)
    out = {}
    vac_vars = {}
    for axis in ("x", "y"):
        vv = float(np.var(vac.outcome_x if axis == "x" else vac.outcome_y, ddof=1))
        sv, n_eff = _pooled_conditional(records, axis)
        if electronic_var is None:
            e = excess_variance(sv, vv)
            ratio = sv / vv
        else:
            e = electronic_noise_correction(sv, vv, electronic_var)
            ratio = sv / (vv - electronic_var)
        # n_eff - 1 pooled degrees of freedom
        out[axis] = (e, excess_variance_error(ratio, n_eff, n_vac))
        vac_vars[axis] = vv
    return ExcessNoiseReport(
        E_x=out["x"][0],
        E_y=out["y"][0],
        stat_error_x=out["x"][1],
        stat_error_y=out["y"][1],
        vacuum_var_used=0.5 * (vac_vars["x"] + vac_vars["y"]),
        corrected=electronic_var is not None,
        n_signal=len(records.signal),
        n_vacuum=n_vac,
    )


def bootstrap_excess_error(
    signal: np.ndarray, vacuum: np.ndarray, n_boot: int = 200, rng: Optional[np.random.Generator] = None
) -> float:
    """Bootstrap standard error of the excess variance (alternative to the Gaussian formula)."""
    rng = rng or np.random.default_rng(0)
    vals = np.empty(n_boot)
    for i in range(n_boot):
        s = signal[rng.integers(0, len(signal), len(signal))]
        v = vacuum[rng.integers(0, len(vacuum), len(vacuum))]
        vals[i] = np.var(s, ddof=1) / np.var(v, ddof=1) - 1.0
    return float(np.std(vals, ddof=1))
