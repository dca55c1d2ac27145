"""State-space geometry toolkit.

Fractal dimension estimation (box counting and correlation-integral
cross-check), sparseness probing of point clouds, delay-coordinate
embedding with autocorrelation-based delay selection, and moments of
window-averaged time series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "PointCloud",
    "TimeSeries",
    "DimensionEstimate",
    "MomentsRecord",
    "InsufficientDataError",
    "box_counting_dimension",
    "correlation_dimension",
    "sparseness_probe",
    "delay_embed",
    "select_delay",
    "time_average_distribution",
]

SCALING_RESIDUAL_THRESHOLD = 0.05  # rms log-log residual accepted as "scaling"


class InsufficientDataError(ValueError):
    """Too few samples or windows for a meaningful estimate."""


@dataclass(frozen=True)
class PointCloud:
    """Unordered set of finite n-vectors."""

    dim: int
    points: np.ndarray  # shape (n, dim)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points must have shape (n, {self.dim})")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar record."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    scales: tuple[float, ...]
    fit_residual: float
    reliable: bool = True

    def to_record(self) -> dict:
        return {
            "value": self.value,
            "scales": list(self.scales),
            "fit_residual": self.fit_residual,
        }


@dataclass(frozen=True)
class MomentsRecord:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    window: int
    n_windows: int

    def to_record(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "window": self.window,
            "n_windows": self.n_windows,
        }


def _loglog_fit(log_x: np.ndarray, log_y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and rms residual of a log-log relation."""
    slope, intercept = np.polyfit(log_x, log_y, 1)
    resid = log_y - (slope * log_x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def box_counting_dimension(
    cloud: PointCloud, scale_min: float, scale_max: float, n_scales: int
) -> DimensionEstimate:
    """Box-counting dimension over geometrically spaced scales.

    Grids are anchored at the cloud's bounding-box corner, so the count is
    exactly invariant under rigid translation.  The dimension is the
    least-squares slope of log N(eps) against log(1/eps).
    """
    if len(cloud) == 0:
        raise ValueError("cloud must be non-empty")
    if not (0 < scale_min < scale_max):
        raise ValueError("scales must satisfy 0 < scale_min < scale_max")
    if n_scales < 4:
        raise ValueError("need at least 4 scales")
    scales = np.geomspace(scale_min, scale_max, n_scales)
    anchor = cloud.points.min(axis=0)
    counts = np.empty(n_scales)
    for i, eps in enumerate(scales):
        idx = np.floor((cloud.points - anchor) / eps).astype(np.int64)
        counts[i] = len(np.unique(idx, axis=0))
    slope, resid = _loglog_fit(np.log(1.0 / scales), np.log(counts))
    return DimensionEstimate(max(slope, 0.0), tuple(float(s) for s in scales), resid)


def _widest_scaling_run(log_x: np.ndarray, log_y: np.ndarray):
    """Longest contiguous run of scales with an acceptable log-log fit.

    Returns (start, stop, slope, residual) or None when no run of at least
    4 scales fits below the residual threshold.
    """
    n = len(log_x)
    best = None
    for start in range(n - 3):
        for stop in range(start + 4, n + 1):
            slope, resid = _loglog_fit(log_x[start:stop], log_y[start:stop])
            if resid >= SCALING_RESIDUAL_THRESHOLD:
                continue
            length = stop - start
            span = log_x[stop - 1] - log_x[start]
            key = (length, span, -start)
            if best is None or key > best[0]:
                best = (key, (start, stop, slope, resid))
    return None if best is None else best[1]


def correlation_dimension(cloud: PointCloud, radii) -> DimensionEstimate:
    """Correlation-integral dimension with automatic scaling-region selection.

    C(r) is the fraction of distinct pairs within distance r; the dimension
    is the log-log slope over the widest contiguous run of radii whose fit
    residual stays below the acceptance threshold.  If no such run exists
    the estimate is flagged unreliable and the fit covers all usable radii.
    """
    radii = np.asarray(radii, dtype=float)
    if len(cloud) < 1000:
        raise ValueError("need at least 1000 points for pair statistics")
    if radii.ndim != 1 or len(radii) < 4:
        raise ValueError("need at least 4 radii")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and ascending")
    n = len(cloud)
    tree = cKDTree(cloud.points)
    raw = tree.count_neighbors(tree, radii)  # ordered pairs, self pairs included
    corr = (raw - n) / (n * (n - 1.0))
    usable = corr > 0
    if usable.sum() < 4:
        raise ValueError("fewer than 4 radii captured any pairs; enlarge radii")
    log_r = np.log(radii[usable])
    log_c = np.log(corr[usable])
    run = _widest_scaling_run(log_r, log_c)
    if run is None:
        slope, resid = _loglog_fit(log_r, log_c)
        return DimensionEstimate(
            max(slope, 0.0),
            tuple(float(r) for r in radii[usable]),
            resid,
            reliable=False,
        )
    start, stop, slope, resid = run
    chosen = np.exp(log_r[start:stop])
    return DimensionEstimate(max(slope, 0.0), tuple(float(r) for r in chosen), resid)


def sparseness_probe(
    cloud: PointCloud,
    n_probes: int,
    epsilons,
    bounding_box,
    seed: int,
) -> np.ndarray:
    """Fraction of uniform probes landing within eps of the cloud, per eps.

    Probes are drawn once; each is scored by its nearest-neighbor distance,
    so the hit fractions are exactly non-increasing as eps decreases.  A
    rapidly vanishing fraction is the signature of a measure-zero, nowhere
    dense embedding.
    """
    if len(cloud) == 0:
        raise ValueError("cloud must be non-empty")
    epsilons = np.asarray(epsilons, dtype=float)
    if epsilons.ndim != 1 or len(epsilons) == 0:
        raise ValueError("epsilons must be a non-empty sequence")
    if np.any(epsilons <= 0) or np.any(np.diff(epsilons) >= 0):
        raise ValueError("epsilons must be positive and strictly descending")
    if n_probes < 1000:
        raise ValueError("need at least 1000 probes")
    lo, hi = (np.asarray(b, dtype=float) for b in bounding_box)
    if lo.shape != (cloud.dim,) or hi.shape != (cloud.dim,) or np.any(hi <= lo):
        raise ValueError("bounding_box must be (lo, hi) vectors with hi > lo")
    rng = np.random.default_rng(seed)
    probes = lo + rng.random((n_probes, cloud.dim)) * (hi - lo)
    dist, _ = cKDTree(cloud.points).query(probes, k=1)
    return np.array([(dist <= eps).mean() for eps in epsilons])


def delay_embed(series: TimeSeries, tau: int, m: int) -> PointCloud:
    """Delay-coordinate reconstruction: point j = (s_j, s_{j+tau}, ..., s_{j+(m-1)tau})."""
    if tau < 1:
        raise ValueError("tau must be a positive integer")
    if m < 1:
        raise ValueError("m must be at least 1")
    n = len(series) - (m - 1) * tau
    if n < 1:
        raise ValueError("series too short for this (tau, m)")
    cols = [series.values[j * tau : j * tau + n] for j in range(m)]
    return PointCloud(m, np.stack(cols, axis=1))


def select_delay(series: TimeSeries) -> int:
    """Embedding delay from the first zero crossing of the autocorrelation.

    Falls back to length/4 (with a warning) when the sample autocorrelation
    stays positive that far out.
    """
    x = series.values - series.values.mean()
    if np.all(x == 0):
        raise ValueError("series has zero variance")
    n = len(x)
    max_lag = max(1, n // 4)
    # FFT autocorrelation, biased normalization
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    acf /= acf[0]
    crossings = np.nonzero(acf[1:] <= 0)[0]
    if len(crossings) == 0:
        warnings.warn(
            f"autocorrelation has no zero crossing within {max_lag} lags; "
            "falling back to length/4",
            stacklevel=2,
        )
        return max_lag
    return int(crossings[0]) + 1


def time_average_distribution(series: TimeSeries, window: int) -> MomentsRecord:
    """Moments of non-overlapping window means.

    Non-overlapping windows keep the mean sequence free of the serial
    correlation that would bias the higher moments.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if window > len(series):
        raise ValueError("window exceeds series length")
    n_windows = len(series) // window
    if n_windows < 30:
        raise InsufficientDataError(
            f"only {n_windows} windows; need at least 30 for stable moments"
        )
    means = series.values[: n_windows * window].reshape(n_windows, window).mean(axis=1)
    mu = float(means.mean())
    centered = means - mu
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        return MomentsRecord(mu, 0.0, 0.0, 0.0, window, n_windows)
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return MomentsRecord(
        mean=mu,
        variance=m2,
        skewness=m3 / m2**1.5,
        excess_kurtosis=m4 / m2**2 - 3.0,
        window=window,
        n_windows=n_windows,
    )
