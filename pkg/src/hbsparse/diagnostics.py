"""Chain quality summaries: autocorrelation, credible envelopes,
compressibility counts and the per-run report bundle."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .sampler import PhysicalDraws, SampleSet

__all__ = [
    "DiagnosticsReport",
    "autocorrelation",
    "credible_envelope",
    "threshold_delta",
    "compressibility_count",
    "build_report",
]


@dataclass
class DiagnosticsReport:
    """Posterior summaries computed from one thinned chain."""

    delta: float
    acceptance_rate: float
    probe_indices: tuple[int, ...]
    lags: int
    # per probe variable: normalized autocorrelation over lags 0..lags
    autocorr_x: dict[int, np.ndarray]
    autocorr_theta: dict[int, np.ndarray]
    # pointwise mean and quantile envelopes, one triple per variable set
    mean: dict[str, np.ndarray]
    envelope_lo: dict[str, np.ndarray]
    envelope_hi: dict[str, np.ndarray]
    compress_counts: np.ndarray
    level: float = 0.90
    extra: dict = field(default_factory=dict)

    @property
    def compress_mode(self) -> int:
        return int(np.bincount(self.compress_counts).argmax())


def autocorrelation(series, max_lag: int, mode: str = "standard") -> np.ndarray:
    """Sample autocorrelation of a scalar series over lags 0..max_lag.

    mode="standard" returns the biased sample autocovariance of the
    centered series normalized by its lag-0 value, so the result starts
    at 1.  mode="literal" evaluates

        C(l) = (1/||x||) * sum_{k=1+l}^{N-l} (x_k - xbar)(x_{k-l} - xbar)

    with the uncentered Euclidean norm and the shortened upper summation
    limit; this alternative convention is not normalized to C(0) = 1 and
    is provided so results computed with it can be reproduced exactly.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series must be one-dimensional with at least 2 entries")
    n = x.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}]")
    centered = x - x.mean()
    out = np.empty(max_lag + 1)
    if mode == "standard":
        c0 = centered @ centered / n
        if c0 == 0.0:
            warnings.warn("constant series: autocorrelation set to [1, 0, 0, ...]")
            out[:] = 0.0
            out[0] = 1.0
            return out
        for lag in range(max_lag + 1):
            out[lag] = centered[lag:] @ centered[: n - lag] / n / c0
        return out
    if mode == "literal":
        norm = np.sqrt(x @ x)
        if norm == 0.0:
            raise ValueError("literal mode undefined for an all-zero series")
        for lag in range(max_lag + 1):
            out[lag] = centered[lag : n - lag] @ centered[: n - 2 * lag] / norm
        return out
    raise ValueError(f"unknown mode {mode!r}")


def credible_envelope(
    draws: np.ndarray, level: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise quantile band and mean of a (steps, n) draw matrix.

    The band covers the central `level` mass: quantiles at (1-level)/2
    and 1-(1-level)/2, interpolated linearly between order statistics.
    """
    draws = np.asarray(draws, dtype=float)
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError("draws must be a (steps >= 2, n) matrix")
    alpha = 0.5 * (1.0 - level)
    lo = np.quantile(draws, alpha, axis=0)
    hi = np.quantile(draws, 1.0 - alpha, axis=0)
    return lo, hi, draws.mean(axis=0)


def threshold_delta(beta1: float, vartheta: float) -> float:
    """Compressibility threshold one standard deviation above the gamma
    hyperprior mean: delta = beta1 * vartheta + sqrt(beta1) * vartheta."""
    if not (beta1 > 0.0 and vartheta > 0.0):
        raise ValueError("beta1 and vartheta must be positive")
    return beta1 * vartheta + np.sqrt(beta1) * vartheta


def compressibility_count(theta_draw: np.ndarray, delta: float):
    """Number of variance components strictly above the threshold.

    Accepts a single draw (vector) or a (steps, n) matrix, returning an
    int or an integer vector respectively.
    """
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    theta = np.asarray(theta_draw, dtype=float)
    counts = np.count_nonzero(theta > delta, axis=-1)
    return int(counts) if theta.ndim == 1 else counts.astype(int)


def build_report(
    samples: SampleSet,
    physical: PhysicalDraws,
    delta: float,
    lags: int,
    probe_indices: tuple[int, ...] = (30, 50),
    level: float = 0.90,
) -> DiagnosticsReport:
    """Assemble the full report for one chain.

    probe_indices are 1-based component indices (matching grid-node
    numbering); requesting more lags than stored draws truncates with a
    warning rather than failing.
    """
    stored = samples.draws.shape[0]
    if stored == 0:
        raise ValueError("no stored draws to diagnose")
    n = samples.n_components
    for j in probe_indices:
        if not 1 <= j <= n:
            raise ValueError(f"probe index {j} outside 1..{n}")
    valid = ~physical.excluded
    n_valid = int(np.count_nonzero(valid))
    if n_valid < 2:
        raise ValueError("fewer than 2 finite draws to diagnose")
    if lags >= n_valid:
        warnings.warn(f"lags={lags} >= usable draws={n_valid}; truncating")
        lags = n_valid - 1

    x_ok = physical.x[valid]
    theta_ok = physical.theta[valid]
    z_ok = physical.z[valid]
    autocorr_x = {j: autocorrelation(x_ok[:, j - 1], lags) for j in probe_indices}
    autocorr_theta = {
        j: autocorrelation(theta_ok[:, j - 1], lags) for j in probe_indices
    }
    mean: dict[str, np.ndarray] = {}
    env_lo: dict[str, np.ndarray] = {}
    env_hi: dict[str, np.ndarray] = {}
    for name, draws in (("z", z_ok), ("x", x_ok), ("theta", theta_ok)):
        lo, hi, mu = credible_envelope(draws, level)
        mean[name] = mu
        env_lo[name] = lo
        env_hi[name] = hi
    counts = compressibility_count(physical.theta, delta)
    return DiagnosticsReport(
        delta=float(delta),
        acceptance_rate=samples.acceptance_rate,
        probe_indices=tuple(int(j) for j in probe_indices),
        lags=lags,
        autocorr_x=autocorr_x,
        autocorr_theta=autocorr_theta,
        mean=mean,
        envelope_lo=env_lo,
        envelope_hi=env_hi,
        compress_counts=np.asarray(counts, dtype=int),
        level=level,
        extra={"excluded_draws": int(np.count_nonzero(physical.excluded))},
    )
