"""Linear forward models and the one-dimensional deconvolution benchmark.

The benchmark observes a piecewise constant signal g on [0, 1] through a
Gaussian convolution kernel at a subset of grid nodes.  The unknown is
the increment vector x with L z = x, where L is the lower-bidiagonal
difference matrix and z the signal samples (boundary condition z_0 = 0,
so z = cumsum(x)).  Data and forward map are divided by the noise level,
whitening the noise to N(0, I).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DeconvolutionConfig",
    "InverseProblem",
    "GroundTruth",
    "DEFAULT_SIGNAL_JUMPS",
    "kernel_eval",
    "piecewise_signal",
    "build_problem",
    "apply_scaled_forward",
    "sensitivity_vartheta",
    "difference_matrix",
    "increments_to_signal",
    "signal_to_increments",
]

# Five nonzero increments; locations in (0, 1), strictly increasing.
DEFAULT_SIGNAL_JUMPS: tuple[tuple[float, float], ...] = (
    (0.10, 1.5),
    (0.25, -2.25),
    (0.45, 1.2),
    (0.60, 1.05),
    (0.80, -1.5),
)


@dataclass(frozen=True)
class DeconvolutionConfig:
    """Configuration of the deconvolution benchmark.

    The convolution kernel is a(t) = kernel_amplitude * exp(-t**2 /
    (2 * kernel_width**2)).  Observation times coincide with every
    `obs_stride`-th coarse node; data are generated on a finer mesh with
    `fine_n` intervals to avoid committing the inverse crime.
    """

    kernel_width: float = 0.02
    kernel_amplitude: float = 6.2
    n: int = 128
    obs_stride: int = 6
    m: int = 22
    fine_n: int = 1000
    sigma: float = 0.03
    signal_jumps: tuple[tuple[float, float], ...] = DEFAULT_SIGNAL_JUMPS
    rng_seed: int = 1

    def __post_init__(self):
        object.__setattr__(
            self, "signal_jumps", tuple((float(a), float(b)) for a, b in self.signal_jumps)
        )

    def validate(self) -> None:
        if self.n < 1 or self.m < 1 or self.obs_stride < 1:
            raise ValueError("n, m and obs_stride must be positive integers")
        if self.obs_stride * (self.m - 1) + 1 > self.n:
            raise ValueError(
                f"observation layout needs 1 + obs_stride*(m-1) <= n: "
                f"got 1 + {self.obs_stride}*({self.m}-1) > {self.n}"
            )
        if self.fine_n < self.n:
            raise ValueError(
                f"fine_n must be at least n for data generation: "
                f"fine_n={self.fine_n} < n={self.n}"
            )
        if not (self.kernel_width > 0.0 and self.sigma > 0.0):
            raise ValueError("kernel_width and sigma must be positive")
        locs = [loc for loc, _ in self.signal_jumps]
        if any(not 0.0 < loc < 1.0 for loc in locs):
            raise ValueError("jump locations must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("jump locations must be strictly increasing")

    def coarse_nodes(self) -> np.ndarray:
        """Cell midpoints s_k = (k - 1/2) / n, k = 1..n."""
        return (np.arange(self.n) + 0.5) / self.n

    def observation_times(self) -> np.ndarray:
        """t_j = s_(1 + obs_stride*(j-1)), j = 1..m."""
        return self.coarse_nodes()[:: self.obs_stride][: self.m]


@dataclass(frozen=True)
class InverseProblem:
    """Whitened linear inverse problem b_hat = a_hat @ x + e, e ~ N(0, I).

    a_hat = (1/sigma) * A * L^{-1} maps increments to whitened data;
    diff_mat is the difference matrix L tying increments to the signal.
    """

    a_hat: np.ndarray
    b_hat: np.ndarray
    sigma: float
    n: int
    m: int
    diff_mat: np.ndarray

    @classmethod
    def from_matrices(
        cls, a_hat: np.ndarray, b_hat: np.ndarray, sigma: float = 1.0
    ) -> "InverseProblem":
        """Wrap an already-whitened system; the increment map defaults to
        the identity (x and z coincide)."""
        a_hat = np.asarray(a_hat, dtype=float)
        b_hat = np.asarray(b_hat, dtype=float)
        m, n = a_hat.shape
        if b_hat.shape != (m,):
            raise ValueError(f"data vector has shape {b_hat.shape}, expected ({m},)")
        return cls(a_hat, b_hat, float(sigma), n, m, np.eye(n))


@dataclass(frozen=True)
class GroundTruth:
    """Generative signal on the coarse grid and its noiseless data."""

    z_true: np.ndarray
    x_true: np.ndarray
    b_noiseless: np.ndarray


def kernel_eval(t, cfg: DeconvolutionConfig):
    """Convolution kernel a(t) = amplitude * exp(-t**2 / (2 width**2))."""
    t = np.asarray(t, dtype=float)
    val = cfg.kernel_amplitude * np.exp(-(t**2) / (2.0 * cfg.kernel_width**2))
    return float(val) if val.ndim == 0 else val


def piecewise_signal(s, jumps) -> np.ndarray:
    """Piecewise constant signal with the given (location, increment) jumps."""
    s = np.asarray(s, dtype=float)
    g = np.zeros_like(s)
    for loc, inc in jumps:
        g += inc * (s >= loc)
    return g


def difference_matrix(n: int) -> np.ndarray:
    """Lower-bidiagonal difference matrix (1 on the diagonal, -1 below)."""
    mat = np.eye(n)
    idx = np.arange(1, n)
    mat[idx, idx - 1] = -1.0
    return mat


def increments_to_signal(x: np.ndarray) -> np.ndarray:
    """Apply L^{-1} (cumulative sum) along the last axis."""
    return np.cumsum(np.asarray(x, dtype=float), axis=-1)


def signal_to_increments(z: np.ndarray) -> np.ndarray:
    """Apply L: first differences with z_0 = 0."""
    z = np.asarray(z, dtype=float)
    x = np.empty_like(z)
    x[..., 0] = z[..., 0]
    x[..., 1:] = np.diff(z, axis=-1)
    return x


def build_problem(cfg: DeconvolutionConfig) -> tuple[InverseProblem, GroundTruth]:
    """Assemble the whitened benchmark and its generative ground truth.

    Data are midpoint-quadrature convolutions of the generative signal on
    the fine mesh plus seeded Gaussian noise; the inversion matrix uses
    midpoint quadrature on the coarse mesh, so the two discretizations
    differ whenever fine_n > n.
    """
    cfg.validate()
    t_obs = cfg.observation_times()

    s_fine = (np.arange(cfg.fine_n) + 0.5) / cfg.fine_n
    g_fine = piecewise_signal(s_fine, cfg.signal_jumps)
    kern_fine = kernel_eval(t_obs[:, None] - s_fine[None, :], cfg)
    b_noiseless = kern_fine @ g_fine / cfg.fine_n

    rng = np.random.default_rng(cfg.rng_seed)
    b = b_noiseless + cfg.sigma * rng.standard_normal(cfg.m)

    s_coarse = cfg.coarse_nodes()
    a_mat = kernel_eval(t_obs[:, None] - s_coarse[None, :], cfg) / cfg.n
    # A @ L^{-1}: reversed cumulative sum over columns
    a_linv = np.flip(np.cumsum(np.flip(a_mat, axis=1), axis=1), axis=1)

    prob = InverseProblem(
        a_hat=a_linv / cfg.sigma,
        b_hat=b / cfg.sigma,
        sigma=cfg.sigma,
        n=cfg.n,
        m=cfg.m,
        diff_mat=difference_matrix(cfg.n),
    )
    z_true = piecewise_signal(s_coarse, cfg.signal_jumps)
    truth = GroundTruth(
        z_true=z_true,
        x_true=signal_to_increments(z_true),
        b_noiseless=b_noiseless,
    )
    return prob, truth


def apply_scaled_forward(xi: np.ndarray, prob: InverseProblem, vartheta) -> np.ndarray:
    """Column-scaled forward map a_hat @ diag(sqrt(vartheta)) @ xi."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (prob.n,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({prob.n},)")
    scale = np.sqrt(np.broadcast_to(np.asarray(vartheta, dtype=float), (prob.n,)))
    return prob.a_hat @ (scale * xi)


def sensitivity_vartheta(prob: InverseProblem, snr_constant: float) -> np.ndarray:
    """Scales vartheta_j = C / ||a_hat column j||**2 balancing the data
    sensitivity of all components."""
    if not snr_constant > 0.0:
        raise ValueError("the sensitivity constant must be positive")
    colsq = np.einsum("ij,ij->j", prob.a_hat, prob.a_hat)
    zero = np.nonzero(colsq == 0.0)[0]
    if zero.size:
        raise ZeroDivisionError(
            f"forward map has a zero column at index {int(zero[0])}"
        )
    return snr_constant / colsq
