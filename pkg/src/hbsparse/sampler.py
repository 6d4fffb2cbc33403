"""Reparametrized posterior sampling with preconditioned Crank-Nicolson kernels.

The scaled posterior over (xi, lambda) is mapped to unconstrained
coordinates (v, tau) through

    v_j**2 = xi_j**2 / lambda_j,      tau_j**2 = 2 * lambda_j**r,

with the inverse

    lambda_j = (tau_j**2 / 2)**(1/r),
    xi_j     = v_j * |tau_j|**(1/r) / 2**(1/(2r)).

In these coordinates the posterior factors as exp(-Phi(v, tau)) times a
standard Gaussian on R^(2n), where the potential

    Phi(v, tau) = 0.5 * ||b_hat - a_hat D_vartheta^(1/2)
                         (v * |tau|**(1/r)) / 2**(1/(2r))||**2
                  - (2 beta - 1) * sum log|tau_j|

absorbs everything non-Gaussian.  Both kernels below preserve the
Gaussian reference measure, so the Metropolis-Hastings ratio involves
only potential differences: one forward-map product per proposal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import InverseProblem
from .hypermodel import Hypermodel

__all__ = [
    "ReparamPoint",
    "ChainConfig",
    "SampleSet",
    "PhysicalDraws",
    "to_reparam",
    "from_reparam",
    "potential",
    "jacobian_logdet",
    "pcn_step",
    "radial_pcn_step",
    "run_chain",
    "samples_to_physical",
]

KERNELS = ("pcn", "radial_pcn")


@dataclass
class ReparamPoint:
    """Unconstrained chain coordinates, one (v_j, tau_j) pair per component."""

    v: np.ndarray
    tau: np.ndarray

    def copy(self) -> "ReparamPoint":
        return ReparamPoint(self.v.copy(), self.tau.copy())


@dataclass(frozen=True)
class ChainConfig:
    """Kernel selection and run length for one chain.

    h is the angular/global step parameter; k the radial step (only used
    by the radial kernel).  Every `thin`-th state is stored, repeats on
    rejection included.
    """

    kernel: str
    h: float
    total_steps: int
    thin: int = 1
    seed: int = 0
    k: float | None = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        if not 0.0 < self.h < 1.0:
            raise ValueError("step parameter h must lie in (0, 1)")
        if self.kernel == "radial_pcn":
            if self.k is None or not 0.0 < self.k < 1.0:
                raise ValueError("radial step k must lie in (0, 1)")
        if self.total_steps < 1 or self.thin < 1:
            raise ValueError("total_steps and thin must be positive")
        if self.total_steps % self.thin != 0:
            raise ValueError("thin must divide total_steps")


@dataclass
class SampleSet:
    """Thinned chain output: stored (v, tau) rows plus acceptance counts.

    `phi` keeps the potential at each stored state so staleness of the
    cached value can be audited after the run.
    """

    draws: np.ndarray
    phi: np.ndarray
    accept_count: int
    total_proposals: int
    config: ChainConfig
    init: ReparamPoint

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.total_proposals

    @property
    def n_components(self) -> int:
        return self.draws.shape[1] // 2

    def v_draws(self) -> np.ndarray:
        return self.draws[:, : self.n_components]

    def tau_draws(self) -> np.ndarray:
        return self.draws[:, self.n_components :]


@dataclass
class PhysicalDraws:
    """Stored draws mapped back to physical variables.

    Rows where the inverse map degenerates (some tau_j = 0) are kept but
    marked in `excluded` rather than dropped.
    """

    x: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    excluded: np.ndarray


def to_reparam(xi: np.ndarray, lam: np.ndarray, r: float) -> ReparamPoint:
    """Map (xi, lambda) to chain coordinates, taking the positive tau branch."""
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("lambda must be positive")
    return ReparamPoint(v=xi / np.sqrt(lam), tau=np.sqrt(2.0 * lam**r))


def from_reparam(point: ReparamPoint, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Map chain coordinates back to (xi, lambda).

    tau_j = 0 is a measure-zero boundary: for r < 0 it yields an infinite
    variance marker, for r > 0 it collapses the component to zero.  Either
    way the point carries zero posterior density (the potential is +inf).
    """
    v = np.asarray(point.v, dtype=float)
    tau = np.asarray(point.tau, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        lam = (0.5 * tau**2) ** (1.0 / r)
        xi = v * np.abs(tau) ** (1.0 / r) / 2.0 ** (0.5 / r)
    return xi, lam


def potential(point: ReparamPoint, prob: InverseProblem, hm: Hypermodel) -> float:
    """Non-Gaussian part of the negative log posterior at a chain point.

    Returns +inf when any tau_j vanishes (the coordinate boundary).
    """
    v = point.v
    tau = point.tau
    if np.any(tau == 0.0):
        return math.inf
    abs_tau = np.abs(tau)
    scale = 2.0 ** (-0.5 / hm.r) * np.sqrt(hm.vartheta_vec(prob.n))
    resid = prob.b_hat - prob.a_hat @ (scale * v * abs_tau ** (1.0 / hm.r))
    return float(
        0.5 * resid @ resid - (2.0 * hm.beta - 1.0) * np.sum(np.log(abs_tau))
    )


def jacobian_logdet(v, tau, r: float):
    """Log |det| of the per-component map (tau, v) -> (lambda, xi):

        log|J| = log(2**(1 - 3/(2r)) / |r|) + (3/r - 1) * log|tau|.

    The determinant does not depend on v (the v-column of the Jacobian is
    triangular against the tau-column); the argument is kept so call sites
    read like the underlying two-variable map.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau == 0.0):
        raise ValueError("tau must be nonzero")
    const = (1.0 - 1.5 / r) * math.log(2.0) - math.log(abs(r))
    out = const + (3.0 / r - 1.0) * np.log(np.abs(tau))
    return float(out) if out.ndim == 0 else out


def pcn_step(
    current: ReparamPoint,
    phi_current: float,
    h: float,
    prob: InverseProblem,
    hm: Hypermodel,
    rng: np.random.Generator,
) -> tuple[ReparamPoint, float, bool]:
    """One preconditioned Crank-Nicolson proposal and accept/reject decision.

    Proposal: y = sqrt(1 - h**2) * current + h * w with w ~ N(0, I_2n);
    acceptance probability min(1, exp(Phi(current) - Phi(y))).  Exactly one
    potential evaluation; on rejection the current point is returned.
    """
    if not 0.0 < h <= 1.0:
        raise ValueError("step parameter h must lie in (0, 1]")
    n = current.v.shape[0]
    keep = math.sqrt(1.0 - h * h)
    w = rng.standard_normal(2 * n)
    proposal = ReparamPoint(
        v=keep * current.v + h * w[:n],
        tau=keep * current.tau + h * w[n:],
    )
    phi_prop = potential(proposal, prob, hm)
    if math.log(rng.random()) < phi_current - phi_prop:
        return proposal, phi_prop, True
    return current, phi_current, False


def radial_pcn_step(
    current: ReparamPoint,
    phi_current: float,
    h: float,
    k: float,
    prob: InverseProblem,
    hm: Hypermodel,
    rng: np.random.Generator,
) -> tuple[ReparamPoint, float, bool]:
    """One radial-angular proposal: per pair (tau_j, v_j), the polar radius
    moves by a Rayleigh-preserving recursion with step k and the phase by a
    Gaussian walk with step h.

    radius' = || sqrt(1 - k**2) * (radius, 0) + k * (w1, w2) ||
    phase'  = phase + h * omega

    Written as a vector norm the radicand is nonnegative by construction.
    All pairs are accepted or rejected jointly with the same potential-
    difference ratio as the plain kernel; both sub-moves preserve the
    standard two-dimensional Gaussian reference measure.
    """
    if not (h > 0.0 and 0.0 < k < 1.0):
        raise ValueError("need h > 0 and k in (0, 1)")
    n = current.v.shape[0]
    radius = np.hypot(current.tau, current.v)
    phase = np.arctan2(current.v, current.tau)
    w = rng.standard_normal((n, 2))
    omega = rng.standard_normal(n)
    radius_new = np.hypot(math.sqrt(1.0 - k * k) * radius + k * w[:, 0], k * w[:, 1])
    phase_new = phase + h * omega
    proposal = ReparamPoint(
        v=radius_new * np.sin(phase_new),
        tau=radius_new * np.cos(phase_new),
    )
    phi_prop = potential(proposal, prob, hm)
    if math.log(rng.random()) < phi_current - phi_prop:
        return proposal, phi_prop, True
    return current, phi_current, False


def run_chain(
    init: ReparamPoint,
    cfg: ChainConfig,
    prob: InverseProblem,
    hm: Hypermodel,
) -> SampleSet:
    """Run the configured kernel from `init`, storing every thin-th state.

    The generator is counter-based (Philox keyed by the seed), so the
    produced sample is bit-reproducible from (init, config) alone.
    """
    v0 = np.asarray(init.v, dtype=float)
    tau0 = np.asarray(init.tau, dtype=float)
    if v0.shape != tau0.shape or v0.ndim != 1:
        raise ValueError("init components must be vectors of equal length")
    current = ReparamPoint(v0.copy(), tau0.copy())
    phi_current = potential(current, prob, hm)
    if not math.isfinite(phi_current):
        raise ValueError("initial point has non-finite potential")

    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    n = v0.shape[0]
    stored = cfg.total_steps // cfg.thin
    draws = np.empty((stored, 2 * n))
    phis = np.empty(stored)
    accept_count = 0

    for step in range(1, cfg.total_steps + 1):
        if cfg.kernel == "pcn":
            current, phi_current, accepted = pcn_step(
                current, phi_current, cfg.h, prob, hm, rng
            )
        else:
            current, phi_current, accepted = radial_pcn_step(
                current, phi_current, cfg.h, cfg.k, prob, hm, rng
            )
        accept_count += accepted
        if step % cfg.thin == 0:
            row = step // cfg.thin - 1
            draws[row, :n] = current.v
            draws[row, n:] = current.tau
            phis[row] = phi_current

    return SampleSet(
        draws=draws,
        phi=phis,
        accept_count=accept_count,
        total_proposals=cfg.total_steps,
        config=cfg,
        init=ReparamPoint(v0, tau0),
    )


def samples_to_physical(
    samples: SampleSet, vartheta, r: float, diff_mat: np.ndarray
) -> PhysicalDraws:
    """Map stored draws to x = D_vartheta^(1/2) xi, theta = vartheta * lam
    and z = L^{-1} x.

    Degenerate rows (any tau_j = 0) are flagged in `excluded`, never
    silently dropped.
    """
    n = samples.n_components
    v = samples.v_draws()
    tau = samples.tau_draws()
    vt = np.broadcast_to(np.asarray(vartheta, dtype=float), (n,))
    xi, lam = from_reparam(ReparamPoint(v=v, tau=tau), r)
    x = np.sqrt(vt) * xi
    theta = vt * lam
    excluded = ~np.all(np.isfinite(x) & np.isfinite(theta), axis=1)
    # L is unit lower triangular; forward substitution recovers the signal
    z = np.full_like(x, np.nan)
    ok = ~excluded
    if np.any(ok):
        z[ok] = np.linalg.solve(diff_mat, x[ok].T).T
    return PhysicalDraws(x=x, theta=theta, z=z, excluded=excluded)
