"""Generalized gamma hypermodels and the component-wise variance updates.

A hypermodel places independent generalized gamma priors on the variances
of a conditionally Gaussian prior:

    pi(theta_j) = |r| / (Gamma(beta) * vartheta_j)
                  * (theta_j / vartheta_j)**(r*beta - 1)
                  * exp(-(theta_j / vartheta_j)**r)

with shape exponent r != 0, shape beta > 0 and scales vartheta_j > 0.
In the non-dimensional variables (xi, lambda) = (x / sqrt(vartheta),
theta / vartheta) the per-component variance objective is

    psi(lam) = xi**2 / (2 lam) + lam**r - (r beta - 3/2) log(lam),

whose unique minimizer is the variance update used by the IAS solver.
This module provides the closed-form updates (r = +-1), the ODE-based
update for general r, and the two-condition matching that derives a
hypermodel with a new exponent from a gamma (r = 1) reference model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Hypermodel",
    "UnsupportedClosedFormError",
    "MatchingInfeasibleError",
    "InfiniteMeanError",
    "gg_log_pdf",
    "marginal_mean",
    "lambda_update_closed",
    "lambda_update_ode",
    "lambda_update",
    "optimality_residual",
    "match_hyperparameters",
    "matching_residuals",
]


class UnsupportedClosedFormError(ValueError):
    """Closed-form variance update requested for an exponent without one."""


class MatchingInfeasibleError(RuntimeError):
    """No admissible shape parameter satisfies both matching conditions."""


class InfiniteMeanError(ValueError):
    """Marginal variance mean requested for a model where it diverges."""


@dataclass(frozen=True)
class Hypermodel:
    """Generalized gamma hyperprior parameters.

    Parameters
    ----------
    r: float
        Shape exponent, nonzero.  r = 1 is the gamma distribution,
        r = -1 the inverse gamma distribution.
    beta: float
        Shape parameter, positive.
    vartheta: float or ndarray
        Scale parameter(s), positive.  A scalar broadcasts over all
        components.
    """

    r: float
    beta: float
    vartheta: float | np.ndarray = 1.0

    def __post_init__(self):
        if self.r == 0.0 or not math.isfinite(self.r):
            raise ValueError("shape exponent r must be nonzero and finite")
        if not self.beta > 0.0:
            raise ValueError("shape parameter beta must be positive")
        vt = np.asarray(self.vartheta, dtype=float)
        if np.any(vt <= 0.0) or not np.all(np.isfinite(vt)):
            raise ValueError("scale parameter vartheta must be positive and finite")

    def vartheta_vec(self, n: int) -> np.ndarray:
        """Scale parameters as a length-n vector (broadcasting a scalar)."""
        vt = np.asarray(self.vartheta, dtype=float)
        if vt.ndim == 0:
            return np.full(n, float(vt))
        if vt.shape != (n,):
            raise ValueError(f"vartheta has length {vt.shape}, expected {n}")
        return vt

    def lambda_at_zero(self) -> float:
        """Variance update at xi = 0: (beta - 3/(2 r))**(1/r).

        Requires beta - 3/(2 r) > 0, which holds automatically for r < 0.
        """
        base = self.beta - 1.5 / self.r
        if base <= 0.0:
            raise ValueError(
                f"variance update requires beta > 3/(2 r): "
                f"beta={self.beta}, r={self.r}"
            )
        return base ** (1.0 / self.r)


def _vartheta_at(hm: Hypermodel, index: int) -> float:
    vt = np.asarray(hm.vartheta, dtype=float)
    return float(vt) if vt.ndim == 0 else float(vt[index])


def gg_log_pdf(theta: float, hm: Hypermodel, index: int = 0) -> float:
    """Log density of the generalized gamma hyperprior at theta > 0.

    `index` selects the scale component when vartheta is a vector.
    """
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    vt = _vartheta_at(hm, index)
    z = theta / vt
    return (
        math.log(abs(hm.r))
        - float(gammaln(hm.beta))
        - math.log(vt)
        + (hm.r * hm.beta - 1.0) * math.log(z)
        - z**hm.r
    )


def marginal_mean(hm: Hypermodel):
    """Marginal mean of theta: vartheta * Gamma(beta + 1/r) / Gamma(beta).

    Raises InfiniteMeanError when beta + 1/r <= 0 and the expectation
    diverges.
    """
    if hm.beta + 1.0 / hm.r <= 0.0:
        raise InfiniteMeanError(
            f"E[theta] diverges for beta={hm.beta}, r={hm.r} "
            "(needs beta + 1/r > 0)"
        )
    ratio = math.exp(float(gammaln(hm.beta + 1.0 / hm.r) - gammaln(hm.beta)))
    mean = np.asarray(hm.vartheta, dtype=float) * ratio
    return float(mean) if mean.ndim == 0 else mean


def lambda_update_closed(xi, hm: Hypermodel):
    """Closed-form variance update, available for r = 1 and r = -1.

    r = 1 (gamma, eta = beta - 3/2 > 0):
        lam = (eta + sqrt(eta**2 + 2 xi**2)) / 2
    r = -1 (inverse gamma, kappa = beta + 3/2):
        lam = (xi**2 / 2 + 1) / kappa

    Accepts a scalar or an array of xi values.
    """
    xi = np.asarray(xi, dtype=float)
    if hm.r == 1.0:
        eta = hm.beta - 1.5
        if eta <= 0.0:
            raise ValueError("r = 1 update requires beta > 3/2")
        lam = 0.5 * (eta + np.sqrt(eta**2 + 2.0 * xi**2))
    elif hm.r == -1.0:
        kappa = hm.beta + 1.5
        lam = (0.5 * xi**2 + 1.0) / kappa
    else:
        raise UnsupportedClosedFormError(
            f"no closed-form update for r={hm.r}; use lambda_update_ode"
        )
    return float(lam) if lam.ndim == 0 else lam


def _update_rhs(t: float, phi: float, r: float) -> float:
    # d phi / d t along the minimizer curve; the denominator stays positive
    # because 2 r**2 phi**(r+1) >= 2 r**2 phi(0)**(r+1) > 0 near t = 0.
    return 2.0 * t * phi / (2.0 * r * r * phi ** (r + 1.0) + t * t)


def _polish_update(t: float, lam: float, r: float, rb: float) -> float:
    # Newton refinement of the stationarity equation in the monotone form
    # r lam**r - t**2/(2 lam) - (r beta - 3/2) = 0, whose left side is
    # strictly increasing in lam, so the root is unique.
    for _ in range(6):
        val = r * lam**r - 0.5 * t * t / lam - rb
        slope = r * r * lam ** (r - 1.0) + 0.5 * t * t / (lam * lam)
        step = val / slope
        new = lam - step
        while new <= 0.0:
            step *= 0.5
            new = lam - step
        lam = new
        if abs(step) <= 1e-15 * lam:
            break
    return lam


_SUBSTEP_CAP = 1e-3
_SUBSTEP_SCALE = 30.0


def lambda_update_ode(xi_abs_sorted, hm: Hypermodel) -> np.ndarray:
    """Variance update for general r by marching the minimizer ODE.

    The update lam = phi(|xi|) solves

        phi'(t) = 2 t phi / (2 r**2 phi**(r+1) + t**2),
        phi(0)  = (beta - 3/(2 r))**(1/r),

    integrated with a classical fourth-order scheme through the sorted
    evaluation points (substeps capped at 1e-3 and refined near t = 0
    where the curve turns on the scale of phi(0)), then polished by a
    Newton step on the stationarity equation.

    Parameters
    ----------
    xi_abs_sorted: array
        Nonnegative evaluation points in ascending order.

    Returns
    -------
    ndarray of positive updates, aligned with the input order.
    """
    t_targets = np.asarray(xi_abs_sorted, dtype=float)
    if t_targets.ndim != 1:
        raise ValueError("expected a one-dimensional array of |xi| values")
    if t_targets.size and (t_targets[0] < 0.0 or np.any(np.diff(t_targets) < 0.0)):
        raise ValueError("evaluation points must be nonnegative and ascending")
    if not np.all(np.isfinite(t_targets)):
        raise ValueError("evaluation points must be finite")

    r, beta = hm.r, hm.beta
    rb = r * beta - 1.5
    phi0 = hm.lambda_at_zero()
    # width of the region where the curve departs from phi(0)
    layer = math.sqrt(2.0) * abs(r) * phi0 ** (0.5 * (r + 1.0))

    out = np.empty_like(t_targets)
    t = 0.0
    phi = phi0
    for i, t_next in enumerate(t_targets):
        while t_next - t > 1e-15 * max(1.0, t_next):
            h = min(_SUBSTEP_CAP, max(t, layer) / _SUBSTEP_SCALE, t_next - t)
            k1 = _update_rhs(t, phi, r)
            k2 = _update_rhs(t + 0.5 * h, phi + 0.5 * h * k1, r)
            k3 = _update_rhs(t + 0.5 * h, phi + 0.5 * h * k2, r)
            k4 = _update_rhs(t + h, phi + h * k3, r)
            phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            if not (math.isfinite(phi) and phi > 0.0):
                raise RuntimeError(
                    f"variance-update integration failed at t={t} (r={r}, beta={beta})"
                )
        t = t_next
        phi = _polish_update(t_next, phi, r, rb)
        out[i] = phi
    return out


def lambda_update(xi, hm: Hypermodel):
    """Variance update for arbitrary (signed, unordered) xi values.

    Dispatches to the closed form for r = +-1 and to the ODE march
    otherwise (sorting |xi| and undoing the permutation).
    """
    xi = np.asarray(xi, dtype=float)
    if hm.r in (1.0, -1.0):
        return lambda_update_closed(xi, hm)
    flat = np.atleast_1d(xi)
    order = np.argsort(np.abs(flat), kind="stable")
    lam_sorted = lambda_update_ode(np.abs(flat)[order], hm)
    lam = np.empty_like(lam_sorted)
    lam[order] = lam_sorted
    if xi.ndim == 0:
        return float(lam[0])
    return lam


def optimality_residual(xi, lam, hm: Hypermodel):
    """Gradient of the per-component variance objective at (xi, lam).

    The objective is xi**2/(2 lam) + lam**r - (r beta - 3/2) log(lam);
    the residual vanishes exactly at the variance update.
    """
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("lambda must be positive")
    res = (
        -0.5 * xi**2 / lam**2
        + hm.r * lam ** (hm.r - 1.0)
        - (hm.r * hm.beta - 1.5) / lam
    )
    return float(res) if res.ndim == 0 else res


def _log_condition_gap(beta: float, r: float, eta: float) -> float:
    # log of (scale from the zero-point condition) minus log of (scale
    # from the marginal-mean condition); the matched beta is its root.
    c_zero = math.log(eta) - (1.0 / r) * math.log(beta - 1.5 / r)
    c_mean = math.log(eta + 1.5) + float(gammaln(beta) - gammaln(beta + 1.0 / r))
    return c_zero - c_mean


def match_hyperparameters(
    r_target: float, beta1: float, vartheta1: float
) -> Hypermodel:
    """Derive a matched hypermodel with exponent r_target from a gamma
    (r = 1) reference model (beta1, vartheta1).

    The two matching conditions are

        vartheta * (beta - 3/(2 r))**(1/r) = vartheta1 * eta,
        vartheta * Gamma(beta + 1/r) / Gamma(beta) = vartheta1 * (eta + 3/2),

    with eta = beta1 - 3/2 > 0: the variance update at xi = 0 and the
    marginal mean of theta both agree with the reference model.  Closed
    forms are used for r in {1/2, -1/2, -1}; other exponents are solved
    by bisection in beta.  For r = -1/2 the larger quadratic root is
    taken: the smaller one violates beta + 1/r > 0 and has no finite
    marginal mean.
    """
    if r_target == 0.0 or not math.isfinite(r_target):
        raise ValueError("target exponent must be nonzero and finite")
    eta = beta1 - 1.5
    if eta <= 0.0:
        raise ValueError("reference model requires beta1 > 3/2")
    if not vartheta1 > 0.0:
        raise ValueError("reference scale vartheta1 must be positive")

    if r_target == 1.0:
        return Hypermodel(1.0, beta1, vartheta1)

    mm = 1.0 + 1.5 / eta
    if r_target == 0.5:
        beta = (6.0 * mm + 1.0 + math.sqrt(48.0 * mm + 1.0)) / (2.0 * (mm - 1.0))
        vartheta = vartheta1 * eta / (beta - 3.0) ** 2
    elif r_target == -0.5:
        beta = (3.0 * mm + 6.0 + math.sqrt(mm * mm + 80.0 * mm)) / (2.0 * (mm - 1.0))
        vartheta = vartheta1 * eta * (beta + 3.0) ** 2
    elif r_target == -1.0:
        beta = 1.0 + 5.0 * eta / 3.0
        vartheta = vartheta1 * eta * (beta + 1.5)
    else:
        beta = _match_beta_bisect(r_target, eta)
        vartheta = vartheta1 * eta / (beta - 1.5 / r_target) ** (1.0 / r_target)
    return Hypermodel(r_target, beta, vartheta)


def _match_beta_bisect(r: float, eta: float) -> float:
    # validity boundary: beta > 3/(2 r) for r > 0 (zero-point condition),
    # beta > -1/r for r < 0 (finite marginal mean)
    floor = max(1.5 / r if r > 0.0 else 0.0, -1.0 / r if r < 0.0 else 0.0, 0.0)
    lo = floor + 1e-10 * max(1.0, floor)
    width = max(1.0, floor)
    hi = floor + width
    for _ in range(200):
        if _log_condition_gap(hi, r, eta) < 0.0:
            break
        width *= 2.0
        hi = floor + width
    else:
        raise MatchingInfeasibleError(
            f"no bracketing shape parameter found for r={r}, eta={eta}"
        )
    if _log_condition_gap(lo, r, eta) < 0.0:
        raise MatchingInfeasibleError(
            f"matching conditions have no root above the validity "
            f"boundary for r={r}, eta={eta}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap = _log_condition_gap(mid, r, eta)
        if abs(gap) <= 1e-12:
            return mid
        if gap > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def matching_residuals(
    hm: Hypermodel, beta1: float, vartheta1: float
) -> tuple[float, float]:
    """Relative residuals of the two matching conditions for `hm`
    against the gamma reference (beta1, vartheta1)."""
    eta = beta1 - 1.5
    vt = float(np.asarray(hm.vartheta, dtype=float))
    zero_point = vt * hm.lambda_at_zero()
    res_zero = zero_point / (vartheta1 * eta) - 1.0
    res_mean = float(marginal_mean(Hypermodel(hm.r, hm.beta, vt))) / (
        vartheta1 * (eta + 1.5)
    ) - 1.0
    return res_zero, res_mean
