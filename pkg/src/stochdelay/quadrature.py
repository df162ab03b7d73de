"""Quadrature helpers for the singular difference kernels.

The kernels k(x-y), l(x-y) carry an integrable 1/sqrt(x-y) diagonal
singularity, so plain node-value quadrature of their Volterra integrals does
not converge at second order.  The routines here integrate the kernel
exactly, mode by mode, against piecewise-linear data (product integration);
profiles are cubically upsampled first so the data error is far below the
grid's nominal O(h^2).
"""

from __future__ import annotations

import numpy as np
from scipy.special import polygamma

from .kernels import TAIL_MODES, FourierCoeffs

UPSAMPLE = 4


def _phi_fall(x: np.ndarray) -> np.ndarray:
    """(e^x - 1 - x)/x^2, series near 0."""
    small = np.abs(x) < 1e-5
    xs = np.where(small, 1.0, x)
    out = (np.expm1(xs) - xs) / (xs * xs)
    return np.where(small, 0.5 + x / 6.0 + x * x / 24.0, out)


def _phi_rise(x: np.ndarray) -> np.ndarray:
    """((x-1)e^x + 1)/x^2, series near 0."""
    small = np.abs(x) < 1e-5
    xs = np.where(small, 1.0, x)
    out = ((xs - 1.0) * np.expm1(xs) + xs) / (xs * xs)
    return np.where(small, 0.5 + x / 3.0 + x * x / 8.0, out)


def convolution_weights(coeffs: FourierCoeffs, side: str, h: float, ncells: int):
    """Exact cell integrals of the k or l kernel against linear hats.

    Returns (G, R) with h*G[m] = integral of kernel(s)*(1-(s-mh)/h) over cell m
    and h*R[m] the rising-hat counterpart, so that

        int_0^{ih} kernel(i h - y) f(y) dy
            = h * sum_{m<i} ( G[m] f[i-m] + R[m] f[i-m-1] )

    for piecewise-linear f.  Mode sums use the computed head, the two-term
    coefficient asymptote up to TAIL_MODES, and a closed polygamma correction
    for the remaining diagonal-cell mass (those modes decay within ~1e-8 of
    the diagonal, entirely inside cell 0).
    """
    cfg = coeffs.cfg
    head = coeffs.shift_coefs(side)
    tail = coeffs.tail_coefs(side)
    coef = np.concatenate((head, tail))
    n = np.arange(1, TAIL_MODES + 1)
    base = -cfg.d0 * (n * np.pi) ** 2
    rates = base + (cfg.d0 * cfg.lam if side == "k" else 0.0)

    al = rates * h
    fall = _phi_fall(al)
    rise = _phi_rise(al)
    growth = np.clip(np.outer(np.arange(ncells), al), -745.0, 50.0)
    ead = np.exp(growth)
    G = ead.dot(coef * fall)
    R = ead.dot(coef * rise)

    b = cfg.d0 * np.pi**2
    s1 = float(polygamma(1, TAIL_MODES + 1)) / b        # sum_{n>NT} rate_n^-1
    s2 = float(polygamma(3, TAIL_MODES + 1)) / (6 * b * b)
    G[0] += (-cfg.lam) * (s1 - s2 / h) / h
    R[0] += (-cfg.lam) * (s2 / h) / h
    return G, R


def cubic_upsample(f: np.ndarray, factor: int = UPSAMPLE) -> np.ndarray:
    """Refine a uniform-grid function by 4-point Lagrange interpolation."""
    f = np.asarray(f, dtype=float)
    m = len(f) - 1
    if m < 3:
        raise ValueError("need at least 4 nodes to upsample")
    out = np.empty(m * factor + 1)
    out[::factor] = f
    for r in range(1, factor):
        t = r / factor
        c0 = -t * (t - 1.0) * (t - 2.0) / 6.0
        c1 = (t * t - 1.0) * (t - 2.0) / 2.0
        c2 = -t * (t + 1.0) * (t - 2.0) / 2.0
        c3 = t * (t * t - 1.0) / 6.0
        out[factor + r:(m - 1) * factor + r:factor] = (
            c0 * f[:m - 2] + c1 * f[1:m - 1] + c2 * f[2:m] + c3 * f[3:m + 1])
        out[r] = _lagrange4(f[0:4], 0.0 + t)
        out[(m - 1) * factor + r] = _lagrange4(f[m - 3:m + 1], 2.0 + t)
    return out


def _lagrange4(y4, s: float) -> float:
    """Cubic through nodes at 0,1,2,3 evaluated at s."""
    l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0
    l1 = s * (s - 2.0) * (s - 3.0) / 2.0
    l2 = -s * (s - 1.0) * (s - 3.0) / 2.0
    l3 = s * (s - 1.0) * (s - 2.0) / 6.0
    return l0 * y4[0] + l1 * y4[1] + l2 * y4[2] + l3 * y4[3]


def volterra_convolve(f: np.ndarray, G: np.ndarray, R: np.ndarray,
                      h_fine: float, factor: int = UPSAMPLE) -> np.ndarray:
    """int_0^{x_i} kernel(x_i - y) f(y) dy on the coarse grid of f.

    f is upsampled by `factor`; G/R must have been built for the fine spacing
    h_fine = h_coarse/factor with at least len(f_fine)-1 cells.
    """
    ff = cubic_upsample(f, factor)
    mf = len(ff) - 1
    if len(G) < mf or len(R) < mf:
        raise ValueError("convolution weights built for a smaller grid")
    # out[i] = h * ( sum_{m<i} G[m] ff[i-m] + sum_{m<i} R[m] ff[i-m-1] )
    conv_g = np.convolve(ff, G[:mf])
    conv_r = np.convolve(ff, R[:mf])
    out = np.zeros(mf + 1)
    idx = np.arange(1, mf + 1)
    out[1:] = conv_g[idx] + conv_r[idx - 1]
    # convolve includes the j=0 (y=0) term pairing with G[i], which falls
    # outside the m <= i-1 cell range; remove it where G[i] exists.
    out[1:mf] -= ff[0] * G[1:mf]
    return h_fine * out[::factor]


def trapezoid_weights(npts: int, h: float) -> np.ndarray:
    w = np.full(npts, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def corrected_trapezoid(g: np.ndarray, h: float) -> float:
    """Composite trapezoid with the h^2/12 endpoint-slope correction.

    One-sided cubic differences estimate g' at the ends, upgrading smooth
    integrands to O(h^4) without touching the node values.
    """
    m = len(g) - 1
    base = float(np.dot(trapezoid_weights(m + 1, h), g))
    if m < 3:
        return base
    d0 = (-11.0 * g[0] + 18.0 * g[1] - 9.0 * g[2] + 2.0 * g[3]) / (6.0 * h)
    d1 = (11.0 * g[m] - 18.0 * g[m - 1] + 9.0 * g[m - 2] - 2.0 * g[m - 3]) / (6.0 * h)
    return base - (h * h / 12.0) * (d1 - d0)


def volterra_rows_corrected(kernel_tri: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Row-wise int_0^{x_i} K(x_i,y) f(y) dy for a smooth lower-triangular kernel."""
    m = len(f) - 1
    out = np.zeros(m + 1)
    for i in range(1, m + 1):
        out[i] = corrected_trapezoid(kernel_tri[i, :i + 1] * f[:i + 1], h)
    return out


def sine_moments(f: np.ndarray, h: float, n_terms: int) -> np.ndarray:
    """int_0^1 sin(n pi y) f(y) dy, n = 1..N, endpoint-corrected trapezoid."""
    m = len(f) - 1
    y = np.linspace(0.0, 1.0, m + 1)
    n = np.arange(1, n_terms + 1)
    base = np.sin(np.outer(n, np.pi * y)).dot(trapezoid_weights(m + 1, h) * f)
    # g' at the ends of g = sin(n pi y) f(y): only the n*pi*cos term survives.
    corr = -(h * h / 12.0) * (n * np.pi * (((-1.0) ** n) * f[m] - f[0]))
    return base + corr
