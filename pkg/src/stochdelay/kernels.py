"""Backstepping kernels for the boundary-delay compensator.

The direct transform kernels (p, gamma, k) map the unstable plant/actuator
pair onto a stable target system; the inverse kernels (q, eta, l) map back.
p and q are closed-form Bessel expressions on the triangle 0 <= y <= x <= 1;
the remaining four are sine series driven by the Fourier coefficients of
p(1,.) and q(1,.).

Numerical notes
---------------
The sine coefficients of p(1,.) decay only like 1/n because p(1,1) != 0, so
the k/l series have a non-summable diagonal (k(x,y) ~ -C/sqrt(x-y)).  All
slowly-converging sums here are therefore split into an analytic boundary
part (value and second derivative of the generating function at y=0,1, with
elementary closed-form resummations) plus a residual whose coefficients decay
like n^-5.  This makes plain composite-trapezoid quadrature of the residual
spectrally accurate, gives the exact finite part of the kernel diagonal, and
supplies analytic tails for Parseval-type sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

__all__ = [
    "KernelConfig",
    "FourierCoeffs",
    "KernelTables",
    "eval_p",
    "eval_q",
    "compute_p1n",
    "eval_gamma",
    "eval_eta",
    "eval_kappa",
    "eval_l",
    "build_tables",
]

# Modes appended to the computed head via the two-term coefficient asymptote
# when assembling quadrature weights; beyond this the remaining mass has a
# closed polygamma form (see quadrature.convolution_weights).
TAIL_MODES = 4000


# ---------------------------------------------------------------------------
# Bessel-ratio series
# ---------------------------------------------------------------------------

def _i1_ratio(w):
    """I1(sqrt(w))/sqrt(w), entire in w; equals 1/2 at w=0."""
    w = np.asarray(w, dtype=float)
    term = np.full(w.shape, 0.5)
    total = term.copy()
    for m in range(1, 80):
        term = term * w / (4.0 * m * (m + 1))
        total += term
        if np.max(np.abs(term)) <= 1e-16 * np.max(np.abs(total)):
            break
    return total


def _j1_ratio(w):
    """J1(sqrt(w))/sqrt(w); alternating variant of _i1_ratio."""
    w = np.asarray(w, dtype=float)
    term = np.full(w.shape, 0.5)
    total = term.copy()
    for m in range(1, 80):
        term = term * (-w) / (4.0 * m * (m + 1))
        total += term
        if np.max(np.abs(term)) <= 1e-16 * np.max(np.abs(total)):
            break
    return total


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelConfig:
    """Reaction coefficient, reference delay and series/quadrature sizes."""

    lam: float
    d0: float
    n_terms: int = 200
    quad_points: int = 0  # 0 -> max(2001, 10*n_terms)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.d0 > 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if self.n_terms < 1:
            raise ValueError(f"n_terms must be >= 1, got {self.n_terms}")
        qp = self.quad_points if self.quad_points else max(2001, 10 * self.n_terms)
        if qp < 2 * self.n_terms:
            raise ValueError(
                f"quad_points={qp} undersamples sin(n*pi*x) for n_terms={self.n_terms}"
            )
        object.__setattr__(self, "quad_points", qp)


# ---------------------------------------------------------------------------
# Closed-form kernels on the triangle
# ---------------------------------------------------------------------------

def _check_triangle(x: float, y: float):
    if not (0.0 <= y <= x <= 1.0):
        raise ValueError(f"require 0 <= y <= x <= 1, got x={x}, y={y}")


def eval_p(x: float, y: float, cfg: KernelConfig) -> float:
    """Direct Volterra kernel p(x,y) = -lam*y*I1(z)/z, z = sqrt(lam(x^2-y^2)).

    The diagonal y=x is the removable limit I1(z)/z -> 1/2.
    """
    _check_triangle(x, y)
    return float(-cfg.lam * y * _i1_ratio(cfg.lam * (x * x - y * y)))


def eval_q(x: float, y: float, cfg: KernelConfig) -> float:
    """Inverse Volterra kernel q(x,y) = -lam*y*J1(z)/z on the same triangle."""
    _check_triangle(x, y)
    return float(-cfg.lam * y * _j1_ratio(cfg.lam * (x * x - y * y)))


def _edge_row(side: str, y, cfg: KernelConfig):
    """p(1,y) or q(1,y) for array y."""
    y = np.asarray(y, dtype=float)
    w = cfg.lam * (1.0 - y * y)
    ratio = _i1_ratio(w) if side == "p" else _j1_ratio(w)
    return -cfg.lam * y * ratio


def _edge_ypp(side: str, y, cfg: KernelConfig):
    """Second y-derivative of p(1,y) (or q(1,y)).

    With f(w) the Bessel ratio and w = lam*(1-y^2):
    d2/dy2 [-lam*y*f(w)] = 6*lam^2*y*f'(w) - 4*lam^3*y^3*f''(w),
    and f', f'' are the term-shifted ratio series.
    """
    y = np.asarray(y, dtype=float)
    lam = cfg.lam
    w = lam * (1.0 - y * y)
    sign = 1.0 if side == "p" else -1.0
    # f'(w) = sum_{m>=1} m w^{m-1} c_m with c_m = (+-1)^m / (2^{2m+1} m! (m+1)!)
    fp = np.zeros_like(w)
    fpp = np.zeros_like(w)
    term = np.full(w.shape, 0.5)  # c_0 w^0
    cm = 0.5
    wp = np.ones_like(w)
    for m in range(1, 80):
        cm = cm * sign / (4.0 * m * (m + 1))
        fp += m * cm * wp                      # m * c_m * w^{m-1}
        if m >= 2:
            fpp += m * (m - 1) * cm * wp_prev  # m(m-1) c_m w^{m-2}
        wp_prev = wp
        wp = wp * w
        if cm * np.max(wp) < 1e-18 and m > 4:
            break
    return 6.0 * lam**2 * y * fp - 4.0 * lam**3 * y**3 * fpp


def _boundary_constants(side: str, cfg: KernelConfig):
    """(value at y=1, second derivative at y=1) of p(1,.) or q(1,.).

    Second derivatives at y=0 vanish identically (odd prefactor y).
    """
    lam = cfg.lam
    h1 = -lam / 2.0
    if side == "p":
        h2 = 3.0 * lam**2 / 8.0 - lam**3 / 48.0
    else:
        h2 = -3.0 * lam**2 / 8.0 - lam**3 / 48.0
    return h1, h2


def _boundary_profile(h1: float, h2: float, y):
    """Closed-form resummation of the boundary-asymptotic coefficient part.

    sum_n [2(-1)^{n+1} h1/(n pi)] sin(n pi y)        = h1 * y
    sum_n [2(-1)^{n}  h2/(n pi)^3] sin(n pi y)       = -h2 * y(1-y^2)/6
    """
    y = np.asarray(y, dtype=float)
    return h1 * y - h2 * y * (1.0 - y * y) / 6.0


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierCoeffs:
    """Sine coefficients of p(1,.) and q(1,.) with their boundary split.

    p1n/q1n are the full coefficients; rp/rq the residuals after removing the
    analytic boundary part (decay ~ n^-5).  h1_p..h2_q are the generating
    functions' boundary value/second derivative used in the split, tails and
    regularized diagonals.
    """

    cfg: KernelConfig
    p1n: np.ndarray
    q1n: np.ndarray
    rp: np.ndarray = field(repr=False)
    rq: np.ndarray = field(repr=False)
    h1_p: float
    h2_p: float
    h1_q: float
    h2_q: float

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.cfg.n_terms + 1)

    def mode_rates(self, side: str) -> np.ndarray:
        """Exponential rate per mode: D0*(lam - n^2 pi^2) for the direct
        kernels, -D0*n^2 pi^2 for the inverse ones."""
        n = self.n
        if side in ("gamma", "k"):
            return self.cfg.d0 * (self.cfg.lam - (n * np.pi) ** 2)
        return -self.cfg.d0 * (n * np.pi) ** 2

    def shift_coefs(self, side: str) -> np.ndarray:
        """Coefficients -(-1)^n n pi c_n of the difference kernels k, l."""
        n = self.n
        base = self.p1n if side == "k" else self.q1n
        return -((-1.0) ** n) * n * np.pi * base

    def tail_coefs(self, side: str, n_hi: int = TAIL_MODES) -> np.ndarray:
        """Two-term asymptote of shift_coefs for modes n_terms+1 .. n_hi."""
        n = np.arange(self.cfg.n_terms + 1, n_hi + 1)
        h2 = self.h2_p if side == "k" else self.h2_q
        return -self.cfg.lam - 2.0 * h2 / (n * np.pi) ** 2

    def diagonal(self, side: str) -> float:
        """Finite part of k(x,x) (side="k") or l(x,x) (side="l").

        The raw diagonal series sum_n -(-1)^n n pi c_n has non-decaying terms;
        its endpoint-regularized value (the one consistent with the boundary
        derivative of the generating function) is lam/2 - sum_n eps_n with
        eps_n = (-1)^n n pi c_n - lam, plus the analytic psi' tail.
        """
        eps = -self.shift_coefs(side) - self.cfg.lam
        h2 = self.h2_p if side == "k" else self.h2_q
        tail = (2.0 * h2 / np.pi**2) * float(polygamma(1, self.cfg.n_terms + 1))
        return self.cfg.lam / 2.0 - (float(np.sum(eps)) + tail)

    def parseval_sum(self, side: str = "p") -> float:
        """sum_n c_n^2 over all modes: computed head + analytic tail.

        Converges to 2*||p(1,.)||_{L2}^2 (rsp. q); the tail uses the same
        boundary asymptote as everything else.
        """
        c = self.p1n if side == "p" else self.q1n
        h1 = self.h1_p if side == "p" else self.h1_q
        h2 = self.h2_p if side == "p" else self.h2_q
        N = self.cfg.n_terms
        s2 = float(polygamma(1, N + 1))          # sum_{n>N} n^-2
        s4 = float(polygamma(3, N + 1)) / 6.0    # sum n^-4
        s6 = float(polygamma(5, N + 1)) / 120.0  # sum n^-6
        tail = (4.0 * h1 * h1 / np.pi**2) * s2 \
            - (8.0 * h1 * h2 / np.pi**4) * s4 \
            + (4.0 * h2 * h2 / np.pi**6) * s6
        return float(np.sum(c * c)) + tail


def compute_p1n(cfg: KernelConfig) -> FourierCoeffs:
    """Sine coefficients c_n = 2*int_0^1 sin(n pi s) p(1,s) ds, and the q side.

    Composite trapezoid on cfg.quad_points nodes, applied to the residual
    after subtracting the boundary profile; the residual vanishes to second
    order at both endpoints, which makes the trapezoid error negligible for
    every mode resolved by the node count.
    """
    N = cfg.n_terms
    s = np.linspace(0.0, 1.0, cfg.quad_points)
    w = np.full(cfg.quad_points, 1.0 / (cfg.quad_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    n = np.arange(1, N + 1)
    sines = np.sin(np.outer(n, np.pi * s))
    tn = 2.0 * ((-1.0) ** (n + 1)) / (n * np.pi)
    un = 2.0 * ((-1.0) ** n) / (n * np.pi) ** 3

    out = {}
    for side in ("p", "q"):
        h1, h2 = _boundary_constants(side, cfg)
        resid_vals = _edge_row(side, s, cfg) - _boundary_profile(h1, h2, s)
        rn = 2.0 * sines.dot(w * resid_vals)
        out[side] = (h1 * tn + h2 * un + rn, rn, h1, h2)

    p1n, rp, h1p, h2p = out["p"]
    q1n, rq, h1q, h2q = out["q"]
    return FourierCoeffs(cfg=cfg, p1n=p1n, q1n=q1n, rp=rp, rq=rq,
                         h1_p=h1p, h2_p=h2p, h1_q=h1q, h2_q=h2q)


# ---------------------------------------------------------------------------
# Series kernels
# ---------------------------------------------------------------------------

_X_EDGE = 1e-12  # below this, use the exact x=0 boundary reconstruction


def _series_eval(x, y, coeffs: FourierCoeffs, side: str):
    """gamma(x,y) (side="gamma") or eta(x,y) (side="eta"), vectorized in y."""
    y = np.asarray(y, dtype=float)
    cfg = coeffs.cfg
    if x < -_X_EDGE or x > 1.0 or np.any(y < 0.0) or np.any(y > 1.0):
        raise ValueError("gamma/eta arguments must lie in [0,1]")
    csides = {"gamma": ("p", coeffs.p1n, coeffs.rp),
              "eta": ("q", coeffs.q1n, coeffs.rq)}
    edge, cn, rn = csides[side]
    if x <= _X_EDGE:
        # x=0 limit: the full Fourier series of the edge row; boundary part
        # resummed in closed form, residual summed directly.
        h1, h2 = _boundary_constants(edge, cfg)
        return _boundary_profile(h1, h2, y) + np.sin(np.outer(y, np.pi * coeffs.n)).dot(rn)
    rates = coeffs.mode_rates(side if side == "gamma" else "eta")
    return np.sin(np.outer(y, np.pi * coeffs.n)).dot(cn * np.exp(rates * x))


def eval_gamma(x: float, y, coeffs: FourierCoeffs, cfg: KernelConfig) -> float | np.ndarray:
    """Plant-feedback kernel gamma(x,y); gamma(0,.) is exactly p(1,.)."""
    _check_cfg(coeffs, cfg)
    out = _series_eval(x, y, coeffs, "gamma")
    return float(out) if np.isscalar(y) else out


def eval_eta(x: float, y, coeffs: FourierCoeffs, cfg: KernelConfig) -> float | np.ndarray:
    """Inverse plant-feedback kernel eta(x,y); eta(0,.) equals q(1,.)."""
    _check_cfg(coeffs, cfg)
    out = _series_eval(x, y, coeffs, "eta")
    return float(out) if np.isscalar(y) else out


def _shift_eval(s, coeffs: FourierCoeffs, side: str):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("kernel shift argument must lie in [0,1]")
    rates = coeffs.mode_rates("k" if side == "k" else "l")
    cn = coeffs.shift_coefs(side)
    vals = np.exp(np.outer(s, rates)).dot(cn)
    diag = coeffs.diagonal(side)
    # s=0 sits on the integrable diagonal singularity; report the finite part.
    return np.where(s <= _X_EDGE, diag, vals)


def eval_kappa(s, coeffs: FourierCoeffs, cfg: KernelConfig) -> float | np.ndarray:
    """k(x,y) as a function of s = x - y (the series depends on x-y only).

    At s=0 the truncated series diverges with the mode count; the returned
    value is the N-stable finite part of the diagonal, which agrees with
    -d/dy p(1,y) at y=1 and is the endpoint surrogate used by quadratures
    across the diagonal.
    """
    _check_cfg(coeffs, cfg)
    out = _shift_eval(s, coeffs, "k")
    return float(out) if np.isscalar(s) else out


def eval_l(x: float, y: float, coeffs: FourierCoeffs, cfg: KernelConfig) -> float:
    """Inverse actuator kernel l(x,y) = l(x-y); diagonal handled as in eval_kappa."""
    if y > x:
        raise ValueError(f"require y <= x for l(x,y), got x={x}, y={y}")
    _check_cfg(coeffs, cfg)
    return float(_shift_eval(x - y, coeffs, "l"))


def _check_cfg(coeffs: FourierCoeffs, cfg: KernelConfig):
    if coeffs.cfg != cfg:
        raise ValueError("FourierCoeffs were built for a different KernelConfig")


# ---------------------------------------------------------------------------
# Precomputed grid tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelTables:
    """Kernel samples on the uniform simulation grid.

    gamma_1/eta_row are the x=1 rows used by the controller and diagnostics;
    kappa/l_band sample the difference kernels on s = x-y in [0,1]; k_diag is
    the regularized diagonal constant.  `coeffs` is retained so consumers can
    derive quadrature weights consistent with the same configuration.
    """

    cfg: KernelConfig
    coeffs: FourierCoeffs = field(repr=False)
    grid: np.ndarray
    gamma_1: np.ndarray
    kappa: np.ndarray
    eta_row: np.ndarray
    l_band: np.ndarray
    k_diag: float

    @property
    def m(self) -> int:
        return len(self.grid) - 1

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])


def build_tables(cfg: KernelConfig, grid_size: int,
                 coeffs: FourierCoeffs | None = None) -> KernelTables:
    """Sample all kernels once on an M+1 point uniform grid."""
    if grid_size < 10:
        raise ValueError(f"grid_size must be >= 10, got {grid_size}")
    if coeffs is None:
        coeffs = compute_p1n(cfg)
    _check_cfg(coeffs, cfg)
    x = np.linspace(0.0, 1.0, grid_size + 1)
    tables = KernelTables(
        cfg=cfg,
        coeffs=coeffs,
        grid=x,
        gamma_1=np.asarray(eval_gamma(1.0, x, coeffs, cfg)),
        kappa=np.asarray(eval_kappa(x, coeffs, cfg)),
        eta_row=np.asarray(eval_eta(1.0, x, coeffs, cfg)),
        l_band=np.asarray(_shift_eval(x, coeffs, "l")),
        k_diag=coeffs.diagonal("k"),
    )
    if not (np.isfinite(tables.gamma_1).all() and np.isfinite(tables.kappa).all()
            and np.isfinite(tables.eta_row).all() and np.isfinite(tables.l_band).all()):
        raise FloatingPointError("non-finite kernel table entry")
    return tables
