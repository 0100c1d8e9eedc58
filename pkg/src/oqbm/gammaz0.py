"""Closed forms for the undamped driven regime (gamma_z = 0).

Here the Green's matrix mixes the heat kernel g, the Laplace-smoothed kernels
h+/h- and the light-cone kernels k0/k1 (see :mod:`oqbm.specfun`):

        [ h+ + (g - h+)*k1    -2 h- + 2 h-*k1     (d/2 gp t) (xg)*k0 ]
  G  =  [ h-/2 - (h-*k1)/2    g - h+ + h+*k1          om g*k0        ]
        [ (d/2 gp t)(xg)*k0     -4 om g*k0              g*k1         ]

where * is convolution.  Convolving a smooth f with k0/k1 reduces, after the
substitution y = 2 t delta cos(theta), to integrals over [0, pi]:

  f*k1 = (f(x - 2dt) + f(x + 2dt))/2
          - t om * int f(x - 2dt cos(th)) J1(2 t om sin(th)) dth
  f*k0 = (t/2) * int f(x - 2dt cos(th)) J0(2 t om sin(th)) sin(th) dth

evaluated by adaptive Gauss-Legendre quadrature (the integrands are smooth;
the square-root edge singularity disappears with the substitution).

For the Laplace-coherent initial state (envelope scale locked to
delta/omega) the full solution is closed in terms of h+/-, phi+/- and those
two convolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.integrate

from . import specfun as sf
from .core import (
    BlochField,
    LaplaceCoherent,
    Params,
    SpatialGrid,
    sample_initial,
    to_bloch,
    validate_params,
)
from .errors import (
    NonPositiveTime,
    QuadratureNotConverged,
    ScaleMismatch,
    TailNotDecayed,
    WrongRegime,
)
from .spectral import GreenMatrix

QUAD_TOL = 1e-9
QUAD_START_ORDER = 64
QUAD_MAX_ORDER = 4096


@dataclass(frozen=True)
class ThetaQuadrature:
    """Gauss-Legendre nodes/weights mapped onto [0, pi]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, order: int) -> "ThetaQuadrature":
        return _theta_rule(order)


@lru_cache(maxsize=16)
def _theta_rule(order: int) -> ThetaQuadrature:
    raw_nodes, raw_weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * math.pi * (raw_nodes + 1.0)
    weights = 0.5 * math.pi * raw_weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return ThetaQuadrature(order=order, nodes=nodes, weights=weights)


def _require_regime(p: Params) -> None:
    if p.gamma_z != 0.0:
        raise WrongRegime(f"this module needs gamma_z = 0, got gamma_z={p.gamma_z}")
    if p.delta == 0.0 or p.omega == 0.0:
        raise WrongRegime("this module needs delta > 0 and omega > 0")


def _adaptive_theta(
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    x: np.ndarray,
    p: Params,
    oscillation: str,
    tol: float = QUAD_TOL,
) -> np.ndarray:
    """int_0^pi f(x - 2 t d cos th) * {J1(2 t om sin th) | J0(...) sin th} dth."""
    reach = 2.0 * t * p.delta
    prev = None
    order = QUAD_START_ORDER
    while order <= QUAD_MAX_ORDER:
        rule = _theta_rule(order)
        if oscillation == "j1":
            factor = sf.bessel_j1(2.0 * t * p.omega * np.sin(rule.nodes))
        else:
            factor = sf.bessel_j0(2.0 * t * p.omega * np.sin(rule.nodes)) * np.sin(rule.nodes)
        weights = rule.weights * factor
        result = np.empty_like(x)
        chunk = max(1, (1 << 22) // order)
        for lo in range(0, x.size, chunk):
            hi = min(lo + chunk, x.size)
            samples = f(x[lo:hi, None] - reach * np.cos(rule.nodes)[None, :])
            result[lo:hi] = samples @ weights
        if prev is not None and np.max(np.abs(result - prev)) < tol:
            return result
        prev = result
        order *= 2
    raise QuadratureNotConverged(
        f"theta quadrature still changing beyond tol={tol:.1e} at order {QUAD_MAX_ORDER}"
    )


def convolve_kappa1(
    f: Callable[[np.ndarray], np.ndarray], t: float, x, p: Params, tol: float = QUAD_TOL
) -> np.ndarray:
    """(f * k1)(x): half-weight translates to the cone edges plus the smooth part."""
    if t <= 0.0:
        raise NonPositiveTime(f"convolve_kappa1 needs t > 0, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    reach = 2.0 * t * p.delta
    edges = 0.5 * (f(x - reach) + f(x + reach))
    return edges - t * p.omega * _adaptive_theta(f, t, x, p, "j1", tol)


def convolve_kappa0(
    f: Callable[[np.ndarray], np.ndarray], t: float, x, p: Params, tol: float = QUAD_TOL
) -> np.ndarray:
    """(f * k0)(x) over the light cone |y| < 2*t*delta."""
    if t <= 0.0:
        raise NonPositiveTime(f"convolve_kappa0 needs t > 0, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return 0.5 * t * _adaptive_theta(f, t, x, p, "j0sin", tol)


def exp_symbol_closed(p: Params, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """The closed matrix exponential exp(t Q(xi)) for gamma_z = 0.

    With w(xi) = 2 sqrt(delta^2 xi^2 + omega^2) every entry is a rational
    combination of cos(t w), sin(t w)/w and the Gaussian decay factor.
    Returned as a vectorized symbol suitable for the quadrature oracle.
    """
    _require_regime(validate_params(p))

    def symbol(xis: np.ndarray) -> np.ndarray:
        xis = np.asarray(xis, dtype=float)
        w2 = 4.0 * (p.delta**2 * xis**2 + p.omega**2)
        w = np.sqrt(w2)
        cos_tw = np.cos(t * w)
        sin_tw = np.sin(t * w)
        decay = np.exp(-2.0 * p.gamma_p * t * xis**2)
        out = np.empty((xis.size, 3, 3), dtype=complex)
        out[:, 0, 0] = (4.0 * p.omega**2 + 4.0 * xis**2 * p.delta**2 * cos_tw) / w2
        out[:, 0, 1] = -8j * p.delta * xis * p.omega * (cos_tw - 1.0) / w2
        out[:, 0, 2] = -2j * xis * p.delta * sin_tw / w
        out[:, 1, 0] = 2j * p.delta * xis * p.omega * (cos_tw - 1.0) / w2
        out[:, 1, 1] = (4.0 * xis**2 * p.delta**2 + 4.0 * p.omega**2 * cos_tw) / w2
        out[:, 1, 2] = p.omega * sin_tw / w
        out[:, 2, 0] = -2j * xis * p.delta * sin_tw / w
        out[:, 2, 1] = -4.0 * p.omega * sin_tw / w
        out[:, 2, 2] = cos_tw
        return out * decay[:, None, None]

    return symbol


def green_gammaz0(
    p: Params, t: float, grid: SpatialGrid, tol: float = QUAD_TOL, eps_tail: float = 1e-8
) -> GreenMatrix:
    """Assemble the Green's matrix from the kernel convolutions on the grid.

    The Dirac parts of k1 turn into exact half-weight translates, so the
    returned entries are ordinary functions with no pending delta shifts.
    """
    _require_regime(validate_params(p))
    if t <= 0.0:
        raise NonPositiveTime(f"green_gammaz0 needs t > 0, got {t}")
    x = grid.nodes

    def g(y): return sf.heat_kernel(t, y, p.gamma_p)
    def hp(y): return sf.h_plus(t, y, p)
    def hm(y): return sf.h_minus(t, y, p)
    def moment_g(y): return y * g(y)

    k1_g = convolve_kappa1(g, t, x, p, tol)
    k1_hp = convolve_kappa1(hp, t, x, p, tol)
    k1_hm = convolve_kappa1(hm, t, x, p, tol)
    k0_g = convolve_kappa0(g, t, x, p, tol)
    k0_xg = convolve_kappa0(moment_g, t, x, p, tol)

    entries = np.empty((3, 3, grid.n_points))
    entries[0, 0] = hp(x) + k1_g - k1_hp
    entries[0, 1] = -2.0 * hm(x) + 2.0 * k1_hm
    entries[0, 2] = (p.delta / (2.0 * p.gamma_p * t)) * k0_xg
    entries[1, 0] = 0.5 * hm(x) - 0.5 * k1_hm
    entries[1, 1] = g(x) - hp(x) + k1_hp
    entries[1, 2] = p.omega * k0_g
    entries[2, 0] = entries[0, 2]
    entries[2, 1] = -4.0 * p.omega * k0_g
    entries[2, 2] = k1_g

    peak = np.max(np.abs(entries))
    boundary = max(np.max(np.abs(entries[:, :, 0])), np.max(np.abs(entries[:, :, -1])))
    if boundary > eps_tail * peak:
        raise TailNotDecayed(
            f"Green entries at the boundary are {boundary:.3e} (peak {peak:.3e}); widen the grid"
        )
    return GreenMatrix(grid=grid, time=t, entries=entries, delta_shifts={})


def _check_initial(p: Params, ic: LaplaceCoherent) -> float:
    expected = p.delta / p.omega
    if not math.isclose(ic.scale, expected, rel_tol=1e-12):
        raise ScaleMismatch(
            f"initial Laplace scale {ic.scale} must equal delta/omega = {expected}"
        )
    return math.sqrt(ic.p * (1.0 - ic.p))


def solve_laplace_coherent(
    p: Params, ic: LaplaceCoherent, t: float, grid: SpatialGrid, tol: float = QUAD_TOL
) -> BlochField:
    """Exact field for the Laplace-coherent initial state.

    All Laplace-against-Laplace convolutions are closed (phi+/-); only the
    light-cone convolutions remain as one-dimensional theta integrals.
    """
    _require_regime(validate_params(p))
    amp = _check_initial(p, ic)
    if t == 0.0:
        return to_bloch(sample_initial(ic, grid))
    x = grid.nodes
    coh = 2.0 * ic.q * amp        # coefficient of the Im(rho12) channel
    pop = 2.0 * ic.p - 1.0        # coefficient of the rho_minus channel

    def hp(y): return sf.h_plus(t, y, p)
    def hm(y): return sf.h_minus(t, y, p)
    def php(y): return sf.phi_plus(t, y, p)
    def phm(y): return sf.phi_minus(t, y, p)
    def hp_minus_php(y): return hp(y) - php(y)

    k1_dphi = convolve_kappa1(hp_minus_php, t, x, p, tol)
    k1_phm = convolve_kappa1(phm, t, x, p, tol)
    k1_php = convolve_kappa1(php, t, x, p, tol)
    k0_hm = convolve_kappa0(hm, t, x, p, tol)
    k0_hp = convolve_kappa0(hp, t, x, p, tol)

    u1 = php(x) + k1_dphi - coh * (phm(x) - k1_phm) + 2.0 * p.omega * pop * k0_hm
    u2 = 0.5 * (phm(x) - k1_phm) + 0.5 * coh * (hp(x) - php(x) + k1_php) \
        + p.omega * pop * k0_hp
    u3 = 2.0 * p.omega * k0_hm - 2.0 * coh * p.omega * k0_hp + pop * (k1_dphi + k1_php)
    c_r = ic.r * amp * hp(x)
    return BlochField(grid=grid, rho_plus=u1, c_i=u2, rho_minus=u3, c_r=c_r, time=t)


def probability_density(
    p: Params, ic: LaplaceCoherent, t: float, x, tol: float = QUAD_TOL
) -> np.ndarray:
    """P(t, x) written out as boundary terms plus three theta integrals.

    Same quantity as the rho_plus component of :func:`solve_laplace_coherent`
    but grouped independently (useful as a cross-check of the assembly).
    """
    _require_regime(validate_params(p))
    amp = _check_initial(p, ic)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0.0:
        return np.asarray(ic.rho11(x) + ic.rho22(x), dtype=float)
    reach = 2.0 * t * p.delta

    def hp(y): return sf.h_plus(t, y, p)
    def php(y): return sf.phi_plus(t, y, p)
    def phm(y): return sf.phi_minus(t, y, p)
    def hm(y): return sf.h_minus(t, y, p)
    def dphi(y): return hp(y) - php(y)

    int_dphi_j1 = _adaptive_theta(dphi, t, x, p, "j1", tol)
    int_phm_j1 = _adaptive_theta(phm, t, x, p, "j1", tol)
    int_hm_j0 = _adaptive_theta(hm, t, x, p, "j0sin", tol)

    out = php(x) + 0.5 * (dphi(x - reach) + dphi(x + reach)) - t * p.omega * int_dphi_j1
    out -= 2.0 * ic.q * amp * (
        phm(x) - 0.5 * (phm(x - reach) + phm(x + reach)) + t * p.omega * int_phm_j1
    )
    out += (2.0 * ic.p - 1.0) * t * p.omega * int_hm_j0
    return out


def population_imbalance(
    p: Params, ic: LaplaceCoherent, t: float, x, tol: float = QUAD_TOL
) -> np.ndarray:
    """Q(t, x) = rho11 - rho22, grouped as boundary terms plus theta integrals."""
    _require_regime(validate_params(p))
    amp = _check_initial(p, ic)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0.0:
        return np.asarray(ic.rho11(x) - ic.rho22(x), dtype=float)
    reach = 2.0 * t * p.delta
    pop = 2.0 * ic.p - 1.0

    def hp(y): return sf.h_plus(t, y, p)
    def hm(y): return sf.h_minus(t, y, p)

    int_hm_j0 = _adaptive_theta(hm, t, x, p, "j0sin", tol)
    int_hp_j0 = _adaptive_theta(hp, t, x, p, "j0sin", tol)
    int_hp_j1 = _adaptive_theta(hp, t, x, p, "j1", tol)

    out = 0.5 * pop * (hp(x - reach) + hp(x + reach))
    out += t * p.omega * int_hm_j0
    out -= 2.0 * t * ic.q * p.omega * amp * int_hp_j0
    out -= pop * t * p.omega * int_hp_j1
    return out


def far_cone_solution(p: Params, ic: LaplaceCoherent, t: float, x):
    """Large-|x| approximation of (u1, u2, u3) beyond the light cone.

    Obtained by replacing the cone convolutions of the Laplace envelope with
    their pointwise x > 2*t*delta values; that replacement ignores the
    Gaussian smoothing across the cone edge, so this is an approximation with
    O(1) relative error near the cone, not an exact tail formula.  Kept for
    reference and for rough asymptotics.
    """
    _require_regime(validate_params(p))
    amp = _check_initial(p, ic)
    x = np.asarray(x, dtype=float)
    hp = sf.h_plus(t, x, p)
    hm = sf.h_minus(t, x, p)
    pop = 2.0 * ic.p - 1.0
    u1 = hp + 2.0 * t * p.omega * pop * hm
    u2 = (ic.q * amp + t * p.omega * pop) * hp
    u3 = 2.0 * t * p.omega * hm + (-4.0 * p.omega * ic.q * amp + pop) * hp
    return u1, u2, u3


@dataclass(frozen=True)
class IdentityReport:
    """Max absolute discrepancies of the kernel convolution identities."""

    laplace_self: float          # f*f = (om|x|+d) f / (2d)
    laplace_sign_self: float     # f*(sgn f) = om x f / (2d)
    heat_laplace: float          # g*f = h+
    heat_sign_laplace: float     # g*(sgn f) = h-
    moment_laplace: float        # (xg)*f = (4 gp t om/d) h-
    cone_k1: float               # f*k1 = f        for x > 2 t d
    cone_k0: float               # f*k0 = t f      for x > 2 t d

    def max_error(self) -> float:
        return max(
            self.laplace_self, self.laplace_sign_self, self.heat_laplace,
            self.heat_sign_laplace, self.moment_laplace, self.cone_k1, self.cone_k0,
        )


def convolution_identities_check(
    p: Params, t: float, x_points: Sequence[float]
) -> IdentityReport:
    """Evaluate both sides of the printed kernel identities.

    The convolution sides use adaptive scipy quadrature (for the Laplace and
    heat products) and the theta rule (for the cone kernels); the right-hand
    sides are the closed forms from :mod:`oqbm.specfun`.
    """
    _require_regime(validate_params(p))
    if t <= 0.0:
        raise NonPositiveTime(f"identities need t > 0, got {t}")
    x_points = np.asarray(sorted(x_points), dtype=float)
    c = p.omega / p.delta
    scale = 1.0 / c

    def f_l(y):
        return 0.5 * c * np.exp(-c * np.abs(y))

    def quad(fn, lo, hi, pts):
        val, _ = scipy.integrate.quad(
            fn, lo, hi, points=[q for q in pts if lo < q < hi], limit=400,
            epsabs=1e-13, epsrel=1e-12,
        )
        return val

    reach_l = 60.0 * scale
    sigma = math.sqrt(4.0 * p.gamma_p * t)
    reach_g = 12.0 * sigma

    e1 = e1s = e2 = e3 = e4 = 0.0
    for xv in x_points:
        lo, hi = -reach_l + min(0.0, xv), reach_l + max(0.0, xv)
        conv = quad(lambda y: f_l(y) * f_l(xv - y), lo, hi, (0.0, xv))
        e1 = max(e1, abs(conv - (p.omega * abs(xv) + p.delta) * f_l(xv) / (2.0 * p.delta)))
        conv = quad(lambda y: np.sign(y) * f_l(y) * f_l(xv - y), lo, hi, (0.0, xv))
        e1s = max(e1s, abs(conv - xv * p.omega * f_l(xv) / (2.0 * p.delta)))
        glo, ghi = -reach_g, reach_g
        conv = quad(lambda y: sf.heat_kernel(t, y, p.gamma_p) * f_l(xv - y), glo, ghi, (xv,))
        e2 = max(e2, abs(conv - sf.h_plus(t, xv, p)))
        conv = quad(
            lambda y: sf.heat_kernel(t, y, p.gamma_p) * np.sign(xv - y) * f_l(xv - y),
            glo, ghi, (xv,),
        )
        e3 = max(e3, abs(conv - sf.h_minus(t, xv, p)))
        conv = quad(lambda y: y * sf.heat_kernel(t, y, p.gamma_p) * f_l(xv - y), glo, ghi, (xv,))
        e4 = max(e4, abs(conv - (4.0 * p.gamma_p * t * p.omega / p.delta) * sf.h_minus(t, xv, p)))

    outside = x_points[x_points > 2.0 * t * p.delta * (1.0 + 1e-9)]
    e5 = e6 = 0.0
    if outside.size:
        k1 = convolve_kappa1(f_l, t, outside, p)
        k0 = convolve_kappa0(f_l, t, outside, p)
        e5 = float(np.max(np.abs(k1 - f_l(outside))))
        e6 = float(np.max(np.abs(k0 - t * f_l(outside))))
    return IdentityReport(
        laplace_self=e1, laplace_sign_self=e1s, heat_laplace=e2,
        heat_sign_laplace=e3, moment_laplace=e4, cone_k1=e5, cone_k0=e6,
    )
