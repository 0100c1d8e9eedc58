"""Closed forms for the uncoupled regime (delta = 0).

Without the coin-position coupling the Green's matrix is a single heat kernel
times a constant-in-x internal matrix whose 2x2 (c_i, rho_minus) block damps
like an oscillator: overdamped for gamma_z > 2*omega (hyperbolic functions of
omega_plus = sqrt(gamma_z^2 - 4 omega^2)), underdamped for gamma_z < 2*omega
(trigonometric functions of omega_minus = sqrt(4 omega^2 - gamma_z^2)), and a
polynomial-times-exponential Jordan block exactly at gamma_z = 2*omega.

The population imbalance in the underdamped regime factorizes for mixture
data into a scalar oscillation times a fixed spatial profile, so it vanishes
identically at the times tau_n returned by :func:`imbalance_zeros`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import omega0
from . import specfun as sf
from .core import (
    BlochField,
    Custom,
    GaussianCoherent,
    GaussianMixture,
    InitialCondition,
    LaplaceCoherent,
    LaplaceMixture,
    Params,
    SpatialGrid,
    UniformMixture,
    sample_initial,
    to_bloch,
    validate_params,
)
from .errors import NonPositiveTime, OqbmError, WrongRegime

TOL_CRITICAL = 1e-9  # relative width of the Jordan-block window


class DampingKind(enum.Enum):
    OVER = "overdamped"
    UNDER = "underdamped"
    CRITICAL = "critical"


@dataclass(frozen=True)
class DampingRegime:
    kind: DampingKind
    omega_pm: float  # sqrt(|gamma_z^2 - 4 omega^2|); zero in the critical window


def classify(p: Params, tol_crit: float = TOL_CRITICAL) -> DampingRegime:
    split = p.gamma_z - 2.0 * p.omega
    total = p.gamma_z + 2.0 * p.omega
    if abs(split) <= tol_crit * total or total == 0.0:
        return DampingRegime(DampingKind.CRITICAL, 0.0)
    if split > 0.0:
        return DampingRegime(DampingKind.OVER, math.sqrt(p.gamma_z**2 - 4.0 * p.omega**2))
    return DampingRegime(DampingKind.UNDER, math.sqrt(4.0 * p.omega**2 - p.gamma_z**2))


def _require_regime(p: Params) -> None:
    if p.delta != 0.0:
        raise WrongRegime(f"this module needs delta = 0, got delta={p.delta}")


def internal_matrix(p: Params, t: float) -> np.ndarray:
    """The x-independent 3x3 internal factor of the Green's matrix."""
    _require_regime(validate_params(p))
    gz, om = p.gamma_z, p.omega
    reg = classify(p)
    m = np.eye(3)
    if reg.kind is DampingKind.CRITICAL:
        # Jordan block: exp(-2 om t) (I + t N); finite limit of both regimes
        damp = math.exp(-2.0 * om * t)
        m[1, 1] = (1.0 - 2.0 * om * t) * damp
        m[1, 2] = om * t * damp
        m[2, 1] = -4.0 * om * t * damp
        m[2, 2] = (1.0 + 2.0 * om * t) * damp
        return m
    w = reg.omega_pm
    damp = math.exp(-gz * t)
    if reg.kind is DampingKind.OVER:
        c, s = math.cosh(w * t), math.sinh(w * t)
    else:
        c, s = math.cos(w * t), math.sin(w * t)
    m[1, 1] = damp * (c - (gz / w) * s)
    m[1, 2] = damp * (om / w) * s
    m[2, 1] = -damp * (4.0 * om / w) * s
    m[2, 2] = damp * (c + (gz / w) * s)
    return m


def green_delta0(p: Params, t: float, x):
    """Green's matrix for delta = 0: heat kernel times the internal matrix."""
    if t <= 0.0:
        raise NonPositiveTime(f"green_delta0 needs t > 0, got {t}")
    m = internal_matrix(p, t)
    g = sf.heat_kernel(t, np.asarray(x, dtype=float), p.gamma_p)
    return g[..., None, None] * m


def _heat_components(ic: InitialCondition, t: float, x, gamma_p: float):
    """Pure heat convolution of (psi11+psi22, psi11-psi22, Im psi12, Re psi12)."""
    x = np.asarray(x, dtype=float)
    if isinstance(ic, GaussianMixture):
        v1, v2 = ic.sigma1**2 + 4.0 * gamma_p * t, ic.sigma2**2 + 4.0 * gamma_p * t
        g1 = ic.p * np.exp(-x * x / (2.0 * v1)) / math.sqrt(2.0 * math.pi * v1)
        g2 = (1.0 - ic.p) * np.exp(-x * x / (2.0 * v2)) / math.sqrt(2.0 * math.pi * v2)
        zero = np.zeros_like(x)
        return g1 + g2, g1 - g2, zero, zero
    if isinstance(ic, GaussianCoherent):
        v = ic.sigma**2 + 4.0 * gamma_p * t
        g = np.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
        amp = ic.mu * math.sqrt(ic.p * (1.0 - ic.p))
        mod = amp * sf.heat_modulated_gauss(t, x, gamma_p, ic.k, ic.sigma)
        return g, (2.0 * ic.p - 1.0) * g, np.imag(mod), np.real(mod)
    if isinstance(ic, LaplaceMixture):
        l1 = ic.p * sf.heat_laplace(t, x, gamma_p, 1.0 / ic.a)
        l2 = (1.0 - ic.p) * sf.heat_laplace(t, x, gamma_p, 1.0 / ic.b)
        zero = np.zeros_like(x)
        return l1 + l2, l1 - l2, zero, zero
    if isinstance(ic, UniformMixture):
        u1 = ic.p * sf.heat_uniform(t, x, gamma_p, ic.a)
        u2 = (1.0 - ic.p) * sf.heat_uniform(t, x, gamma_p, ic.b)
        zero = np.zeros_like(x)
        return u1 + u2, u1 - u2, zero, zero
    if isinstance(ic, LaplaceCoherent):
        lap = sf.heat_laplace(t, x, gamma_p, 1.0 / ic.scale)
        amp = math.sqrt(ic.p * (1.0 - ic.p))
        return lap, (2.0 * ic.p - 1.0) * lap, amp * ic.q * lap, amp * ic.r * lap
    raise TypeError(
        f"no closed heat convolution for {type(ic).__name__}; use spectral.solve"
    )


def density_delta0(p: Params, ic: InitialCondition, t: float, x):
    """P(t, x): the initial probability density smoothed by the heat kernel."""
    _require_regime(validate_params(p))
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        if isinstance(ic, Custom):
            raise TypeError("sample Custom data through its own grid")
        return np.asarray(ic.rho11(x) + ic.rho22(x), dtype=float)
    plus, _, _, _ = _heat_components(ic, t, x, p.gamma_p)
    return plus


def imbalance_general(p: Params, ic: InitialCondition, t: float, x):
    """Q(t, x) in the underdamped regime for any closed-form initial shape.

    Sum of the two Green-matrix contributions: the driven term against
    Im psi12 and the damped-oscillation term against psi11 - psi22:

        Q = -(4 om / w) e^{-gz t} sin(w t) * (heat * Im psi12)
            + e^{-gz t} (cos(w t) + (gz / w) sin(w t)) * (heat * (psi11 - psi22))
    """
    _require_regime(validate_params(p))
    reg = classify(p)
    if reg.kind is not DampingKind.UNDER:
        raise WrongRegime(f"imbalance closed form needs gamma_z < 2*omega, got {reg.kind.value}")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.asarray(ic.rho11(x) - ic.rho22(x), dtype=float)
    _, minus, ci, _ = _heat_components(ic, t, x, p.gamma_p)
    w = reg.omega_pm
    damp = math.exp(-p.gamma_z * t)
    term_ci = -(4.0 * p.omega / w) * damp * math.sin(w * t) * ci
    term_minus = damp * (math.cos(w * t) + (p.gamma_z / w) * math.sin(w * t)) * minus
    return term_ci + term_minus


def imbalance_gaussian_factored(p: Params, ic: GaussianMixture, t: float, x):
    """The mixture imbalance as (scalar oscillation A(t), spatial profile D(t, x)).

    Q(t, x) = A(t) * D(t, x) with
    A = e^{-gz t} (gz sin(w t) + w cos(w t)) / w and D the difference of the
    two heat-spread Gaussians; A vanishes exactly at the times tau_n.
    """
    _require_regime(validate_params(p))
    reg = classify(p)
    if reg.kind is not DampingKind.UNDER:
        raise WrongRegime("factored imbalance needs the underdamped regime")
    x = np.asarray(x, dtype=float)
    w = reg.omega_pm
    amp = math.exp(-p.gamma_z * t) * (p.gamma_z * math.sin(w * t) + w * math.cos(w * t)) / w
    if t == 0.0:
        profile = np.asarray(ic.rho11(x) - ic.rho22(x), dtype=float)
    else:
        _, profile, _, _ = _heat_components(ic, t, x, p.gamma_p)
    return amp, profile


def imbalance_gaussian_coherent(p: Params, ic: GaussianCoherent, t: float, x):
    """Closed imbalance for the plane-wave coherent Gaussian initial state.

    The coherence contributes a sine-modulated Gaussian that never vanishes
    for k != 0, so the zeros tau_n of the mixture case disappear:

    Q = -(4 om mu sqrt(p(1-p)) / w) e^{-gz t} sin(w t) N(0, s+sig^2)(x)
          * exp(-s sig^2 k^2 / (2(s+sig^2))) * sin(k sig^2 x / (s+sig^2))
        + (2p-1) e^{-gz t} (gz sin(w t) + w cos(w t)) / w * N(0, s+sig^2)(x)

    with s = 4*gamma_p*t.
    """
    _require_regime(validate_params(p))
    reg = classify(p)
    if reg.kind is not DampingKind.UNDER:
        raise WrongRegime("closed coherent imbalance needs the underdamped regime")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.asarray(ic.rho11(x) - ic.rho22(x), dtype=float)
    w = reg.omega_pm
    s = 4.0 * p.gamma_p * t
    vt = s + ic.sigma**2
    damp = math.exp(-p.gamma_z * t)
    envelope = np.exp(-(x * x + s * ic.sigma**2 * ic.k**2) / (2.0 * vt)) / math.sqrt(2.0 * math.pi * vt)
    term1 = (
        -(4.0 * p.omega * ic.mu * math.sqrt(ic.p * (1.0 - ic.p)) / w)
        * damp * math.sin(w * t)
        * envelope * np.sin(ic.k * ic.sigma**2 * x / vt)
    )
    gauss = np.exp(-x * x / (2.0 * vt)) / math.sqrt(2.0 * math.pi * vt)
    term2 = (
        (2.0 * ic.p - 1.0) / w
        * damp * (p.gamma_z * math.sin(w * t) + w * math.cos(w * t))
        * gauss
    )
    return term1 + term2


def imbalance_zeros(p: Params, n_max: int) -> np.ndarray:
    """Times tau_n at which the mixture imbalance vanishes identically.

    Roots of gamma_z sin(w t) + w cos(w t) = 0 in the underdamped regime:
    tau_n = (n pi - arctan(w / gamma_z)) / w, n = 1..n_max.
    """
    validate_params(p)
    reg = classify(p)
    if reg.kind is not DampingKind.UNDER:
        raise WrongRegime("imbalance zeros exist only in the underdamped regime")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    w = reg.omega_pm
    n = np.arange(1, n_max + 1, dtype=float)
    taus = (n * math.pi - math.atan2(w, p.gamma_z)) / w
    residual = np.abs(p.gamma_z * np.sin(w * taus) + w * np.cos(w * taus))
    if np.max(residual) >= 1e-12 * w:
        raise OqbmError(f"zero-time residual {np.max(residual):.3e} exceeds 1e-12*w")
    return taus


def solve(p: Params, ic: InitialCondition, t: float, grid: SpatialGrid) -> BlochField:
    """Full closed-form field for delta = 0 (any damping regime).

    The heat-propagated components are rotated by the internal matrix; c_r is
    the universal decoupled kernel.  Custom data needs the spectral solver.
    """
    _require_regime(validate_params(p))
    if isinstance(ic, Custom):
        raise WrongRegime("custom initial data has no closed form; use spectral.solve")
    if t == 0.0:
        return to_bloch(sample_initial(ic, grid))
    x = grid.nodes
    plus, minus, ci, _ = _heat_components(ic, t, x, p.gamma_p)
    m = internal_matrix(p, t)
    return BlochField(
        grid=grid,
        rho_plus=plus,
        c_i=m[1, 1] * ci + m[1, 2] * minus,
        rho_minus=m[2, 1] * ci + m[2, 2] * minus,
        c_r=omega0.solve_cr(ic, t, grid, p),
        time=t,
    )
