"""Scalar special functions and closed-form kernels.

Everything here is self-contained and vectorized over the position argument:

    erf / erfc / erfcx      rational (Cody-style) approximations
    bessel_j0 / bessel_j1   power series below 8, Hankel expansion above
    heat_kernel             g(t,x) = exp(-x^2/(8 gp t)) / (2 sqrt(2 pi gp t))
    h_plus / h_minus        heat kernel convolved with (sign-weighted) Laplace
    kg_kernel_0 / kg_kernel_1   light-cone kernels of u_tt = 4 D^2 u_xx - 4 W^2 u
    phi_plus / phi_minus    h_plus/h_minus convolved once more with the Laplace

The driven-regime kernels are parametrized by the rates (gamma_p, delta,
omega); the Laplace shape involved always has inverse scale c = omega/delta.
Exponential prefactors like exp(2 omega^2 gamma_p t / delta^2) overflow well
inside the useful (t, x) range, so every erfc product is evaluated in the
fused form exp(gauss) * erfcx(b) via :func:`scaled_erfc_product`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Params
from .errors import DegenerateParams, NegativeArgument, NonPositiveTime

_SQRT_PI_INV = 5.6418958354775628695e-1  # 1/sqrt(pi)

# Rational coefficients for erf on [0, 0.46875]
_ERF_A = (3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
          3.20937758913846947e03, 1.85777706184603153e-1)
_ERF_B = (2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
          2.84423683343917062e03)
# erfcx on (0.46875, 4]
_ERF_C = (5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
          2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
          2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8)
_ERF_D = (1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
          1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
          3.43936767414372164e03, 1.23033935480374942e03)
# erfcx beyond 4 (asymptotic rational in 1/y^2)
_ERF_P = (3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
          1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2)
_ERF_Q = (2.56852019228982242e00, 1.87295284992346047e00, 5.27905102951428412e-1,
          6.05183413124413191e-2, 2.33520497626869185e-3)


def _erf_small(y2: np.ndarray) -> np.ndarray:
    """erf(y)/y for y^2 = y2, valid for |y| <= 0.46875."""
    num = _ERF_A[4] * y2
    den = y2.copy()
    for i in range(3):
        num = (num + _ERF_A[i]) * y2
        den = (den + _ERF_B[i]) * y2
    return (num + _ERF_A[3]) / (den + _ERF_B[3])


def _erfcx_mid(y: np.ndarray) -> np.ndarray:
    """erfcx(y) for 0.46875 < y <= 4."""
    num = _ERF_C[8] * y
    den = y.copy()
    for i in range(7):
        num = (num + _ERF_C[i]) * y
        den = (den + _ERF_D[i]) * y
    return (num + _ERF_C[7]) / (den + _ERF_D[7])


def _erfcx_large(y: np.ndarray) -> np.ndarray:
    """erfcx(y) for y > 4."""
    z = 1.0 / (y * y)
    num = _ERF_P[5] * z
    den = z.copy()
    for i in range(4):
        num = (num + _ERF_P[i]) * z
        den = (den + _ERF_Q[i]) * z
    r = z * (num + _ERF_P[4]) / (den + _ERF_Q[4])
    return (_SQRT_PI_INV - r) / y


def _exp_nsq(y: np.ndarray) -> np.ndarray:
    """exp(-y^2) with the classic split that keeps the rounding tight."""
    ysq = np.floor(y * 16.0) / 16.0
    rest = (y - ysq) * (y + ysq)
    return np.exp(-ysq * ysq) * np.exp(-rest)


def _erfcx_nonneg(y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    small = y <= 0.46875
    mid = (~small) & (y <= 4.0)
    big = y > 4.0
    if small.any():
        ys = y[small]
        out[small] = np.exp(ys * ys) * (1.0 - ys * _erf_small(ys * ys))
    if mid.any():
        out[mid] = _erfcx_mid(y[mid])
    if big.any():
        out[big] = _erfcx_large(y[big])
    return out


def _dispatch(x, fn):
    arr = np.asarray(x, dtype=float)
    res = fn(np.atleast_1d(arr))
    return float(res[0]) if arr.ndim == 0 else res


def erf(x):
    """Error function, |relative error| below 1e-14."""
    def _eval(v):
        y = np.abs(v)
        out = np.empty_like(y)
        small = y <= 0.46875
        if small.any():
            ys = y[small]
            out[small] = ys * _erf_small(ys * ys)
        rest = ~small
        if rest.any():
            out[rest] = 1.0 - erfc(y[rest])
        return np.copysign(out, v)
    return _dispatch(x, _eval)


def erfc(x):
    """Complementary error function 1 - erf(x)."""
    def _eval(v):
        y = np.abs(v)
        out = np.empty_like(y)
        small = y <= 0.46875
        if small.any():
            ys = y[small]
            out[small] = 1.0 - ys * _erf_small(ys * ys)
        rest = ~small
        if rest.any():
            yr = y[rest]
            out[rest] = _erfcx_nonneg(yr) * _exp_nsq(yr)
        return np.where(v < 0.0, 2.0 - out, out)
    return _dispatch(x, _eval)


def erfcx(x):
    """Scaled complement exp(x^2) erfc(x); decays like 1/(x sqrt(pi)) for x >> 1.

    For negative x the value grows like 2 exp(x^2) and overflows near -26.6;
    kernel code always pairs such calls with a compensating Gaussian factor
    (see :func:`scaled_erfc_product`).
    """
    def _eval(v):
        y = np.abs(v)
        out = _erfcx_nonneg(y)
        neg = v < 0.0
        if neg.any():
            yn = y[neg]
            out[neg] = 2.0 * np.exp(yn * yn) - out[neg]
        return out
    return _dispatch(x, _eval)


def scaled_erfc_product(gauss_exponent, b):
    """exp(gauss_exponent) * erfcx(b), safe for any sign of b.

    Callers arrange ``gauss_exponent`` to be the completed-square exponent
    (always <= 0 here), so for b >= 0 both factors are bounded.  For b < 0 the
    mathematically equal form exp(gauss_exponent + b^2) * erfc(b) is used; in
    every kernel in this module that combined exponent is bounded above by 0
    as well, so neither branch can overflow.
    """
    g = np.asarray(gauss_exponent, dtype=float)
    barr = np.asarray(b, dtype=float)
    g, barr = np.broadcast_arrays(g, barr)
    out = np.empty_like(g)
    pos = barr >= 0.0
    if pos.any():
        out[pos] = np.exp(g[pos]) * erfcx(barr[pos])
    if (~pos).any():
        bn = barr[~pos]
        out[~pos] = np.exp(g[~pos] + bn * bn) * erfc(bn)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, orders 0 and 1
# ---------------------------------------------------------------------------
# Below z = 5 the alternating power series loses no precision (largest term
# is ~10).  Beyond 5 a truncated Hankel expansion bottoms out near 1e-8, so
# the Hankel form is used with rational fits of the modulus/phase functions
# P, Q in 25/z^2 (Cephes fits, ~3e-16 peak absolute error).

_J0_PP = (7.96936729297347051624e-4, 8.28352392107440799803e-2, 1.23953371646414299388e0,
          5.44725003058768775090e0, 8.74716500199817011941e0, 5.30324038235394892183e0,
          9.99999999999999997821e-1)
_J0_PQ = (9.24408810558863637013e-4, 8.56288474354474431428e-2, 1.25352743901058953537e0,
          5.47097740330417105182e0, 8.76190883237069594232e0, 5.30605288235394617618e0,
          1.00000000000000000218e0)
_J0_QP = (-1.13663838898469149931e-2, -1.28252718670509318512e0, -1.95539544257735972385e1,
          -9.32060152123768231369e1, -1.77681167980488050595e2, -1.47077505154951170175e2,
          -5.14105326766599330220e1, -6.05014350600728481186e0)
_J0_QQ = (6.43178256118178023184e1, 8.56430025976980587198e2, 3.88240183605401609683e3,
          7.24046774195652478189e3, 5.93072701187316984827e3, 2.06209331660327847417e3,
          2.42005740240291393179e2)

_J1_PP = (7.62125616208173112003e-4, 7.31397056940917570436e-2, 1.12719608129684925192e0,
          5.11207951146807644818e0, 8.42404590141772420927e0, 5.21451598682361504063e0,
          1.00000000000000000254e0)
_J1_PQ = (5.71323128072548699714e-4, 6.88455908754495404082e-2, 1.10514232634061696926e0,
          5.07386386128601488557e0, 8.39985554327604159757e0, 5.20982848682361821619e0,
          9.99999999999999997461e-1)
_J1_QP = (5.10862594750176621635e-2, 4.98213872951233449420e0, 7.58238284132545283818e1,
          3.66779609360150777800e2, 7.10856304998926107277e2, 5.97489612400613639965e2,
          2.11688757100572135698e2, 2.52070205858023719784e1)
_J1_QQ = (7.42373277035675149943e1, 1.05644886038262816351e3, 4.98641058337653607651e3,
          9.56231892404756170795e3, 7.99704160447350683650e3, 2.82619278517639096600e3,
          3.36093607810698293419e2)


def _polevl(x: np.ndarray, coefs) -> np.ndarray:
    out = np.full_like(x, coefs[0])
    for c in coefs[1:]:
        out = out * x + c
    return out


def _p1evl(x: np.ndarray, coefs) -> np.ndarray:
    out = x + coefs[0]
    for c in coefs[1:]:
        out = out * x + c
    return out


def _bessel_series(y: np.ndarray, order: int) -> np.ndarray:
    q = 0.25 * y * y
    term = np.ones_like(y)
    total = np.ones_like(y)
    for k in range(1, 40):
        term = -term * q / (k * (k + order))
        total = total + term
        if np.max(np.abs(term)) < 1e-18:
            break
    if order == 1:
        total = 0.5 * y * total
    return total


def _bessel(z, order: int):
    if order == 0:
        pp, pq, qp, qq, phase = _J0_PP, _J0_PQ, _J0_QP, _J0_QQ, 0.25 * math.pi
    else:
        pp, pq, qp, qq, phase = _J1_PP, _J1_PQ, _J1_QP, _J1_QQ, 0.75 * math.pi

    def _eval(y):
        if np.any(y < 0.0):
            raise NegativeArgument(f"bessel_j{order} requires z >= 0")
        out = np.empty_like(y)
        near = y < 5.0
        if near.any():
            out[near] = _bessel_series(y[near], order)
        far = ~near
        if far.any():
            yf = y[far]
            w = 5.0 / yf
            z2 = w * w
            p = _polevl(z2, pp) / _polevl(z2, pq)
            q = _polevl(z2, qp) / _p1evl(z2, qq)
            chi = yf - phase
            amp = math.sqrt(2.0 / math.pi) / np.sqrt(yf)
            out[far] = amp * (p * np.cos(chi) - w * q * np.sin(chi))
        return out
    return _dispatch(z, _eval)


def bessel_j0(z):
    """Bessel J0 on z >= 0, absolute error below 1e-12 up to z = 1e4."""
    return _bessel(z, 0)


def bessel_j1(z):
    """Bessel J1 on z >= 0, absolute error below 1e-12 up to z = 1e4."""
    return _bessel(z, 1)


def bessel_j1_over_z(z):
    """J1(z)/z, with the removable singularity filled by the series value 1/2."""
    def _eval(y):
        if np.any(y < 0.0):
            raise NegativeArgument("bessel_j1_over_z requires z >= 0")
        out = np.empty_like(y)
        tiny = y < 1e-4
        if tiny.any():
            q = 0.25 * y[tiny] * y[tiny]
            out[tiny] = 0.5 * (1.0 - q / 2.0 + q * q / 12.0)
        rest = ~tiny
        if rest.any():
            yr = y[rest]
            out[rest] = _bessel(yr, 1) / yr
        return out
    return _dispatch(z, _eval)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _require_positive_time(t: float) -> None:
    if not t > 0.0:
        raise NonPositiveTime(f"kernel defined for t > 0 only, got t={t}")


def _require_driven(p: Params) -> None:
    if p.delta == 0.0 or p.omega == 0.0:
        raise DegenerateParams(
            "kernel needs delta > 0 and omega > 0; use the matching special-case solver"
        )


def heat_kernel(t: float, x, gamma_p: float):
    """Gaussian with variance 4*gamma_p*t and unit mass."""
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    v = 4.0 * gamma_p * t
    return np.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)


def heat_modulated_gauss(t: float, x, gamma_p: float, k: float, sigma: float):
    """Heat kernel convolved with exp(iky) N(0, sigma^2)(y); complex result.

    Equals N(0, v + sigma^2)(x) * exp(-v sigma^2 k^2 / (2(v + sigma^2)))
    * exp(i k sigma^2 x / (v + sigma^2)) with v = 4*gamma_p*t.
    """
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    v = 4.0 * gamma_p * t
    w = v + sigma * sigma
    envelope = np.exp(-(x * x + v * sigma * sigma * k * k) / (2.0 * w)) / math.sqrt(2.0 * math.pi * w)
    return envelope * np.exp(1j * (k * sigma * sigma / w) * x)


def heat_uniform(t: float, x, gamma_p: float, a: float):
    """Heat kernel convolved with the plateau density on [-a, a] (mass 1)."""
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    s = 2.0 * math.sqrt(2.0 * gamma_p * t)
    return (erf((x + a) / s) - erf((x - a) / s)) / (4.0 * a)


def heat_laplace(t: float, x, gamma_p: float, c: float):
    """(heat kernel * Laplace density)(x) for the density (c/2) exp(-c|y|)."""
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    v = 4.0 * gamma_p * t
    s = math.sqrt(2.0 * v)
    neg = -x * x / (2.0 * v)
    bm = (c * v - x) / s
    bp = (c * v + x) / s
    return 0.25 * c * (scaled_erfc_product(neg, bm) + scaled_erfc_product(neg, bp))


def heat_sgn_laplace(t: float, x, gamma_p: float, c: float):
    """(heat kernel * sgn(y) (c/2) exp(-c|y|))(x); odd in x."""
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    v = 4.0 * gamma_p * t
    s = math.sqrt(2.0 * v)
    neg = -x * x / (2.0 * v)
    bm = (c * v - x) / s
    bp = (c * v + x) / s
    return 0.25 * c * (scaled_erfc_product(neg, bm) - scaled_erfc_product(neg, bp))


def h_plus(t: float, x, p: Params):
    """Even driven kernel: heat kernel smoothed over the coin's Laplace shape."""
    _require_driven(p)
    return heat_laplace(t, x, p.gamma_p, p.omega / p.delta)


def h_minus(t: float, x, p: Params):
    """Odd partner of :func:`h_plus` (heat kernel against sgn * Laplace)."""
    _require_driven(p)
    return heat_sgn_laplace(t, x, p.gamma_p, p.omega / p.delta)


def phi_plus(t: float, x, p: Params):
    """h_plus convolved once more with the Laplace density; even in x."""
    _require_driven(p)
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    gp, dl, om = p.gamma_p, p.delta, p.omega
    v = 4.0 * gp * t
    s = math.sqrt(2.0 * v)
    c = om / dl
    neg = -x * x / (2.0 * v)
    tm = scaled_erfc_product(neg, (c * v - x) / s)
    tp = scaled_erfc_product(neg, (c * v + x) / s)
    bracket = (4.0 * om**2 * gp * t - dl**2 - om * dl * x) * tm \
        + (4.0 * om**2 * gp * t - dl**2 + om * dl * x) * tp
    gauss = (om**2 / dl**2) * math.sqrt(gp * t / (2.0 * math.pi)) * np.exp(neg)
    return -(om / (8.0 * dl**3)) * bracket + gauss


def phi_minus(t: float, x, p: Params):
    """h_minus convolved once more with the Laplace density; odd in x."""
    _require_driven(p)
    _require_positive_time(t)
    x = np.asarray(x, dtype=float)
    gp, dl, om = p.gamma_p, p.delta, p.omega
    v = 4.0 * gp * t
    s = math.sqrt(2.0 * v)
    c = om / dl
    neg = -x * x / (2.0 * v)
    tm = scaled_erfc_product(neg, (c * v - x) / s)
    tp = scaled_erfc_product(neg, (c * v + x) / s)
    return (om**2 / (8.0 * dl**3)) * ((4.0 * om * gp * t + dl * x) * tp
                                      - (4.0 * om * gp * t - dl * x) * tm)


@dataclass(frozen=True)
class KernelSample:
    """Smooth part of a kernel plus Dirac deltas carried analytically.

    ``delta_shifts`` is a tuple of (location, weight) pairs; consumers apply
    them as exact translations, never by discretizing onto a grid.
    """

    values: np.ndarray
    delta_shifts: tuple = ()


def kg_kernel_0(t: float, x, p: Params):
    """Light-cone kernel with delta'(x)-free initial data.

    Supported on |x| < 2*delta*t, where it equals
    J0((omega/delta) sqrt(4 delta^2 t^2 - x^2)) / (4 delta); zero outside
    (including exactly on the cone).
    """
    _require_positive_time(t)
    if p.delta == 0.0:
        raise DegenerateParams("light-cone kernels need delta > 0")
    x = np.asarray(x, dtype=float)
    cone = 2.0 * p.delta * t
    inside = np.abs(x) < cone
    out = np.zeros_like(x)
    if inside.any():
        root = np.sqrt(np.maximum(cone * cone - x[inside] ** 2, 0.0))
        out[inside] = bessel_j0((p.omega / p.delta) * root) / (4.0 * p.delta)
    return out


def kg_kernel_1(t: float, x, p: Params) -> KernelSample:
    """Time derivative (distributionally) of :func:`kg_kernel_0`.

    Smooth part: -t*omega * J1(w)/sqrt(4 d^2 t^2 - x^2) with
    w = (omega/delta) sqrt(4 d^2 t^2 - x^2) inside the cone, zero outside;
    on the cone itself the interior limit -t*omega^2/(2*delta) is used.
    Deltas: weight 1/2 at x = +-2*delta*t, returned analytically.
    """
    _require_positive_time(t)
    if p.delta == 0.0:
        raise DegenerateParams("light-cone kernels need delta > 0")
    x = np.asarray(x, dtype=float)
    cone = 2.0 * p.delta * t
    inside = np.abs(x) <= cone
    out = np.zeros_like(x)
    if inside.any():
        root2 = np.maximum(cone * cone - x[inside] ** 2, 0.0)
        w = (p.omega / p.delta) * np.sqrt(root2)
        # J1(w)/sqrt(root2) = (omega/delta) * J1(w)/w, finite on the cone
        out[inside] = -t * p.omega * (p.omega / p.delta) * bessel_j1_over_z(w)
    return KernelSample(values=out, delta_shifts=((cone, 0.5), (-cone, 0.5)))
