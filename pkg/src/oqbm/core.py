"""Domain types: physical rates, spatial grids, density/Bloch fields, initial data.

The model evolves a 2x2 Hermitian density matrix field rho(t, x) on the real
line.  Everything downstream works either with the matrix entries
(rho11, rho22, rho12) or with the real Bloch-style coordinates

    rho_plus  = rho11 + rho22      (position probability density)
    rho_minus = rho11 - rho22      (population imbalance, <sigma_z>)
    c_r       = Re rho12
    c_i       = Im rho12

The line is truncated to [-L, L) with n uniform nodes; the discrete Fourier
dual uses frequencies xi_k = pi*k/L and the transform convention

    u_hat(xi) = integral u(x) exp(-i xi x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    DomainTooNarrow,
    GridMismatch,
    NegativeRate,
    NonFinite,
    NonPositiveDiffusion,
)

DEFAULT_EPS_TAIL = 1e-8


@dataclass(frozen=True)
class Params:
    """The four rates of the master equation.

    gamma_p  diffusion rate (must be > 0, it multiplies d^2/dx^2)
    gamma_z  dephasing rate (>= 0)
    delta    coin-position coupling / drift rate (>= 0)
    omega    driving amplitude (>= 0)
    """

    gamma_p: float
    gamma_z: float = 0.0
    delta: float = 0.0
    omega: float = 0.0


def validate_params(p: Params) -> Params:
    """Return ``p`` unchanged if it satisfies all constraints, else raise."""
    values = (p.gamma_p, p.gamma_z, p.delta, p.omega)
    if not all(math.isfinite(v) for v in values):
        raise NonFinite(f"rates must be finite, got {values}")
    if p.gamma_p <= 0.0:
        raise NonPositiveDiffusion(f"gamma_p must be > 0, got {p.gamma_p}")
    if p.gamma_z < 0.0 or p.delta < 0.0 or p.omega < 0.0:
        raise NegativeRate(f"gamma_z, delta, omega must be >= 0, got {values[1:]}")
    return p


class SpatialGrid:
    """Uniform grid on [-L, L) together with its discrete Fourier dual.

    Nodes are x_j = -L + j*dx with dx = 2L/n (the right endpoint is excluded;
    the grid is periodic).  ``n_points`` must be a power of two so the FFT
    stays fast.  Fourier nodes are xi_k = pi*k/L in numpy fft ordering.
    """

    def __init__(self, half_width: float, n_points: int):
        if not (math.isfinite(half_width) and half_width > 0):
            raise ValueError(f"half_width must be positive and finite, got {half_width}")
        if n_points < 2 or (n_points & (n_points - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 2, got {n_points}")
        self.half_width = float(half_width)
        self.n_points = int(n_points)
        self.dx = 2.0 * self.half_width / self.n_points
        self.nodes = -self.half_width + self.dx * np.arange(self.n_points)
        k = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)  # integer k
        self.fourier_nodes = (np.pi / self.half_width) * k
        # exp(+- i xi_k L) = (-1)^k, exact in integer arithmetic
        self._signs = np.where(np.asarray(np.rint(k), dtype=np.int64) % 2 == 0, 1.0, -1.0)
        self.nodes.setflags(write=False)
        self.fourier_nodes.setflags(write=False)
        self._signs.setflags(write=False)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpatialGrid)
            and other.half_width == self.half_width
            and other.n_points == self.n_points
        )

    def __hash__(self) -> int:
        return hash((self.half_width, self.n_points))

    def __repr__(self) -> str:
        return f"SpatialGrid(half_width={self.half_width}, n_points={self.n_points})"

    def forward_transform(self, values: np.ndarray) -> np.ndarray:
        """Approximate u_hat(xi_k) = integral u e^(-i xi x) dx on the grid."""
        return self.dx * self._signs * np.fft.fft(values)

    def inverse_transform(self, spectrum: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward_transform` (returns a complex array)."""
        return np.fft.ifft(self._signs * spectrum) / self.dx

    def trapezoid(self, values: np.ndarray) -> float:
        """Trapezoid integral over [-L, L - dx]; fine for tail-decayed data."""
        return float(np.trapezoid(values, dx=self.dx))


def _check_grid_arrays(grid: SpatialGrid, arrays: dict) -> None:
    for name, arr in arrays.items():
        if arr.shape != (grid.n_points,):
            raise GridMismatch(
                f"{name} has shape {arr.shape}, expected ({grid.n_points},)"
            )


@dataclass(frozen=True)
class DensityField:
    """2x2 density-matrix field sampled on a grid.

    rho21 is never stored; Hermiticity is structural (rho21 = conj(rho12)).
    """

    grid: SpatialGrid
    rho11: np.ndarray
    rho22: np.ndarray
    rho12: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"time must be >= 0, got {self.time}")
        _check_grid_arrays(self.grid, {"rho11": self.rho11, "rho22": self.rho22, "rho12": self.rho12})
        for arr in (self.rho11, self.rho22, self.rho12):
            arr.setflags(write=False)

    @property
    def probability_density(self) -> np.ndarray:
        return self.rho11 + self.rho22

    @property
    def imbalance(self) -> np.ndarray:
        return self.rho11 - self.rho22

    def mass(self) -> float:
        return self.grid.trapezoid(self.probability_density)


@dataclass(frozen=True)
class BlochField:
    """The real coordinates (rho_plus, c_i, rho_minus) plus the decoupled c_r."""

    grid: SpatialGrid
    rho_plus: np.ndarray
    c_i: np.ndarray
    rho_minus: np.ndarray
    c_r: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"time must be >= 0, got {self.time}")
        _check_grid_arrays(
            self.grid,
            {"rho_plus": self.rho_plus, "c_i": self.c_i, "rho_minus": self.rho_minus, "c_r": self.c_r},
        )
        for arr in (self.rho_plus, self.c_i, self.rho_minus, self.c_r):
            arr.setflags(write=False)

    def mass(self) -> float:
        return self.grid.trapezoid(self.rho_plus)


def to_bloch(d: DensityField) -> BlochField:
    """Componentwise change of variables rho_pm = rho11 +- rho22, c = rho12."""
    return BlochField(
        grid=d.grid,
        rho_plus=d.rho11 + d.rho22,
        c_i=np.imag(d.rho12).copy(),
        rho_minus=d.rho11 - d.rho22,
        c_r=np.real(d.rho12).copy(),
        time=d.time,
    )


def from_bloch(b: BlochField) -> DensityField:
    """Inverse of :func:`to_bloch`."""
    return DensityField(
        grid=b.grid,
        rho11=0.5 * (b.rho_plus + b.rho_minus),
        rho22=0.5 * (b.rho_plus - b.rho_minus),
        rho12=b.c_r + 1j * b.c_i,
        time=b.time,
    )


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def _gauss(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-x * x / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)


def _laplace(x: np.ndarray, scale: float) -> np.ndarray:
    return np.exp(-np.abs(x) / scale) / (2.0 * scale)


def _box(x: np.ndarray, a: float) -> np.ndarray:
    """Indicator of [-a, a] with the midpoint (half-plateau) value at the jumps."""
    inside = (np.abs(x) < a).astype(float)
    inside[np.abs(np.abs(x) - a) == 0.0] = 0.5
    return inside / (2.0 * a)


def _check_weight(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"mixture weight p must lie in (0, 1), got {p}")


@dataclass(frozen=True)
class GaussianMixture:
    """Diagonal rho(0): p N(0, sigma1^2) in rho11, (1-p) N(0, sigma2^2) in rho22."""

    p: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        _check_weight(self.p)
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigma1, sigma2 must be > 0")

    def rho11(self, x): return self.p * _gauss(x, self.sigma1)
    def rho22(self, x): return (1.0 - self.p) * _gauss(x, self.sigma2)
    def rho12(self, x): return np.zeros_like(np.asarray(x, dtype=float), dtype=complex)

    def tail_mass(self, half_width: float) -> float:
        t1 = math.erfc(half_width / (self.sigma1 * math.sqrt(2.0)))
        t2 = math.erfc(half_width / (self.sigma2 * math.sqrt(2.0)))
        return self.p * t1 + (1.0 - self.p) * t2

    def min_feature(self) -> float:
        return min(self.sigma1, self.sigma2)


@dataclass(frozen=True)
class GaussianCoherent:
    """Gaussian envelope with a plane-wave off-diagonal coherence.

    rho(0, x) = N(0, sigma^2)(x) * [[p, mu*sqrt(p(1-p)) e^{ikx}], [c.c., 1-p]]
    """

    p: float
    mu: float
    k: float
    sigma: float

    def __post_init__(self):
        _check_weight(self.p)
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def rho11(self, x): return self.p * _gauss(x, self.sigma)
    def rho22(self, x): return (1.0 - self.p) * _gauss(x, self.sigma)

    def rho12(self, x):
        x = np.asarray(x, dtype=float)
        amp = self.mu * math.sqrt(self.p * (1.0 - self.p))
        return amp * _gauss(x, self.sigma) * np.exp(1j * self.k * x)

    def tail_mass(self, half_width: float) -> float:
        return math.erfc(half_width / (self.sigma * math.sqrt(2.0)))

    def min_feature(self) -> float:
        if self.k != 0.0:
            return min(self.sigma, 2.0 * math.pi / abs(self.k))
        return self.sigma


@dataclass(frozen=True)
class LaplaceMixture:
    """Diagonal rho(0) with Laplace profiles of scales a and b."""

    p: float
    a: float
    b: float

    def __post_init__(self):
        _check_weight(self.p)
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a, b must be > 0")

    def rho11(self, x): return self.p * _laplace(x, self.a)
    def rho22(self, x): return (1.0 - self.p) * _laplace(x, self.b)
    def rho12(self, x): return np.zeros_like(np.asarray(x, dtype=float), dtype=complex)

    def tail_mass(self, half_width: float) -> float:
        return self.p * math.exp(-half_width / self.a) + (1.0 - self.p) * math.exp(-half_width / self.b)

    def min_feature(self) -> float:
        return min(self.a, self.b)


@dataclass(frozen=True)
class UniformMixture:
    """Diagonal rho(0) with centered plateaus of half-widths a and b."""

    p: float
    a: float
    b: float

    def __post_init__(self):
        _check_weight(self.p)
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a, b must be > 0")

    def rho11(self, x): return self.p * _box(np.asarray(x, dtype=float), self.a)
    def rho22(self, x): return (1.0 - self.p) * _box(np.asarray(x, dtype=float), self.b)
    def rho12(self, x): return np.zeros_like(np.asarray(x, dtype=float), dtype=complex)

    def tail_mass(self, half_width: float) -> float:
        return 0.0 if half_width >= max(self.a, self.b) else 1.0

    def min_feature(self) -> float:
        return min(self.a, self.b)


@dataclass(frozen=True)
class LaplaceCoherent:
    """Laplace envelope with a constant complex coherence direction.

    rho(0, x) = f(x) * [[p, sqrt(p(1-p))(r + iq)], [sqrt(p(1-p))(r - iq), 1-p]]

    where f is the Laplace density with the given scale.  The closed-form
    driven solver requires scale == delta/omega; build instances through
    :meth:`for_params` to guarantee that.
    """

    p: float
    r: float
    q: float
    scale: float

    def __post_init__(self):
        _check_weight(self.p)
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.r * self.r + self.q * self.q > 1.0 + 1e-12:
            raise ValueError(f"need r^2 + q^2 <= 1, got {self.r**2 + self.q**2}")

    @classmethod
    def for_params(cls, p: float, r: float, q: float, params: Params) -> "LaplaceCoherent":
        if params.delta == 0.0 or params.omega == 0.0:
            raise ValueError("Laplace-coherent data needs delta > 0 and omega > 0")
        return cls(p=p, r=r, q=q, scale=params.delta / params.omega)

    def envelope(self, x):
        return _laplace(np.asarray(x, dtype=float), self.scale)

    def rho11(self, x): return self.p * self.envelope(x)
    def rho22(self, x): return (1.0 - self.p) * self.envelope(x)

    def rho12(self, x):
        amp = math.sqrt(self.p * (1.0 - self.p)) * (self.r + 1j * self.q)
        return amp * self.envelope(x).astype(complex)

    def tail_mass(self, half_width: float) -> float:
        return math.exp(-half_width / self.scale)

    def min_feature(self) -> float:
        return self.scale


@dataclass(frozen=True)
class Custom:
    """A user-supplied sampled density field used verbatim as initial data."""

    field: DensityField

    def tail_mass(self, half_width: float) -> float:
        d = self.field
        edge = max(
            abs(float(d.probability_density[0])),
            abs(float(d.probability_density[-1])),
        )
        return edge * d.grid.dx  # crude boundary estimate

    def min_feature(self) -> float:
        return 4.0 * self.field.grid.dx


InitialCondition = Union[
    GaussianMixture, GaussianCoherent, LaplaceMixture, UniformMixture, LaplaceCoherent, Custom
]


def initial_spectrum(ic: InitialCondition, xis: np.ndarray):
    """Closed Fourier transforms (u_hat = integral u e^{-i xi x} dx) of the
    initial components (rho_plus, c_i, rho_minus, c_r).

    Using these instead of an FFT of samples keeps spectral solutions free of
    the O(dx^2) aliasing caused by kinks or jumps in the initial profiles.
    Custom data has no closed transform (returns None).
    """
    xis = np.asarray(xis, dtype=float)

    def gauss_hat(sigma: float) -> np.ndarray:
        return np.exp(-0.5 * (sigma * xis) ** 2)

    if isinstance(ic, GaussianMixture):
        top = ic.p * gauss_hat(ic.sigma1)
        bot = (1.0 - ic.p) * gauss_hat(ic.sigma2)
        zero = np.zeros_like(xis)
        return top + bot, zero, top - bot, zero
    if isinstance(ic, GaussianCoherent):
        env = gauss_hat(ic.sigma)
        amp = ic.mu * math.sqrt(ic.p * (1.0 - ic.p))
        plus_k = np.exp(-0.5 * ic.sigma**2 * (xis - ic.k) ** 2)
        minus_k = np.exp(-0.5 * ic.sigma**2 * (xis + ic.k) ** 2)
        # FT of Im(rho12) and Re(rho12) for rho12 = amp e^{ikx} N_sigma
        ci_hat = amp * (plus_k - minus_k) / 2j
        cr_hat = amp * (plus_k + minus_k) / 2.0
        return env, ci_hat, (2.0 * ic.p - 1.0) * env, cr_hat
    if isinstance(ic, LaplaceMixture):
        top = ic.p / (1.0 + (ic.a * xis) ** 2)
        bot = (1.0 - ic.p) / (1.0 + (ic.b * xis) ** 2)
        zero = np.zeros_like(xis)
        return top + bot, zero, top - bot, zero
    if isinstance(ic, UniformMixture):
        top = ic.p * np.sinc(ic.a * xis / math.pi)
        bot = (1.0 - ic.p) * np.sinc(ic.b * xis / math.pi)
        zero = np.zeros_like(xis)
        return top + bot, zero, top - bot, zero
    if isinstance(ic, LaplaceCoherent):
        env = 1.0 / (1.0 + (ic.scale * xis) ** 2)
        amp = math.sqrt(ic.p * (1.0 - ic.p))
        return env, amp * ic.q * env, (2.0 * ic.p - 1.0) * env, amp * ic.r * env
    return None


def sample_initial(
    ic: InitialCondition, grid: SpatialGrid, eps_tail: float = DEFAULT_EPS_TAIL,
    neg_tol: float = 1e-9
) -> DensityField:
    """Sample the closed-form initial density matrix on ``grid``.

    Raises DomainTooNarrow when the analytic tail mass beyond +-L exceeds
    ``eps_tail``.  Custom data must live on the same grid and its populations
    may dip below zero only by the numerical slack ``neg_tol``.
    """
    if isinstance(ic, Custom):
        if ic.field.grid != grid:
            raise GridMismatch("custom initial data lives on a different grid")
        low = min(float(np.min(ic.field.rho11)), float(np.min(ic.field.rho22)))
        if low < -neg_tol:
            raise ValueError(
                f"custom initial populations reach {low:.3e}, below the -{neg_tol:.0e} slack"
            )
        return ic.field
    tail = ic.tail_mass(grid.half_width)
    if tail > eps_tail:
        raise DomainTooNarrow(
            f"tail mass {tail:.3e} beyond half_width {grid.half_width} exceeds {eps_tail:.1e}"
        )
    x = grid.nodes
    return DensityField(
        grid=grid,
        rho11=np.asarray(ic.rho11(x), dtype=float),
        rho22=np.asarray(ic.rho22(x), dtype=float),
        rho12=np.asarray(ic.rho12(x), dtype=complex),
        time=0.0,
    )


def initial_mass(ic: InitialCondition, eps_tail: float = DEFAULT_EPS_TAIL,
                 n_points: int = 1 << 18) -> float:
    """Trapezoid mass of the raw initial density on a dedicated fine grid.

    The grid half-width is the next power of two above the tail width, so the
    spacing is dyadic and the integer-valued plateau edges of uniform data
    fall exactly on nodes (where the half-plateau sampling makes the
    trapezoid exact); the spacing is fine enough that the kink error of
    Laplace shapes stays below eps_tail.
    """
    if isinstance(ic, Custom):
        return ic.field.mass()
    width = tail_half_width(ic, eps_tail) + 1.0
    half_width = 2.0 ** math.ceil(math.log2(width))
    grid = SpatialGrid(half_width, n_points)
    return sample_initial(ic, grid, eps_tail=eps_tail).mass()


def tail_half_width(ic: InitialCondition, eps_tail: float = DEFAULT_EPS_TAIL) -> float:
    """Smallest X with tail_mass(X) <= eps_tail, found by bisection."""
    lo, hi = 0.0, 1.0
    while ic.tail_mass(hi) > eps_tail:
        hi *= 2.0
        if hi > 1e12:
            raise DomainTooNarrow("initial condition tail does not decay")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ic.tail_mass(mid) > eps_tail:
            lo = mid
        else:
            hi = mid
    return hi


def plan_grid(
    ic: InitialCondition,
    params: Params,
    t_max: float,
    eps_tail: float = DEFAULT_EPS_TAIL,
    points_per_feature: float = 8.0,
    min_points: int = 256,
    max_points: int = 1 << 21,
) -> SpatialGrid:
    """Pick a grid wide enough for drift, diffusion and the initial tails.

    Half-width rule: initial tail width (to eps_tail) + drift excursion
    2*delta*t_max + six diffusion standard deviations sqrt(4*gamma_p*t_max).
    Resolution rule: at least ``points_per_feature`` nodes per smallest
    relevant length (initial feature or early diffusion width).
    """
    validate_params(params)
    width = tail_half_width(ic, eps_tail)
    width += 2.0 * params.delta * t_max + 6.0 * math.sqrt(4.0 * params.gamma_p * t_max)
    half_width = 1.25 * width  # slack so the rule is met with margin
    feature = min(ic.min_feature(), math.sqrt(4.0 * params.gamma_p * max(t_max, 1e-12)))
    dx_target = feature / points_per_feature
    n = 1 << max(1, math.ceil(math.log2(2.0 * half_width / dx_target)))
    n = min(max(n, min_points), max_points)
    return SpatialGrid(half_width=half_width, n_points=n)
