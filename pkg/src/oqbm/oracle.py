"""Independent verification engines.

Two deliberately low-tech solvers used as ground truth everywhere else:

* :func:`fd_integrate` -- method-of-lines on the original coupled system,
  second-order central differences with periodic closure and explicit RK4.
  It touches only the core types; it never imports the spectral or
  closed-form modules, so agreement with them is meaningful evidence.

* :func:`quad_inverse_fourier` -- plain trapezoid quadrature of
  (1/2pi) * integral exp(i xi x) S(xi) d(xi) for a matrix symbol S,
  with interval doubling until successive results agree.  No FFT involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .core import (
    BlochField,
    InitialCondition,
    Params,
    SpatialGrid,
    sample_initial,
    to_bloch,
    validate_params,
    DEFAULT_EPS_TAIL,
)
from .errors import DomainTooNarrow, QuadratureNotConverged, UnstableStep


@dataclass
class FdResult:
    """Final field, optional intermediate snapshots and a step-halving error bound."""

    field: BlochField
    richardson_error: Optional[float]
    snapshots: dict = field(default_factory=dict)


def _difference_operator(p: Params, grid: SpatialGrid) -> sp.csr_matrix:
    n = grid.n_points
    dx = grid.dx
    ones = np.ones(n - 1)
    d2 = sp.diags(
        [np.full(n, -2.0), ones, ones, [1.0], [1.0]],
        [0, 1, -1, n - 1, -(n - 1)],
        format="csr",
    ) / dx**2
    d1 = sp.diags(
        [ones, -ones, [-1.0], [1.0]],
        [1, -1, n - 1, -(n - 1)],
        format="csr",
    ) / (2.0 * dx)
    eye = sp.identity(n, format="csr")
    zero = sp.csr_matrix((n, n))
    diff = 2.0 * p.gamma_p * d2
    # unknown ordering: (rho_plus, c_i, rho_minus, c_r)
    return sp.bmat(
        [
            [diff, zero, -2.0 * p.delta * d1, zero],
            [zero, diff - 2.0 * p.gamma_z * eye, p.omega * eye, zero],
            [-2.0 * p.delta * d1, -4.0 * p.omega * eye, diff, zero],
            [zero, zero, zero, diff - 2.0 * p.gamma_z * eye],
        ],
        format="csr",
    )


def auto_time_step(p: Params, grid: SpatialGrid) -> float:
    """Conservative explicit-RK4 step: diffusion, advection and reaction limits."""
    limits = [grid.dx**2 / (8.0 * p.gamma_p)]
    if p.delta > 0.0:
        limits.append(grid.dx / (4.0 * p.delta))
    if p.gamma_z + p.omega > 0.0:
        limits.append(1.0 / (4.0 * (p.gamma_z + p.omega)))
    return min(limits)


def _rk4_run(
    A: sp.csr_matrix,
    y0: np.ndarray,
    times: Sequence[float],
    dt: float,
    norm_cap: float,
) -> list:
    """Integrate y' = A y from 0 through the sorted positive ``times``.

    For this linear autonomous operator the classical RK4 update equals the
    degree-4 Taylor polynomial of exp(h A), evaluated here in Horner form
    (four matvecs, minimal vector traffic).
    """
    out = []
    y = y0.copy()
    u = np.empty_like(y)
    t_prev = 0.0
    for t_target in times:
        span = t_target - t_prev
        nsteps = max(1, math.ceil(span / dt))
        h = span / nsteps
        for step in range(nsteps):
            np.multiply(A @ y, 0.25 * h, out=u)
            u += y
            np.multiply(A @ u, h / 3.0, out=u)
            u += y
            np.multiply(A @ u, 0.5 * h, out=u)
            u += y
            y += h * (A @ u)
            if step % 64 == 0 and not np.all(np.abs(y) <= norm_cap):
                raise UnstableStep(
                    f"solution norm exceeded 10x its initial value at t~{t_prev + step * h:.3g}"
                )
        if not np.all(np.isfinite(y)) or not np.all(np.abs(y) <= norm_cap):
            raise UnstableStep("solution norm exceeded 10x its initial value")
        out.append(y.copy())
        t_prev = t_target
    return out


def fd_integrate(
    p: Params,
    ic: InitialCondition,
    t_end: float,
    grid: SpatialGrid,
    dt: Optional[float] = None,
    snapshot_times: Optional[Sequence[float]] = None,
    richardson: bool = True,
    eps_tail: float = DEFAULT_EPS_TAIL,
) -> FdResult:
    """March the coupled system to ``t_end`` with central differences + RK4.

    The Richardson estimate is the max-norm difference against a half-step
    re-run scaled by 16/15 (the step-halving bound for a fourth-order method);
    it covers the time integration error only, the O(dx^2) spatial error is
    assessed by grid refinement in the tests.
    """
    validate_params(p)
    if t_end <= 0.0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    u0 = to_bloch(sample_initial(ic, grid, eps_tail=eps_tail))
    y0 = np.concatenate([u0.rho_plus, u0.c_i, u0.rho_minus, u0.c_r])
    A = _difference_operator(p, grid)
    if dt is None:
        dt = auto_time_step(p, grid)
    times = sorted(set(float(t) for t in (snapshot_times or [])) | {float(t_end)})
    if any(t <= 0.0 or t > t_end for t in times):
        raise ValueError("snapshot times must lie in (0, t_end]")
    norm_cap = 10.0 * max(np.max(np.abs(y0)), 1e-300)

    states = _rk4_run(A, y0, times, dt, norm_cap)

    n = grid.n_points

    def unpack(y: np.ndarray, t: float) -> BlochField:
        return BlochField(
            grid=grid,
            rho_plus=y[:n].copy(),
            c_i=y[n:2 * n].copy(),
            rho_minus=y[2 * n:3 * n].copy(),
            c_r=y[3 * n:].copy(),
            time=t,
        )

    final = states[-1]
    boundary = max(abs(final[0]), abs(final[n - 1]))
    if boundary > eps_tail:
        raise DomainTooNarrow(
            f"density at the boundary is {boundary:.3e} > eps_tail={eps_tail:.1e}; widen the grid"
        )

    rich = None
    if richardson:
        half = _rk4_run(A, y0, [times[-1]], dt / 2.0, norm_cap)[0]
        rich = (16.0 / 15.0) * float(np.max(np.abs(final - half)))

    snaps = {t: unpack(y, t) for t, y in zip(times, states)}
    return FdResult(field=snaps[times[-1]], richardson_error=rich, snapshots=snaps)


def quad_inverse_fourier(
    symbol: Callable[[np.ndarray], np.ndarray],
    t: float,
    x_points: np.ndarray,
    xi_max: float,
    n_xi: int = 2049,
    tol: float = 1e-10,
    max_nodes: int = 1 << 21,
) -> np.ndarray:
    """Evaluate (1/2pi) * integral_{-xi_max}^{xi_max} S(xi) e^{i xi x} dxi.

    ``symbol`` maps an array of frequencies (m,) to stacked matrices
    (m, 3, 3); ``t`` is carried only for the caller's bookkeeping (the symbol
    is expected to already include its time dependence).  The node count is
    doubled until two successive trapezoid results differ by less than
    ``tol`` in max norm.  Returns the real part, shape (len(x), 3, 3).
    """
    x = np.atleast_1d(np.asarray(x_points, dtype=float))
    prev = None
    n = max(129, int(n_xi) | 1)  # odd so xi = 0 is a node
    while n <= max_nodes:
        xi = np.linspace(-xi_max, xi_max, n)
        dxi = xi[1] - xi[0]
        weights = np.full(n, dxi)
        weights[0] = weights[-1] = 0.5 * dxi
        total = np.zeros((x.size, 9), dtype=complex)
        chunk = 8192
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            sym = np.asarray(symbol(xi[lo:hi]), dtype=complex).reshape(hi - lo, 9)
            sym = sym * weights[lo:hi, None]
            phase = np.exp(1j * np.outer(x, xi[lo:hi]))
            total += phase @ sym
        result = (total / (2.0 * math.pi)).reshape(x.size, 3, 3)
        if prev is not None and np.max(np.abs(result - prev)) < tol:
            return np.real(result)
        prev = result
        n = 2 * n - 1
    raise QuadratureNotConverged(
        f"inverse Fourier quadrature did not reach tol={tol:.1e} within {max_nodes} nodes"
    )
