"""Cross-validation matrix: closed forms vs spectral vs the two oracles.

Each check returns a :class:`CheckResult`; :func:`run_checks` collects the
fast or the full suite.  The CLI prints them as a table and exits nonzero if
any check fails; the test suite asserts them individually.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import delta0, gammaz0, omega0, oracle, specfun, spectral
from .core import (
    Custom,
    GaussianCoherent,
    GaussianMixture,
    LaplaceCoherent,
    LaplaceMixture,
    Params,
    SpatialGrid,
    UniformMixture,
    from_bloch,
    initial_mass,
    to_bloch,
)

FIG1 = Params(gamma_p=1e-3, gamma_z=1e-3, delta=1e-2, omega=0.0)
FIG4 = Params(gamma_p=1e-2, gamma_z=0.0, delta=1e-1, omega=1e-2)
FIG6 = Params(gamma_p=1e-3, gamma_z=1e-3, delta=0.0, omega=1e-2)

FIG1_IC = GaussianMixture(p=0.75, sigma1=1.0, sigma2=2.0)
FIG2_IC = LaplaceMixture(p=0.25, a=1.0, b=2.0)
FIG3_IC = UniformMixture(p=0.75, a=3.0, b=2.0)
FIG6_LEFT_IC = GaussianMixture(p=0.75, sigma1=2.0, sigma2=1.0)
FIG6_RIGHT_IC = GaussianCoherent(p=0.75, mu=0.8, k=1.0, sigma=1.0)

TAU1_REFERENCE = 81.1423506200


@dataclass
class CheckResult:
    name: str
    max_err: float
    tol: float
    passed: bool
    seconds: float

    @classmethod
    def from_error(cls, name: str, err: float, tol: float, seconds: float) -> "CheckResult":
        return cls(name=name, max_err=float(err), tol=tol, passed=bool(err < tol), seconds=seconds)


def _timed(fn: Callable[[], tuple]) -> tuple:
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def check_bloch_roundtrip(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = SpatialGrid(10.0, 256)

    def run():
        worst = 0.0
        for _ in range(25):
            d = _random_density(rng, grid)
            back = from_bloch(to_bloch(d))
            worst = max(
                worst,
                np.max(np.abs(back.rho11 - d.rho11)),
                np.max(np.abs(back.rho22 - d.rho22)),
                np.max(np.abs(back.rho12 - d.rho12)),
            )
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("bloch round-trip identity", err, 1e-14, secs)


def _random_density(rng, grid):
    from .core import DensityField

    n = grid.n_points
    return DensityField(
        grid=grid,
        rho11=rng.normal(size=n),
        rho22=rng.normal(size=n),
        rho12=rng.normal(size=n) + 1j * rng.normal(size=n),
        time=float(rng.uniform(0.0, 5.0)),
    )


def check_initial_masses() -> CheckResult:
    ics = [
        FIG1_IC, FIG2_IC, FIG3_IC, FIG6_RIGHT_IC,
        LaplaceCoherent.for_params(p=0.25, r=0.5, q=-0.5, params=FIG4),
    ]

    def run():
        return max(abs(initial_mass(ic) - 1.0) for ic in ics)

    err, secs = _timed(run)
    return CheckResult.from_error("initial conditions integrate to 1", err, 1e-8, secs)


def check_special_values() -> CheckResult:
    def run():
        worst = abs(specfun.erfc(0.0) - 1.0)
        for v in (0.3, 1.7, 4.0):
            worst = max(worst, abs(specfun.erfc(v) + specfun.erfc(-v) - 2.0))
        worst = max(worst, abs(specfun.erfc(1.0) - 0.15729920705028513))
        worst = max(worst, abs(specfun.bessel_j0(0.0) - 1.0))
        worst = max(worst, abs(specfun.bessel_j1(0.0)))
        worst = max(worst, abs(specfun.bessel_j0(2.404825557695773)))
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("special function pinned values", err, 1e-12, secs)


def check_kernel_parity(seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)

    def run():
        worst = 0.0
        for _ in range(20):
            p = Params(*rng.uniform(1e-3, 1.0, 4))
            t = float(rng.uniform(0.1, 80.0))
            x = rng.uniform(0.0, 40.0, 64)
            worst = max(worst, np.max(np.abs(specfun.h_plus(t, x, p) - specfun.h_plus(t, -x, p))))
            worst = max(worst, np.max(np.abs(specfun.h_minus(t, x, p) + specfun.h_minus(t, -x, p))))
            worst = max(worst, np.max(np.abs(specfun.phi_plus(t, x, p) - specfun.phi_plus(t, -x, p))))
            worst = max(worst, np.max(np.abs(specfun.phi_minus(t, x, p) + specfun.phi_minus(t, -x, p))))
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("kernel parity (even/odd)", err, 1e-12, secs)


def check_cone_kernel_masses() -> CheckResult:
    p = FIG4

    def run():
        worst = 0.0
        for t in (5.0, 25.0, 60.0):
            rule = gammaz0.ThetaQuadrature.build(512)
            reach = 2.0 * t * p.delta
            y = reach * np.cos(rule.nodes)
            jac = reach * np.sin(rule.nodes)
            k0 = specfun.kg_kernel_0(t, y, p)
            mass0 = float(np.sum(rule.weights * jac * k0))
            worst = max(worst, abs(mass0 - math.sin(2.0 * p.omega * t) / (2.0 * p.omega)))
            k1 = specfun.kg_kernel_1(t, y, p)
            mass1 = float(np.sum(rule.weights * jac * k1.values))
            mass1 += sum(w for _, w in k1.delta_shifts)
            worst = max(worst, abs(mass1 - math.cos(2.0 * p.omega * t)))
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("cone kernel masses", err, 1e-9, secs)


def check_tau1() -> CheckResult:
    def run():
        taus = delta0.imbalance_zeros(FIG6, 1)
        rel = abs(taus[0] - TAU1_REFERENCE) / TAU1_REFERENCE
        grid = SpatialGrid(32.0, 1024)
        x = grid.nodes
        q_tau = np.max(np.abs(delta0.imbalance_general(FIG6, FIG6_LEFT_IC, float(taus[0]), x)))
        q_max = max(
            np.max(np.abs(delta0.imbalance_general(FIG6, FIG6_LEFT_IC, t, x)))
            for t in (50.0, 100.0, 150.0, 200.0)
        )
        # both sub-criteria rescaled to the 1e-8 gate:
        # tau_1 relative error < 1e-8 and Q(tau_1) < 1e-10 * max Q
        return max(rel, (q_tau / q_max) * 1e2)

    err, secs = _timed(run)
    return CheckResult.from_error("first imbalance zero time", err, 1e-8, secs)


def check_green_omega0() -> CheckResult:
    def run():
        grid = SpatialGrid(24.0, 2048)
        t = 50.0
        G = spectral.green_function(FIG1, t, grid)
        Gc = omega0.green_omega0(FIG1, t, grid.nodes)
        return max(
            np.max(np.abs(G.entries[i, j] - Gc[:, i, j])) for i in range(3) for j in range(3)
        )

    err, secs = _timed(run)
    return CheckResult.from_error("green: closed omega=0 vs spectral", err, 1e-8, secs)


def check_green_delta0() -> CheckResult:
    def run():
        worst = 0.0
        t = 25.0
        for gz in (1e-2, 2e-2, 4e-2):
            p = Params(gamma_p=1e-3, gamma_z=gz, delta=0.0, omega=1e-2)
            grid = SpatialGrid(8.0, 2048)
            G = spectral.green_function(p, t, grid)
            Gc = delta0.green_delta0(p, t, grid.nodes)
            worst = max(
                worst,
                max(np.max(np.abs(G.entries[i, j] - Gc[:, i, j])) for i in range(3) for j in range(3)),
            )
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("green: closed delta=0 vs spectral (3 regimes)", err, 1e-8, secs)


def check_stability(n_draws: int = 200, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)

    def run():
        worst_re = -math.inf
        for _ in range(n_draws):
            p = Params(*np.exp(rng.uniform(math.log(1e-4), math.log(10.0), 4)))
            xis = rng.uniform(-100.0, 100.0, 8)
            xis = xis[xis != 0.0]
            report = spectral.stability_check(p, [0.0, *xis])
            worst_re = max(worst_re, report.max_real_part)
        # stability_check raises on any violation; report 0/1 as pass/fail
        return 0.0 if worst_re < 0.0 else 1.0

    err, secs = _timed(run)
    return CheckResult.from_error(f"dissipativity on {n_draws} random draws", err, 0.5, secs)


def check_mass_conservation() -> CheckResult:
    p = Params(gamma_p=1e-3, gamma_z=2e-3, delta=1e-2, omega=5e-3)

    def run():
        grid = SpatialGrid(28.0, 2048)
        worst = 0.0
        for t in (10.0, 60.0, 120.0):
            u = spectral.solve(p, FIG1_IC, t, grid)
            worst = max(worst, abs(u.mass() - 1.0))
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("mass conservation (spectral, general rates)", err, 1e-8, secs)


def check_identities() -> CheckResult:
    def run():
        rep = gammaz0.convolution_identities_check(
            FIG4, 25.0, [-7.0, -2.0, 0.0, 1.5, 4.0, 5.5, 8.0, 12.0]
        )
        return rep.max_error()

    err, secs = _timed(run)
    return CheckResult.from_error("driven-regime convolution identities", err, 1e-8, secs)


def check_greez_vs_quadrature() -> CheckResult:
    def run():
        worst = 0.0
        for t, n in ((1.0, 32768), (25.0, 8192)):
            grid = SpatialGrid(260.0, n)
            G = gammaz0.green_gammaz0(FIG4, t, grid)
            xi_max = math.sqrt(18.0 * math.log(10.0) / (2.0 * FIG4.gamma_p * t))
            sel = np.linspace(0, grid.n_points - 1, 301).astype(int)
            K = oracle.quad_inverse_fourier(
                gammaz0.exp_symbol_closed(FIG4, t), t, grid.nodes[sel], xi_max
            )
            worst = max(
                worst,
                max(np.max(np.abs(G.entries[i, j][sel] - K[:, i, j])) for i in range(3) for j in range(3)),
            )
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("green: kernel assembly vs quadrature oracle", err, 1e-7, secs)


def check_semigroup() -> CheckResult:
    p = Params(gamma_p=1e-3, gamma_z=1e-3, delta=1e-2, omega=1e-2)

    def run():
        grid = SpatialGrid(28.0, 2048)
        u_direct = spectral.solve(p, FIG1_IC, 50.0, grid)
        u_step = spectral.solve(p, FIG1_IC, 30.0, grid)
        u_two = spectral.solve(p, Custom(from_bloch(u_step)), 20.0, grid)
        return max(
            np.max(np.abs(u_two.rho_plus - u_direct.rho_plus)),
            np.max(np.abs(u_two.c_i - u_direct.c_i)),
            np.max(np.abs(u_two.rho_minus - u_direct.rho_minus)),
            np.max(np.abs(u_two.c_r - u_direct.c_r)),
        )

    err, secs = _timed(run)
    return CheckResult.from_error("semigroup property", err, 1e-8, secs)


def check_fd_cross(level: str = "full") -> CheckResult:
    # uses the same aligned windows as the three-way acceptance helper (the
    # uniform plateau edges must land on nodes or the sampled initial data
    # differs from the analytic one at O(dx))
    def run():
        worst = 0.0
        t = 50.0
        for ic, (half_width, n) in THREE_WAY_CASES.values():
            grid = SpatialGrid(half_width, n)
            fd = oracle.fd_integrate(FIG1, ic, t, grid, richardson=False)
            u = spectral.solve(FIG1, ic, t, grid)
            worst = max(worst, np.max(np.abs(fd.field.rho_plus - u.rho_plus)))
            worst = max(worst, np.max(np.abs(fd.field.rho_minus - u.rho_minus)))
        return worst

    err, secs = _timed(run)
    return CheckResult.from_error("finite-difference oracle vs spectral (t=50)", err, 3e-5, secs)


THREE_WAY_CASES = {
    # scenario -> (initial condition, (half_width, n_points)); each window is
    # the tail-rule minimum and the spacings sit at dx ~ 0.010-0.012, where
    # the measured O(dx^2) FD error clears the 1e-5 gate for all three shapes
    "gaussian": (FIG1_IC, (21.0, 4096)),
    "laplace": (FIG2_IC, (48.0, 8192)),
    "uniform": (FIG3_IC, (16.0, 4096)),
}


def three_way_agreement_case(case: str, times=(50.0, 200.0)) -> dict:
    """Closed vs spectral vs finite-difference errors for one omega=0 scenario.

    Importable top-level helper so the acceptance suite can fan the three
    scenarios out to worker processes.
    """
    ic, (half_width, n) = THREE_WAY_CASES[case]
    grid = SpatialGrid(half_width, n)
    solver = {
        "gaussian": omega0.gaussian_solution,
        "laplace": omega0.laplace_solution,
        "uniform": omega0.uniform_solution,
    }[case]
    fd = oracle.fd_integrate(FIG1, ic, max(times), grid,
                             snapshot_times=list(times), richardson=True)
    out = {"richardson": fd.richardson_error, "dx": grid.dx}
    for t in times:
        P, Q = solver(FIG1, ic, t, grid.nodes)
        u = spectral.solve(FIG1, ic, t, grid)
        f = fd.snapshots[t]
        out[t] = {
            "closed_vs_spectral": max(
                float(np.max(np.abs(u.rho_plus - P))),
                float(np.max(np.abs(u.rho_minus - Q))),
            ),
            "closed_vs_fd": max(
                float(np.max(np.abs(f.rho_plus - P))),
                float(np.max(np.abs(f.rho_minus - Q))),
            ),
        }
    return out


def check_driven_solution_vs_symbol() -> CheckResult:
    """Exact-transform cross-check of the Laplace-coherent solution."""

    p = FIG4
    ic = LaplaceCoherent.for_params(p=0.25, r=0.0, q=-0.5, params=p)

    def run():
        t = 25.0
        grid = SpatialGrid(260.0, 8192)
        u = gammaz0.solve_laplace_coherent(p, ic, t, grid)
        amp = math.sqrt(ic.p * (1.0 - ic.p))
        weights = np.array([1.0, ic.q * amp, 2.0 * ic.p - 1.0])
        closed = gammaz0.exp_symbol_closed(p, t)

        def symbol(xis):
            f_hat = 4.0 * p.omega**2 / (4.0 * (p.delta**2 * xis**2 + p.omega**2))
            e = closed(xis)
            out = np.zeros_like(e)
            out[:, :, 0] = np.einsum("mij,j->mi", e, weights) * f_hat[:, None]
            return out

        xi_max = math.sqrt(18.0 * math.log(10.0) / (2.0 * p.gamma_p * t))
        sel = np.linspace(0, grid.n_points - 1, 301).astype(int)
        K = oracle.quad_inverse_fourier(symbol, t, grid.nodes[sel], xi_max)
        return max(
            np.max(np.abs(K[:, 0, 0] - u.rho_plus[sel])),
            np.max(np.abs(K[:, 1, 0] - u.c_i[sel])),
            np.max(np.abs(K[:, 2, 0] - u.rho_minus[sel])),
        )

    err, secs = _timed(run)
    return CheckResult.from_error("driven solution vs transform oracle", err, 1e-8, secs)


FAST_CHECKS = (
    check_bloch_roundtrip,
    check_initial_masses,
    check_special_values,
    check_kernel_parity,
    check_cone_kernel_masses,
    check_tau1,
    check_green_omega0,
    check_green_delta0,
    check_stability,
    check_mass_conservation,
)

FULL_CHECKS = FAST_CHECKS + (
    check_identities,
    check_greez_vs_quadrature,
    check_semigroup,
    check_driven_solution_vs_symbol,
    check_fd_cross,
)


def run_checks(level: str = "fast") -> list:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    checks: Iterable = FAST_CHECKS if level == "fast" else FULL_CHECKS
    return [fn() for fn in checks]
