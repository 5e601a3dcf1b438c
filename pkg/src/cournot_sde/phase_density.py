"""Stationary density of the polar angle of a planar linear SDE.

For du = A u dt + B u dw written in polar form u = r (cos t, sin t), the angle
obeys

    d theta = (q3 - q2 q4) dt + q4 dw,

whose stationary Fokker-Planck equation

    d/dtheta[(q3 - q2 q4) p] - 1/2 d^2/dtheta^2[q4^2 p] = 0

fixes the density ``p`` once periodicity and normalization are imposed. All
angular coefficients are pi-periodic, so densities are built on [0, pi] and
extended to the full circle.

Three constructions are provided: an integrated (closed-form) solution, the
first-order backward-difference recurrence, and a Monte-Carlo histogram of the
simulated angle. ``fpe_residual`` is the arbiter for the first two.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from . import _kernels
from ._rng import ordered_map, stream
from .core_model import LinearSystem, NoiseWiring
from .errors import (
    DegenerateNoise,
    InvalidParams,
    NonPositiveDensity,
    ResidualTooLarge,
    SchemeBreakdown,
)

EPS_Q4 = 1e-8
EPS_F = 1e-12
RESIDUAL_TOL = 1e-4
NEG_TOL = 1e-10
TWO_PI = 2 * math.pi


class DensityMethod(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    BACKWARD_DIFFERENCE = "backward_difference"
    MC_HISTOGRAM = "mc_histogram"


def _forms(m, c, s):
    """(e.Me, e_perp.Me, d/dtheta e_perp.Me) for e = (cos, sin)."""
    along = m[0, 0] * c * c + (m[0, 1] + m[1, 0]) * c * s + m[1, 1] * s * s
    across = m[1, 0] * c * c + (m[1, 1] - m[0, 0]) * c * s - m[0, 1] * s * s
    s2, c2 = 2 * c * s, c * c - s * s
    d_across = -(m[0, 1] + m[1, 0]) * s2 + (m[1, 1] - m[0, 0]) * c2
    return along, across, d_across


class TrigCoefficients:
    """The trigonometric coefficients q1..q5 of a linear system, as functions of theta.

    ``q5`` follows the printed form -(b12+b21) sin 2t - (b22-b11) cos 2t. The
    density equations need the derivative of q4, available as ``dq4``; the two
    coincide exactly when b11 == b22.
    """

    period = math.pi

    def __init__(self, sys: LinearSystem):
        self.sys = sys
        self._a = np.asarray(sys.a)
        self._b = np.asarray(sys.b)

    def q1(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _forms(self._a, np.cos(theta), np.sin(theta))[0]

    def q2(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _forms(self._b, np.cos(theta), np.sin(theta))[0]

    def q3(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _forms(self._a, np.cos(theta), np.sin(theta))[1]

    def q4(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _forms(self._b, np.cos(theta), np.sin(theta))[1]

    def q5(self, theta):
        theta = np.asarray(theta, dtype=float)
        b = self._b
        return -(b[0, 1] + b[1, 0]) * np.sin(2 * theta) - (b[1, 1] - b[0, 0]) * np.cos(2 * theta)

    def dq4(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _forms(self._b, np.cos(theta), np.sin(theta))[2]

    def evaluate(self, theta) -> dict:
        return {name: getattr(self, name)(theta) for name in ("q1", "q2", "q3", "q4", "q5")}


def trig_coefficients(sys: LinearSystem) -> TrigCoefficients:
    return TrigCoefficients(sys)


def angular_coefficients(sys: LinearSystem, theta):
    """Growth integrand, angular drift, angular variance and its derivative.

    For shared wiring these are q1 + (q4^2 - q2^2)/2, q3 - q2 q4, q4^2 and
    2 q4 q4'. With independent wiring each row of B contributes its own channel
    and the channel terms are summed.
    """
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    q1, q3, _ = _forms(sys.a, c, s)
    growth = np.array(q1, dtype=float, copy=True)
    drift = np.array(q3, dtype=float, copy=True)
    var = np.zeros_like(drift)
    dvar = np.zeros_like(drift)
    for ch in sys.noise_channels():
        q2, q4, dq4 = _forms(ch, c, s)
        growth = growth + 0.5 * (q4 * q4 - q2 * q2)
        drift = drift - q2 * q4
        var = var + q4 * q4
        dvar = dvar + 2 * q4 * dq4
    return growth, drift, var, dvar


@dataclass
class PhaseDensity:
    grid: np.ndarray
    values: np.ndarray
    normalization_error: float
    fpe_residual: float
    method: DensityMethod
    metadata: dict = field(default_factory=dict)

    @property
    def n_grid(self) -> int:
        return len(self.grid) - 1

    def integral(self, f=None) -> float:
        y = self.values if f is None else f(self.grid) * self.values
        return float(simpson(y, x=self.grid))


def _check_noise(sys: LinearSystem, n: int, eps_q4: float):
    theta = np.linspace(0.0, math.pi, max(n, 64) + 1)
    var = angular_coefficients(sys, theta)[2]
    floor = float(np.sqrt(np.min(var)))
    if not floor > eps_q4:
        raise DegenerateNoise(
            f"min |q4(theta)| = {floor:.3g} <= {eps_q4:g}: the angle has no diffusion "
            "somewhere on the circle"
        )
    return floor


def _check_grid(n_grid: int):
    if n_grid < 64 or n_grid % 2:
        raise InvalidParams(f"n_grid must be an even integer >= 64, got {n_grid}")


def _periodic_derivatives(f, h):
    """4th-order central first and second derivatives of periodic samples."""
    fp1, fm1 = np.roll(f, -1), np.roll(f, 1)
    fp2, fm2 = np.roll(f, -2), np.roll(f, 2)
    d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h)
    d2 = (-fp2 + 16 * fp1 - 30 * f + 16 * fm1 - fm2) / (12 * h * h)
    return d1, d2


def fpe_residual_profile(sys: LinearSystem, p: PhaseDensity) -> np.ndarray:
    """Pointwise |d(m p) - d2(v p)/2| on the closed grid of ``p``.

    The grid is treated as periodic (its last point is dropped and the
    first value repeated), so a density that fails to close up on the circle
    shows a large residual.
    """
    grid = np.asarray(p.grid)
    if len(grid) - 1 < 64:
        raise InvalidParams("fpe_residual needs at least 64 grid intervals")
    h = grid[1] - grid[0]
    vals = np.asarray(p.values)[:-1]
    _, drift, var, _ = angular_coefficients(sys, grid[:-1])
    d_flux, _ = _periodic_derivatives(drift * vals, h)
    _, d2_diff = _periodic_derivatives(var * vals, h)
    res = np.abs(d_flux - 0.5 * d2_diff)
    return np.append(res, res[0])


def fpe_residual(sys: LinearSystem, p: PhaseDensity) -> float:
    """Max-norm of the stationary Fokker-Planck residual on the grid of ``p``."""
    return float(np.max(fpe_residual_profile(sys, p)))


def _scalar_coefficients(sys: LinearSystem):
    """Fast scalar (drift, var) of the angle SDE, for ODE right-hand sides."""
    a = [float(v) for v in np.asarray(sys.a).ravel()]
    chans = [[float(v) for v in m.ravel()] for m in sys.noise_channels()]

    def coeffs(t):
        c, s = math.cos(t), math.sin(t)
        cc, cs, ss = c * c, c * s, s * s
        drift = a[2] * cc + (a[3] - a[0]) * cs - a[1] * ss
        var = 0.0
        for m in chans:
            q2 = m[0] * cc + (m[1] + m[2]) * cs + m[3] * ss
            q4 = m[2] * cc + (m[3] - m[0]) * cs - m[1] * ss
            drift -= q2 * q4
            var += q4 * q4
        return drift, var

    return coeffs


def _finish(sys, grid, values, method, meta, *, enforce_residual=None):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonPositiveDensity("density has non-finite values")
    total = simpson(values, x=grid)
    if not total > 0:
        raise NonPositiveDensity("density integrates to a non-positive value")
    values = values / total
    if np.min(values) < -NEG_TOL:
        raise NonPositiveDensity(f"density takes the negative value {np.min(values):.3g}")
    values = np.clip(values, 0.0, None)
    values[-1] = values[0]
    norm_err = abs(float(simpson(values, x=grid)) - 1.0)
    dens = PhaseDensity(grid, values, norm_err, math.nan, method, meta)
    dens.fpe_residual = fpe_residual(sys, dens) if len(grid) - 1 >= 64 else math.nan
    if enforce_residual is not None and not dens.fpe_residual < enforce_residual:
        raise ResidualTooLarge(
            f"stationary FPE residual {dens.fpe_residual:.3g} exceeds {enforce_residual:g}"
        )
    return dens


def _literal_closed_form(sys: LinearSystem, grid):
    """p = k / (D q4^2) (1 + eta int_0^t D) with D from the printed integrand (uses q5)."""
    b11, b12, b21, b22 = (float(v) for v in np.asarray(sys.b).ravel())
    drift_var = _scalar_coefficients(sys)

    def rhs(t, y):
        drift, var = drift_var(t)
        c, s = math.cos(t), math.sin(t)
        q4 = b21 * c * c + (b22 - b11) * c * s - b12 * s * s
        q5 = -(b12 + b21) * math.sin(2 * t) - (b22 - b11) * math.cos(2 * t)
        return [(drift - q4 * q5) / var, math.exp(-2.0 * y[0])]

    # the trial solve may overflow for some parameters; such results are rejected below
    try:
        with np.errstate(all="ignore"):
            sol = solve_ivp(rhs, (0.0, TWO_PI), [0.0, 0.0], method="DOP853",
                            t_eval=grid, rtol=1e-11, atol=1e-13)
    except OverflowError:
        return None
    if not sol.success:
        return None
    big_r, int_d = sol.y
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        d = np.exp(-2.0 * big_r)
        eta = (d[-1] - 1.0) / int_d[-1]
        var = angular_coefficients(sys, grid)[2]
        values = (1.0 + eta * int_d) / (d * var)
    if not np.all(np.isfinite(values)):
        return None
    return values


def _periodic_flux_solution(sys: LinearSystem, n_half: int):
    """Pi-periodic stationary solution on n_half + 1 points of [0, pi].

    With y = q4^2 p / 2 the stationary equation integrates once to
    y' = phi' y + J, phi' = 2 (q3 - q2 q4) / q4^2, J the constant probability
    flux. The linear ODE is integrated in its stable direction (forward when
    phi decreases over a period, backward otherwise) and the free constant is
    fixed by y(pi) = y(0).
    """
    theta = np.linspace(0.0, math.pi, n_half + 1)
    drift_var = _scalar_coefficients(sys)

    def dphi(t):
        drift, var = drift_var(t)
        return 2.0 * drift / var

    phi_sol = solve_ivp(lambda t, y: [dphi(t)], (0.0, math.pi), [0.0],
                        method="DOP853", rtol=1e-12, atol=1e-12)
    phi_pi = float(phi_sol.y[0, -1])
    forward = phi_pi <= 0.0
    span, t_eval = ((0.0, math.pi), theta) if forward else ((math.pi, 0.0), theta[::-1])

    def rhs(t, y):
        g = dphi(t)
        return [g, g * y[1] + 1.0]

    sol = solve_ivp(rhs, span, [0.0, 0.0], method="DOP853", t_eval=t_eval,
                    rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise ResidualTooLarge(f"stationary ODE solve failed: {sol.message}")
    phi, z = sol.y
    if forward:
        denom = 1.0 - math.exp(phi_pi)
        if abs(denom) < 1e-14:
            y, variant = np.exp(phi), "zero_flux"
        else:
            y, variant = z[-1] / denom * np.exp(phi) + z, "periodic_flux"
    else:
        # phi is measured from pi here: phi(t) = Phi(t) - Phi(pi)
        phi, z = phi[::-1], z[::-1]
        y = z[0] / (1.0 - math.exp(-phi_pi)) * np.exp(phi) + z
        # unit flux gives y < 0 in this direction; the physical flux is negative
        y = -y
        variant = "periodic_flux"
    var = angular_coefficients(sys, theta)[2]
    return theta, 2.0 * y / var, variant


def _extend(values_half):
    """Extend samples on [0, pi] (closed) to the closed grid on [0, 2 pi]."""
    return np.concatenate([values_half[:-1], values_half[:-1], values_half[:1]])


def density_closed_form(sys: LinearSystem, n_grid: int = 2048, *, eps_q4: float = EPS_Q4,
                        residual_tol: float = RESIDUAL_TOL) -> PhaseDensity:
    """Integrated stationary density on a closed grid of ``n_grid`` intervals.

    The textbook formula p = k/(D q4^2)(1 + eta int D) is tried first and kept
    when its Fokker-Planck residual is below ``residual_tol``; otherwise the
    directly integrated periodic solution is used. ``metadata['variant']``
    records which one was returned.
    """
    _check_grid(n_grid)
    _check_noise(sys, n_grid, eps_q4)
    grid = np.linspace(0.0, TWO_PI, n_grid + 1)
    meta = {"n_grid": n_grid}
    if sys.noise_wiring is NoiseWiring.SHARED:
        values = _literal_closed_form(sys, grid)
        if values is not None and np.min(values) >= -NEG_TOL * np.max(np.abs(values)):
            try:
                dens = _finish(sys, grid, values, DensityMethod.CLOSED_FORM,
                               dict(meta, variant="literal"))
            except NonPositiveDensity:
                dens = None
            if dens is not None and dens.fpe_residual < residual_tol:
                return dens
            if dens is not None:
                meta["literal_residual"] = dens.fpe_residual
    _, half, variant = _periodic_flux_solution(sys, n_grid // 2)
    return _finish(sys, grid, _extend(half), DensityMethod.CLOSED_FORM,
                   dict(meta, variant=variant), enforce_residual=residual_tol)


@dataclass
class _HalfScheme:
    theta: np.ndarray
    values: np.ndarray
    flagged: bool


def _backward_difference_half(sys: LinearSystem, n: int, eps_q4: float) -> _HalfScheme:
    if n < 16:
        raise InvalidParams(f"N must be >= 16, got {n}")
    _check_noise(sys, n, eps_q4)
    h = math.pi / n
    theta = np.arange(n + 1) * h
    _, drift, var, dvar = angular_coefficients(sys, theta)
    # -q3 + q2 q4 + q4 q5  ->  -drift + var'/2
    denom = 2 * h * (-drift + 0.5 * dvar) + var
    if np.min(np.abs(denom)) < EPS_F:
        i = int(np.argmin(np.abs(denom)))
        raise SchemeBreakdown(f"F({i}) denominator {denom[i]:.3g} is below {EPS_F:g}")
    f = 2 * h / denom
    carry = var / (2 * h)

    def run(p0, seed):
        out = np.empty(n + 1)
        out[0] = seed
        prev = seed
        for i in range(1, n + 1):
            prev = (p0 + carry[i] * prev) * f[i]
            out[i] = prev
        return out

    flux_part = run(1.0, 0.0)
    seed_part = run(0.0, 1.0)
    # periodicity p(N) = p(0): p0 * P(N) + s * S(N) = s
    p0, s = 1.0 - seed_part[-1], flux_part[-1]
    flagged = False
    if math.hypot(p0, s) < 1e-12 or not math.isfinite(p0 + s):
        p0, s, flagged = 0.0, 1.0, True
    values = p0 * flux_part + s * seed_part
    if not np.all(np.isfinite(values)):
        raise SchemeBreakdown("backward-difference recurrence overflowed")
    if np.sum(values) < 0:
        values = -values
    return _HalfScheme(theta, values, flagged)


def density_backward_difference(sys: LinearSystem, n: int = 2000, *,
                                eps_q4: float = EPS_Q4) -> PhaseDensity:
    """First-order backward-difference density with ``n`` steps on [0, pi].

    The recurrence p(i) = (p0 + q4(i)^2 p(i-1)/(2h)) F(i) is linear in the flux
    constant p0 and the seed p(0); both are fixed by p(n) = p(0) and the
    normalization over [0, 2 pi].
    """
    half = _backward_difference_half(sys, n, eps_q4)
    grid = np.linspace(0.0, TWO_PI, 2 * n + 1)
    meta = {"N": n, "periodicity_fallback": half.flagged}
    return _finish(sys, grid, _extend(half.values), DensityMethod.BACKWARD_DIFFERENCE, meta)


def mc_angle_histogram(sys: LinearSystem, seed: int = 1, n_samples: int = 10**6,
                       burn_in_time: float = 5.0, step_h: float = 1e-3, *,
                       n_bins: int = 64, n_chains: int = 1000, sample_every: float = 0.05,
                       chunk: int = 100, workers=None, eps_q4: float = EPS_Q4) -> PhaseDensity:
    """Histogram of theta mod 2 pi from Euler-Maruyama chains of the angle SDE.

    Chains start at theta = 0, run ``burn_in_time``, then record every
    ``sample_every`` time units until ``n_samples`` values are collected.
    Bins are centred on the grid points; chains are grouped in fixed chunks,
    each with its own stream, so the result does not depend on ``workers``.
    """
    _check_noise(sys, 256, eps_q4)
    if n_bins < 8 or n_samples < n_bins or step_h <= 0:
        raise InvalidParams("need n_bins >= 8, n_samples >= n_bins and step_h > 0")
    per_chain = -(-n_samples // n_chains)
    burn_steps = int(round(burn_in_time / step_h))
    thin = max(1, int(round(sample_every / step_h)))
    a = np.ascontiguousarray(sys.a)
    ch = np.ascontiguousarray(sys.noise_channels())
    n_ch = ch.shape[0]
    starts = list(range(0, n_chains, chunk))

    def run_chunk(idx):
        start = starts[idx]
        m = min(chunk, n_chains - start)
        rng = stream(seed, idx)
        theta = np.zeros(m)
        remaining = burn_steps
        while remaining > 0:
            k = min(remaining, 4096)
            _kernels.advance_angles(theta, rng.standard_normal((k, m, n_ch)), step_h, a, ch)
            remaining -= k
        rec = np.empty((per_chain, m))
        for r in range(per_chain):
            _kernels.advance_angles(theta, rng.standard_normal((thin, m, n_ch)), step_h, a, ch)
            rec[r] = theta
        return rec

    recs = ordered_map(run_chunk, range(len(starts)), workers)
    samples = np.concatenate([r.T.ravel() for r in recs])[:n_samples]
    width = TWO_PI / n_bins
    idx = np.floor(np.mod(samples + 0.5 * width, TWO_PI) / width).astype(np.int64) % n_bins
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    values = counts / (len(samples) * width)
    grid = np.linspace(0.0, TWO_PI, n_bins + 1)
    values = np.append(values, values[0])
    meta = {"seed": seed, "n_samples": int(len(samples)), "burn_in_time": burn_in_time,
            "step_h": step_h, "n_bins": n_bins, "n_chains": n_chains,
            "sample_every": thin * step_h}
    norm_err = abs(float(simpson(values, x=grid)) - 1.0)
    dens = PhaseDensity(grid, values, norm_err, math.nan, DensityMethod.MC_HISTOGRAM, meta)
    dens.fpe_residual = fpe_residual(sys, dens) if n_bins >= 64 else math.nan
    return dens


def sample_density(p: PhaseDensity, theta) -> np.ndarray:
    """Periodic linear interpolation of a density at arbitrary angles."""
    return np.interp(np.mod(theta, TWO_PI), p.grid, p.values)
