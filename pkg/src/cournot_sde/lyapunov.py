"""Top Lyapunov exponent of a planar linear SDE.

Three independent estimators:

* ``lambda_quadrature`` - phase average of the log-radius growth rate
  q1 + (q4^2 - q2^2)/2 against the stationary angle density;
* ``lambda_discrete`` - the same average as a Riemann sum over the
  backward-difference density;
* ``lambda_monte_carlo`` - log-norm growth of simulated paths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from . import _kernels
from ._rng import ordered_map, stream
from .core_model import GameParams, LinearSystem, NoiseWiring, linearize, rotation_scale_parts
from .errors import InvalidParams, NumericalFailure, NumericalOverflow
from .phase_density import (
    EPS_Q4,
    PhaseDensity,
    _backward_difference_half,
    angular_coefficients,
    density_closed_form,
)

BRACKET_WIDTH = 1e-3


class LyapunovMethod(str, enum.Enum):
    QUADRATURE = "quadrature"
    DISCRETE_SCHEME = "discrete"
    MONTE_CARLO = "monte_carlo"


@dataclass
class LyapunovEstimate:
    value: float
    method: LyapunovMethod
    std_error: float = 0.0
    n_used: int = 0
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "std_error": self.std_error,
            "n_used": self.n_used,
            "metadata": self.metadata,
        }


def lambda_quadrature(sys: LinearSystem, density: Optional[PhaseDensity] = None, *,
                      n_grid: int = 2048) -> LyapunovEstimate:
    """Simpson average of the growth integrand against the stationary density.

    For rotation-scale noise b = alpha I + beta J the value is also expressed
    through the harmonic moments c2 = <cos 2t>, s2 = <sin 2t>:
    lambda = (a11 + a22 + beta^2 - alpha^2)/2 + (a11 - a22) c2/2 + (a12 + a21) s2/2,
    and checked against the direct average.
    """
    if density is None:
        density = density_closed_form(sys, n_grid)
    grid = density.grid
    growth = angular_coefficients(sys, grid)[0]
    value = float(simpson(growth * density.values, x=grid))
    meta = {
        "density_variant": density.metadata.get("variant", density.method.value),
        "n_grid": density.n_grid,
        "fpe_residual": density.fpe_residual,
    }
    parts = rotation_scale_parts(sys.b)
    if parts is not None and sys.noise_wiring is NoiseWiring.SHARED:
        alpha, beta = parts
        a = sys.a
        c2 = density.integral(lambda t: np.cos(2 * t))
        s2 = density.integral(lambda t: np.sin(2 * t))
        harmonic = (0.5 * (a[0, 0] + a[1, 1] + beta**2 - alpha**2)
                    + 0.5 * (a[0, 0] - a[1, 1]) * c2 + 0.5 * (a[1, 0] + a[0, 1]) * s2)
        meta.update(c2=c2, s2=s2, harmonic_form=harmonic,
                    harmonic_form_ok=abs(harmonic - value) < 1e-8)
        game = sys.game
        if game is not None:
            c1, cc2, k1, k2 = game.c1, game.c2, game.k1, game.k2
            game_form = (-(k1 * c1 + k2 * cc2) * (c1 + cc2) + 0.5 * (beta**2 - alpha**2)
                         - (k1 * c1 - k2 * cc2) * (c1 + cc2) * c2
                         + 0.5 * (k2 - k1) * (c1**2 - cc2**2) * s2)
            meta.update(game_form=game_form, game_form_ok=abs(game_form - value) < 1e-8)
    return LyapunovEstimate(value, LyapunovMethod.QUADRATURE, 0.0, density.n_grid, meta)


def lambda_discrete(sys: LinearSystem, n: int = 2000, *, eps_q4: float = EPS_Q4) -> LyapunovEstimate:
    """lambda(N) = sum_{i=0}^{N} growth(i) p(i) h over the half period [0, pi].

    The backward-difference density is normalized so that the same sum of
    p(i) h equals one; the half-period average equals the full-circle one
    because integrand and density are pi-periodic.
    """
    half = _backward_difference_half(sys, n, eps_q4)
    h = math.pi / n
    weights = half.values * h
    weights = weights / weights.sum()
    growth = angular_coefficients(sys, half.theta)[0]
    value = float(np.dot(growth, weights))
    meta = {"N": n, "normalization": "sum_{i=0}^{N} p(i) h = 1 on [0, pi]",
            "periodicity_fallback": half.flagged}
    return LyapunovEstimate(value, LyapunovMethod.DISCRETE_SCHEME, 0.0, n, meta)


def lambda_monte_carlo(sys: LinearSystem, seed: int = 1, n_paths: int = 200,
                       horizon_T: float = 200.0, step_h: float = 1e-3, *,
                       extrapolate: bool = True, renormalize: bool = True,
                       workers=None, stream_key: Sequence[int] = ()) -> LyapunovEstimate:
    """Mean log-norm growth rate of Euler-Maruyama paths of the linear SDE.

    Path i starts on the unit circle at angle pi*i/n_paths and draws from
    stream (seed, *stream_key, i). With ``extrapolate`` each path is also
    advanced with step 2h on the summed increments, and the per-path
    Richardson combination 2*rate(h) - rate(2h) is used; this cancels the
    O(h) bias of the Euler scheme, which is large when |B| is of order one.
    The raw step-h estimate is kept in the metadata.
    """
    if n_paths < 2:
        raise InvalidParams(f"n_paths must be >= 2, got {n_paths}")
    if not step_h > 0 or horizon_T / step_h < 1e3:
        raise InvalidParams("need step_h > 0 and horizon_T / step_h >= 1000")
    n_steps = int(round(horizon_T / step_h))
    if extrapolate and n_steps % 2:
        n_steps += 1
    t_total = n_steps * step_h
    a = np.ascontiguousarray(sys.a)
    ch = np.ascontiguousarray(sys.noise_channels())
    n_ch = ch.shape[0]

    def one_path(i):
        rng = stream(seed, *stream_key, i)
        z = rng.standard_normal((n_steps, n_ch))
        phi = math.pi * i / n_paths
        e0 = np.array([math.cos(phi), math.sin(phi)])
        return _kernels.log_growth(a, ch, e0, z, step_h, extrapolate, renormalize)

    results = ordered_map(one_path, range(n_paths), workers)
    if any(r[2] for r in results):
        raise NumericalOverflow("path norm left the floating-point range; enable renormalization")
    rate_h = np.array([r[0] for r in results]) / t_total
    meta = {"seed": seed, "n_paths": n_paths, "horizon_T": t_total, "step_h": step_h,
            "extrapolated": extrapolate, "renormalized": renormalize,
            "raw_em_value": float(rate_h.mean()),
            "raw_em_std_error": float(rate_h.std(ddof=1) / math.sqrt(n_paths))}
    if extrapolate:
        rate_2h = np.array([r[1] for r in results]) / t_total
        per_path = 2 * rate_h - rate_2h
        meta["raw_em_2h_value"] = float(rate_2h.mean())
    else:
        per_path = rate_h
    se = float(per_path.std(ddof=1) / math.sqrt(n_paths))
    # identical paths (B = 0, symmetric starts) would give se = 0
    se = max(se, np.finfo(float).eps * max(1.0, abs(float(per_path.mean()))))
    return LyapunovEstimate(float(per_path.mean()), LyapunovMethod.MONTE_CARLO, se, n_paths, meta)


def lambda_for(sys: LinearSystem, method: LyapunovMethod | str, settings: Optional[dict] = None,
               *, stream_key: Sequence[int] = ()) -> LyapunovEstimate:
    settings = dict(settings or {})
    method = LyapunovMethod(method)
    if method is LyapunovMethod.QUADRATURE:
        return lambda_quadrature(sys, n_grid=settings.get("n_grid", 2048))
    if method is LyapunovMethod.DISCRETE_SCHEME:
        return lambda_discrete(sys, settings.get("N", 2000))
    return lambda_monte_carlo(
        sys,
        settings.get("seed", 1),
        settings.get("n_paths", 200),
        settings.get("horizon_T", 200.0),
        settings.get("step_h", 1e-3),
        extrapolate=settings.get("extrapolate", True),
        workers=1,
        stream_key=stream_key,
    )


@dataclass
class SweepRow:
    param: float
    value: float
    std_error: float
    status: str


@dataclass
class Bracket:
    lo: float
    hi: float
    value_lo: float
    value_hi: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class SweepResult:
    vary: str
    fixed: dict
    method: LyapunovMethod
    rows: list
    brackets: list

    @property
    def n_ok(self) -> int:
        return sum(r.status == "ok" for r in self.rows)


def _swept_system(base: GameParams, vary: str, value: float, alpha: float, beta: float) -> LinearSystem:
    if vary == "alpha":
        alpha = value
    else:
        beta = value
    return linearize(GameParams.rotation_scale(base.c1, base.c2, base.k1, base.k2, alpha, beta))


def lambda_sweep(base: GameParams, vary: str, span: tuple[float, float], n_points: int,
                 method: LyapunovMethod | str = LyapunovMethod.QUADRATURE,
                 method_settings: Optional[dict] = None, *, workers=None,
                 bracket_width: float = BRACKET_WIDTH) -> SweepResult:
    """lambda over equally spaced values of alpha or beta, with the other held at its base value.

    Points where the density layer fails (e.g. beta = 0, no angular diffusion)
    are kept with a status naming the failure. Sign changes between
    neighbouring good points are refined by bisection on the quadrature
    estimate down to ``bracket_width``.
    """
    if vary not in ("alpha", "beta"):
        raise InvalidParams(f"vary must be 'alpha' or 'beta', got {vary!r}")
    parts = rotation_scale_parts(base.b)
    if parts is None:
        raise InvalidParams("sweeps need rotation-scale noise b = [[alpha, -beta], [beta, alpha]]")
    if n_points < 1:
        raise InvalidParams("n_points must be >= 1")
    alpha, beta = parts
    method = LyapunovMethod(method)
    settings = dict(method_settings or {})
    lo, hi = float(span[0]), float(span[1])
    values = np.linspace(lo, hi, n_points) if n_points > 1 else np.array([lo])

    def point(j):
        v = float(values[j])
        try:
            est = lambda_for(_swept_system(base, vary, v, alpha, beta), method, settings,
                             stream_key=(j,))
        except NumericalFailure as exc:
            return SweepRow(v, math.nan, math.nan, type(exc).__name__)
        return SweepRow(v, est.value, est.std_error, "ok")

    rows = ordered_map(point, range(len(values)), workers)

    n_grid = settings.get("n_grid", 2048)

    def quad(v):
        return lambda_quadrature(_swept_system(base, vary, v, alpha, beta), n_grid=n_grid).value

    brackets = []
    for left, right in zip(rows, rows[1:]):
        if left.status != "ok" or right.status != "ok":
            continue
        if not (left.value < 0) ^ (right.value < 0):
            continue
        try:
            a_, b_ = left.param, right.param
            fa, fb = quad(a_), quad(b_)
            if (fa < 0) == (fb < 0):
                continue
            while b_ - a_ > bracket_width:
                mid = 0.5 * (a_ + b_)
                fm = quad(mid)
                if (fm < 0) == (fa < 0):
                    a_, fa = mid, fm
                else:
                    b_, fb = mid, fm
            brackets.append(Bracket(a_, b_, fa, fb))
        except NumericalFailure:
            continue
    fixed = {"alpha": alpha, "beta": beta}
    del fixed[vary]
    return SweepResult(vary, fixed, method, rows, brackets)


def lambda_exponential_ansatz(p: GameParams, n_grid: int = 4096) -> float:
    """Lyapunov exponent from the pure exponential angle density of the game.

    Uses g(t) = exp{[((k1+k2)(c1^2-c2^2) + alpha beta) t - (k1c1-k2c2)(c1+c2) cos 2t
    + (k1+k2)(c1^2-c2^2) sin(2t)/2] / beta^2} normalized on [0, 2 pi]. That
    density drops the flux term, is not periodic and does not solve the
    stationary Fokker-Planck equation; it is kept only to compare against
    threshold values that were computed with it.
    """
    parts = rotation_scale_parts(p.b)
    if parts is None:
        raise InvalidParams("the ansatz needs rotation-scale noise")
    alpha, beta = parts
    if beta == 0:
        raise InvalidParams("the ansatz needs beta != 0")
    c1, c2, k1, k2 = p.c1, p.c2, p.k1, p.k2
    t = np.linspace(0.0, 2 * math.pi, n_grid + 1)
    expo = (((k1 + k2) * (c1**2 - c2**2) + alpha * beta) * t
            - (k1 * c1 - k2 * c2) * (c1 + c2) * np.cos(2 * t)
            + 0.5 * (k1 + k2) * (c1**2 - c2**2) * np.sin(2 * t)) / beta**2
    g = np.exp(expo - expo.max())
    dens = g / simpson(g, x=t)
    d2 = simpson(np.cos(2 * t) * dens, x=t)
    e2 = simpson(np.sin(2 * t) * dens, x=t)
    return float(-(k1 * c1 + k2 * c2) * (c1 + c2) + 0.5 * (beta**2 - alpha**2)
                 - (k1 * c1 - k2 * c2) * (c1 + c2) * d2 + 0.5 * (k2 - k1) * (c1**2 - c2**2) * e2)
