"""Mean-square stability of a planar linear SDE via quadratic Lyapunov functions.

For V(u) = (w1 u1^2 + w2 u2^2)/2 the generator of du = Au dt + sum_k C_k u dW_k
gives a quadratic form LV(u) = c11 u1^2 + c12 u1 u2 + c22 u2^2. A weight
ratio t = w1/w2 making that form negative definite proves mean-square
stability. Because V is diagonal the form is the same whether the rows of B
share one Wiener process or have their own.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import _kernels
from ._rng import ordered_map, stream
from .core_model import LinearSystem
from .errors import DivisionDegenerate, InvalidParams

EPS_DIV = 1e-12
LOG10_T_RANGE = (-6.0, 6.0)
N_T_GRID = 1025


class Verdict(str, enum.Enum):
    MEAN_SQUARE_STABLE = "MeanSquareStable"
    NOT_CERTIFIED = "NotCertified"


@dataclass(frozen=True)
class QuadraticLyapunov:
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParams(f"{name} must be positive, got {value!r}")

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return 0.5 * (self.w1 * u[0] ** 2 + self.w2 * u[1] ** 2)

    def gradient(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.array([self.w1 * u[0], self.w2 * u[1]])

    def hessian(self) -> np.ndarray:
        return np.diag([self.w1, self.w2])


def lv_coefficients(sys: LinearSystem, v: QuadraticLyapunov) -> tuple[float, float, float]:
    """(c11, c12, c22) of LV; c12 is the full cross coefficient."""
    a, b = sys.a, sys.b
    w1, w2 = v.w1, v.w2
    c11 = a[0, 0] * w1 + 0.5 * b[0, 0] ** 2 * w1 + 0.5 * b[1, 0] ** 2 * w2
    c22 = a[1, 1] * w2 + 0.5 * b[0, 1] ** 2 * w1 + 0.5 * b[1, 1] ** 2 * w2
    c12 = a[0, 1] * w1 + a[1, 0] * w2 + b[0, 0] * b[0, 1] * w1 + b[1, 0] * b[1, 1] * w2
    return float(c11), float(c12), float(c22)


def generator(sys: LinearSystem, v: QuadraticLyapunov, u) -> float:
    """LV(u) = grad V . A u + tr(G' Hess V G)/2 with G the columns C_k u."""
    u = np.asarray(u, dtype=float)
    g = np.stack([c @ u for c in sys.noise_channels()], axis=1)
    return float(v.gradient(u) @ (sys.a @ u) + 0.5 * np.trace(g.T @ v.hessian() @ g))


def quadratic_form(coeffs, u) -> float:
    c11, c12, c22 = coeffs
    return c11 * u[0] ** 2 + c12 * u[0] * u[1] + c22 * u[1] ** 2


@dataclass(frozen=True)
class PaperConditions:
    A1: float
    q1: float
    q2: float
    passes: bool


def paper_conditions(sys: LinearSystem) -> PaperConditions:
    """A1 = -(a21 + b21 b22)/(a12 + b11 b12), q1 = (a11 + b11^2/2) A1 - b21^2/2,
    q2 = -a22 - b22^2/2 + b12^2 A1/2; passes when A1 < 0, q1 > 0 and q2 > 0.

    Reported as is; the verdict of :func:`mean_square_report` does not use it.
    """
    a, b = sys.a, sys.b
    den = a[0, 1] + b[0, 0] * b[0, 1]
    if abs(den) < EPS_DIV:
        raise DivisionDegenerate(f"a12 + b11*b12 = {den:.3g} is too close to zero")
    a1 = -(a[1, 0] + b[1, 0] * b[1, 1]) / den
    q1 = (a[0, 0] + 0.5 * b[0, 0] ** 2) * a1 - 0.5 * b[1, 0] ** 2
    q2 = -a[1, 1] - 0.5 * b[1, 1] ** 2 + 0.5 * b[0, 1] ** 2 * a1
    return PaperConditions(float(a1), float(q1), float(q2), bool(a1 < 0 and q1 > 0 and q2 > 0))


@dataclass(frozen=True)
class Certificate:
    w_ratio: float
    form_coefficients: tuple
    negative_definite: bool
    margin: float


def _margin(sys: LinearSystem, t: float) -> tuple[float, tuple]:
    c = lv_coefficients(sys, QuadraticLyapunov(t, 1.0))
    c11, c12, c22 = c
    return min(-c11, -c22, 4 * c11 * c22 - c12 * c12), c


def definiteness_certificate(sys: LinearSystem) -> Optional[Certificate]:
    """Weight ratio t = w1/w2 making LV negative definite, or None.

    The margin min(-c11, -c22, 4 c11 c22 - c12^2) is scanned on a log grid
    of t over 10^[-6, 6] (1025 points, so t = 1 is a node), the first
    maximizer is refined by golden-section search, and the refinement is
    kept only if it strictly improves the margin.
    """
    logs = np.linspace(*LOG10_T_RANGE, N_T_GRID)
    margins = np.array([_margin(sys, 10.0**s)[0] for s in logs])
    i = int(np.argmax(margins))
    best_log, best = float(logs[i]), float(margins[i])
    if 0 < i < N_T_GRID - 1 and margins[i - 1] < best and margins[i + 1] < best:
        res = minimize_scalar(lambda s: -_margin(sys, 10.0**s)[0],
                              bracket=(logs[i - 1], logs[i], logs[i + 1]), method="golden")
        if res.success and -res.fun > best and LOG10_T_RANGE[0] <= res.x <= LOG10_T_RANGE[1]:
            best_log, best = float(res.x), float(-res.fun)
    if not best > 0:
        return None
    t = 10.0**best_log
    margin, coeffs = _margin(sys, t)
    return Certificate(t, coeffs, True, margin)


@dataclass(frozen=True)
class MonteCarloCheck:
    decay_observed: bool
    fit_rate: float
    fit_std_error: float
    n_paths: int
    horizon_T: float
    step_h: float
    seed: int


def log_second_moment(sys: LinearSystem, seed: int = 1, n_paths: int = 500,
                      horizon_T: float = 20.0, step_h: float = 1e-3, *,
                      record_every: int = 10, workers=None) -> tuple[np.ndarray, np.ndarray]:
    """(times, log of the sample mean of ||u(t)||^2) from ||u(0)|| = 1.

    The first half of the ensemble starts at (1, 0), the rest at (0, 1);
    path i uses stream (seed, i). Averaging is done in log space.
    """
    n_steps = int(round(horizon_T / step_h))
    if n_steps < record_every:
        raise InvalidParams("horizon_T / step_h is shorter than one record interval")
    a = np.ascontiguousarray(sys.a)
    ch = np.ascontiguousarray(sys.noise_channels())
    half = n_paths // 2

    def one(i):
        z = stream(seed, i).standard_normal((n_steps, ch.shape[0]))
        e0 = np.array([1.0, 0.0]) if i < half else np.array([0.0, 1.0])
        return _kernels.log_norm_sq_series(a, ch, e0, z, step_h, record_every)

    logs = np.stack(ordered_map(one, range(n_paths), workers))
    times = np.arange(logs.shape[1]) * record_every * step_h
    return times, logsumexp(logs, axis=0) - math.log(n_paths)


def mc_second_moment_check(sys: LinearSystem, seed: int = 1, n_paths: int = 500,
                           horizon_T: float = 20.0, step_h: float = 1e-3, *,
                           record_every: int = 10, workers=None) -> MonteCarloCheck:
    """Least-squares growth rate of log E||u||^2 over the second half of [0, T]."""
    if n_paths < 100:
        raise InvalidParams(f"n_paths must be >= 100, got {n_paths}")
    times, log_m = log_second_moment(sys, seed, n_paths, horizon_T, step_h,
                                     record_every=record_every, workers=workers)
    keep = times >= 0.5 * times[-1]
    t, y = times[keep], log_m[keep]
    if not np.all(np.isfinite(y)):
        # all paths collapsed to the origin: decay, with no measurable rate
        return MonteCarloCheck(True, -math.inf, 0.0, n_paths, horizon_T, step_h, seed)
    design = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(len(t) - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((t - t.mean()) ** 2)))
    rate = float(coef[0])
    return MonteCarloCheck(bool(rate < -3 * se), rate, se, n_paths, horizon_T, step_h, seed)


@dataclass
class MeanSquareReport:
    paper_conditions: Optional[PaperConditions]
    paper_conditions_error: Optional[str]
    definiteness_certificate: Optional[Certificate]
    mc_check: Optional[MonteCarloCheck]
    verdict: Verdict
    noise_wiring: str

    def as_dict(self) -> dict:
        return {
            "paper_conditions": asdict(self.paper_conditions) if self.paper_conditions else None,
            "paper_conditions_error": self.paper_conditions_error,
            "definiteness_certificate": (asdict(self.definiteness_certificate)
                                         if self.definiteness_certificate else None),
            "mc_check": asdict(self.mc_check) if self.mc_check else None,
            "verdict": self.verdict.value,
            "noise_wiring": self.noise_wiring,
        }


def mean_square_report(sys: LinearSystem, *, run_mc: bool = False, seed: int = 1,
                       n_paths: int = 500, horizon_T: float = 20.0, step_h: float = 1e-3,
                       workers=None) -> MeanSquareReport:
    try:
        paper, paper_err = paper_conditions(sys), None
    except DivisionDegenerate as exc:
        paper, paper_err = None, str(exc)
    cert = definiteness_certificate(sys)
    mc = (mc_second_moment_check(sys, seed, n_paths, horizon_T, step_h, workers=workers)
          if run_mc else None)
    verdict = Verdict.MEAN_SQUARE_STABLE if cert is not None else Verdict.NOT_CERTIFIED
    return MeanSquareReport(paper, paper_err, cert, mc, verdict, sys.noise_wiring.value)
