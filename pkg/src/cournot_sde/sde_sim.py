"""Path simulation of the nonlinear game SDE.

Two integrators share one increment stream so that paths can be compared
pathwise: Euler-Maruyama (the strong order 1/2 reference) and a
second-order Taylor scheme with a diagonal Milstein correction.

Paths that leave the open positive quadrant or approach the demand
singularity are cut at the last valid state and carry a ``Truncation``
record; states are never clamped or reflected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from ._rng import ordered_map, stream
from .core_model import EPS_STATE, GameParams, NoiseWiring, stationary_state
from .errors import InvalidParams, MismatchedPaths


class Scheme(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    PAPER_TAYLOR2 = "paper_taylor2"


class Observable(str, enum.Enum):
    MEAN = "mean"
    SECOND_MOMENT = "second_moment"
    NORM_SQ_ABOUT_X0 = "norm_sq_about_x0"


_REASONS = {
    _kernels.NON_POSITIVE: "left_positive_quadrant",
    _kernels.SINGULAR: "singular_state",
    _kernels.NON_FINITE: "non_finite",
}


@dataclass(frozen=True)
class WienerSpec:
    seed: int
    step_h: float
    n_steps: int
    wiring: NoiseWiring = NoiseWiring.SHARED

    def __post_init__(self):
        if not (math.isfinite(self.step_h) and self.step_h > 0):
            raise InvalidParams(f"step_h must be positive, got {self.step_h!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParams(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParams("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "wiring", NoiseWiring(self.wiring))

    @property
    def n_channels(self) -> int:
        return 1 if self.wiring is NoiseWiring.SHARED else 2

    @property
    def horizon(self) -> float:
        return self.n_steps * self.step_h

    def refined(self) -> "WienerSpec":
        """Same horizon at half the step."""
        return WienerSpec(self.seed, self.step_h / 2, 2 * self.n_steps, self.wiring)


def wiener_increments(spec: WienerSpec, path_index: int = 0) -> np.ndarray:
    """G(n) = w((n+1)h) - w(nh), shape (n_steps, channels); one channel when shared."""
    rng = stream(spec.seed, path_index)
    return rng.standard_normal((spec.n_steps, spec.n_channels)) * math.sqrt(spec.step_h)


def coarsen(increments: np.ndarray) -> np.ndarray:
    """Sum consecutive pairs: increments of the same Brownian path at twice the step."""
    inc = np.asarray(increments, dtype=float)
    if inc.shape[0] % 2:
        raise InvalidParams("need an even number of increments to coarsen")
    return inc[0::2] + inc[1::2]


@dataclass(frozen=True)
class Truncation:
    step: int
    time: float
    reason: str
    offending_state: tuple

    def as_dict(self) -> dict:
        return {"step": self.step, "time": self.time, "reason": self.reason,
                "offending_state": list(self.offending_state)}


@dataclass
class SdePath:
    times: np.ndarray
    states: np.ndarray
    increments: np.ndarray
    scheme: Scheme
    params: GameParams
    seed: int
    truncation: Optional[Truncation] = None
    metadata: dict = field(default_factory=dict)

    @property
    def truncated(self) -> bool:
        return self.truncation is not None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def _check_start(p: GameParams, x_init, eps_state: float) -> np.ndarray:
    x = np.asarray(x_init, dtype=float).reshape(2)
    if not (np.all(np.isfinite(x)) and x[0] > 0 and x[1] > 0):
        raise InvalidParams(f"x_init must lie in the open positive quadrant, got {x.tolist()}")
    if not x.sum() > eps_state:
        raise InvalidParams(f"x_init is within {eps_state} of the demand singularity")
    return x


def _integrate(code: int, scheme: Scheme, p: GameParams, x_init, spec: WienerSpec,
               path_index: int, increments, eps_state: float) -> SdePath:
    x = _check_start(p, x_init, eps_state)
    if increments is None:
        increments = wiener_increments(spec, path_index)
    increments = np.ascontiguousarray(increments, dtype=float)
    if increments.shape != (spec.n_steps, spec.n_channels):
        raise InvalidParams(
            f"increments must have shape {(spec.n_steps, spec.n_channels)}, got {increments.shape}")
    x0 = stationary_state(p)
    s0 = x0.x10 + x0.x20
    c_eq = np.array([x0.x20 / s0**2, x0.x10 / s0**2])
    k = np.array([p.k1, p.k2])
    if spec.wiring is NoiseWiring.SHARED:
        ch = p.b[None, :, :].copy()
    else:
        ch = np.zeros((2, 2, 2))
        ch[0, 0, :] = p.b[0]
        ch[1, 1, :] = p.b[1]
    out = np.empty((spec.n_steps + 1, 2))
    done, reason, bad1, bad2 = _kernels.step_game(
        code, x, x0.as_array(), c_eq, k, ch, increments, spec.step_h, eps_state, out)
    times = np.arange(done + 1) * spec.step_h
    trunc = None
    if reason != _kernels.OK:
        trunc = Truncation(int(done), float((done + 1) * spec.step_h), _REASONS[reason],
                           (float(bad1), float(bad2)))
    meta = {"x_init": x.tolist(), "path_index": path_index, "step_h": spec.step_h,
            "wiring": spec.wiring.value, "eps_state": eps_state}
    return SdePath(times, out[: done + 1].copy(), increments, scheme, p, spec.seed, trunc, meta)


def euler_maruyama(p: GameParams, x_init, spec: WienerSpec, *, path_index: int = 0,
                   increments: Optional[np.ndarray] = None,
                   eps_state: float = EPS_STATE) -> SdePath:
    """x(n+1) = x(n) + h F(x(n)) + sum_m g^(m)(x(n)) G_m(n)."""
    return _integrate(_kernels.EM, Scheme.EULER_MARUYAMA, p, x_init, spec, path_index,
                      increments, eps_state)


def paper_taylor2(p: GameParams, x_init, spec: WienerSpec, *, path_index: int = 0,
                  increments: Optional[np.ndarray] = None, eps_state: float = EPS_STATE,
                  printed: bool = False) -> SdePath:
    """Second-order Euler-Taylor step for one shared Wiener process.

    Component i:

        x_i + h F_i + g_i G + b_ii g_i (G^2 - h)/2
            + [grad F_i . F + (g' Hess F_i g)/2] h^2/2
            + [grad F_i . g + (B F)_i] h G/2

    with F = (k1 f1, k2 f2) and g = B (x - x0). The Milstein correction uses
    only the diagonal entry b_ii. With b = 0 this is the second-order Taylor
    step of the ODE.

    ``printed=True`` uses the alternative bracket
    (-2 x1 x2 F_i + x1 x2 g_i)/s^3 and mixed factor (b_i1 - 2 x_j/s^3) g_i,
    which is only first order in h (kept for comparison).
    """
    if spec.wiring is not NoiseWiring.SHARED:
        raise InvalidParams("the Taylor scheme is defined for a single shared Wiener process")
    code = _kernels.TAYLOR2_PRINTED if printed else _kernels.TAYLOR2
    path = _integrate(code, Scheme.PAPER_TAYLOR2, p, x_init, spec, path_index, increments,
                      eps_state)
    path.metadata["printed_variant"] = printed
    return path


def simulate(scheme: Scheme | str, p: GameParams, x_init, spec: WienerSpec, **kw) -> SdePath:
    scheme = Scheme(scheme)
    if scheme is Scheme.EULER_MARUYAMA:
        kw.pop("printed", None)
        return euler_maruyama(p, x_init, spec, **kw)
    return paper_taylor2(p, x_init, spec, **kw)


def simulate_ensemble(scheme: Scheme | str, p: GameParams, x_init, spec: WienerSpec,
                      n_paths: int, *, workers=None, **kw) -> list[SdePath]:
    """Paths 0..n_paths-1, path i on stream (seed, i)."""
    if n_paths < 1:
        raise InvalidParams("n_paths must be >= 1")
    return ordered_map(lambda i: simulate(scheme, p, x_init, spec, path_index=i, **kw),
                       range(n_paths), workers)


def ensemble_stats(paths: Sequence[SdePath], observable: Observable | str) -> np.ndarray:
    """Pointwise-in-time sample statistic; shape (T, 2) for mean and second_moment, (T,) otherwise."""
    observable = Observable(observable)
    paths = list(paths)
    if not paths:
        raise InvalidParams("empty ensemble")
    ref = paths[0]
    for q in paths[1:]:
        if len(q.times) != len(ref.times) or not np.array_equal(q.times, ref.times):
            raise MismatchedPaths("paths have different time grids (truncated or different specs)")
        if not q.params == ref.params:
            raise MismatchedPaths("paths were generated with different parameters")
    stack = np.stack([q.states for q in paths])
    if observable is Observable.MEAN:
        acc = np.zeros_like(stack[0])
        for arr in stack:
            acc += arr
        return acc / len(paths)
    if observable is Observable.SECOND_MOMENT:
        acc = np.zeros_like(stack[0])
        for arr in stack:
            acc += arr * arr
        return acc / len(paths)
    x0 = stationary_state(ref.params).as_array()
    acc = np.zeros(stack.shape[1])
    for arr in stack:
        acc += np.sum((arr - x0) ** 2, axis=1)
    return acc / len(paths)
