"""Cournot duopoly SDE with hyperbolic inverse demand p(x) = 1/x.

Firm i adjusts its output at speed k_i along the marginal profit
x_j / (x1 + x2)**2 - c_i, and is perturbed by a single Wiener process with
state-dependent intensity g_i(x) = b_i1 x1 + b_i2 x2 + gamma_i. The offsets
gamma_i are chosen so that the noise vanishes at the Nash equilibrium.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParams, SingularState

EPS_STATE = 1e-9


class NoiseWiring(str, enum.Enum):
    """How the rows of B are driven: one shared Wiener process or one per row."""

    SHARED = "shared"
    INDEPENDENT = "independent"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(2, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameParams:
    c1: float
    c2: float
    k1: float
    k2: float
    b: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        for name in ("c1", "c2", "k1", "k2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParams(f"{name} must be a positive finite number, got {value!r}")
        b = _frozen(self.b)
        if not np.all(np.isfinite(b)):
            raise InvalidParams("noise matrix b must be finite")
        object.__setattr__(self, "b", b)

    @classmethod
    def rotation_scale(cls, c1, c2, k1, k2, alpha, beta) -> "GameParams":
        """Noise of the form b = alpha*I + beta*J, J the quarter-turn generator."""
        return cls(c1, c2, k1, k2, rotation_scale_matrix(alpha, beta))

    def with_noise(self, b) -> "GameParams":
        return GameParams(self.c1, self.c2, self.k1, self.k2, b)

    def swapped(self) -> "GameParams":
        """Relabel the two firms."""
        perm = np.array([[0.0, 1.0], [1.0, 0.0]])
        return GameParams(self.c2, self.c1, self.k2, self.k1, perm @ self.b @ perm)

    def as_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "k1": self.k1,
            "k2": self.k2,
            "b": self.b.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, GameParams):
            return NotImplemented
        return (
            (self.c1, self.c2, self.k1, self.k2) == (other.c1, other.c2, other.k1, other.k2)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None


def rotation_scale_matrix(alpha: float, beta: float) -> np.ndarray:
    return np.array([[alpha, -beta], [beta, alpha]], dtype=float)


def rotation_scale_parts(b, atol: float = 0.0) -> Optional[tuple[float, float]]:
    """Return (alpha, beta) if ``b`` has the form alpha*I + beta*J, else None."""
    b = np.asarray(b, dtype=float)
    if abs(b[0, 0] - b[1, 1]) <= atol and abs(b[0, 1] + b[1, 0]) <= atol:
        return float(b[0, 0]), float(b[1, 0])
    return None


@dataclass(frozen=True)
class StationaryState:
    x10: float
    x20: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x10, self.x20])


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Linear SDE du = A u dt + (noise from B) dw.

    ``noise_wiring`` must always be given: with SHARED both rows of B see the
    same increment, with INDEPENDENT row i is driven by its own process.
    """

    a: np.ndarray
    b: np.ndarray
    noise_wiring: NoiseWiring
    game: Optional[GameParams] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a, b = _frozen(self.a), _frozen(self.b)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidParams("A and B must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "noise_wiring", NoiseWiring(self.noise_wiring))

    def noise_channels(self) -> np.ndarray:
        """Stack of matrices C_k with noise term sum_k C_k u dW_k."""
        if self.noise_wiring is NoiseWiring.SHARED:
            return self.b[None, :, :].copy()
        channels = np.zeros((2, 2, 2))
        channels[0, 0, :] = self.b[0]
        channels[1, 1, :] = self.b[1]
        return channels

    def with_noise(self, b) -> "LinearSystem":
        return LinearSystem(self.a, b, self.noise_wiring, None, {})

    def as_dict(self) -> dict:
        return {"A": self.a.tolist(), "B": self.b.tolist(), "noise_wiring": self.noise_wiring.value}


def _check_state(x, eps_state: float) -> tuple[float, float, float]:
    x1, x2 = float(x[0]), float(x[1])
    s = x1 + x2
    if not s > eps_state:
        raise SingularState(f"x1 + x2 = {s!r} is within {eps_state} of the demand singularity")
    return x1, x2, s


def drift(p: GameParams, x, eps_state: float = EPS_STATE) -> np.ndarray:
    """Effective drift (k1 f1, k2 f2)."""
    x1, x2, s = _check_state(x, eps_state)
    return np.array([p.k1 * (x2 / s**2 - p.c1), p.k2 * (x1 / s**2 - p.c2)])


def gamma_offsets(p: GameParams) -> np.ndarray:
    denom = (p.c1 + p.c2) ** 2
    b = p.b
    return np.array(
        [
            -(b[0, 0] * p.c2 + b[0, 1] * p.c1) / denom,
            -(b[1, 0] * p.c2 + b[1, 1] * p.c1) / denom,
        ]
    )


def diffusion(p: GameParams, x) -> np.ndarray:
    """Noise intensities b @ x + gamma.

    Evaluated in the equivalent centred form b @ (x - x0), which is exactly zero
    at the stationary state (gamma = -b @ x0 by construction).
    """
    x = np.asarray(x, dtype=float)
    return p.b @ (x - stationary_state(p).as_array())


def centered_drift(p: GameParams, x, eps_state: float = EPS_STATE) -> np.ndarray:
    """Effective drift with c_i replaced by its equilibrium value x_j0 / s0**2.

    Algebraically identical to :func:`drift`; vanishes bit-exactly at x0, so
    integrators started there stay there.
    """
    x1, x2, s = _check_state(x, eps_state)
    x0 = stationary_state(p)
    s0 = x0.x10 + x0.x20
    return np.array(
        [p.k1 * (x2 / s**2 - x0.x20 / s0**2), p.k2 * (x1 / s**2 - x0.x10 / s0**2)]
    )


def stationary_state(p: GameParams) -> StationaryState:
    if p.c1 <= 0 or p.c2 <= 0:
        raise InvalidParams("c1 and c2 must be positive")
    denom = (p.c1 + p.c2) ** 2
    return StationaryState(p.c2 / denom, p.c1 / denom)


def jacobian_fd(p: GameParams, x, step: Optional[float] = None) -> np.ndarray:
    """Central finite-difference Jacobian of the effective drift."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((2, 2))
    for j in range(2):
        hj = step if step is not None else 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros(2)
        e[j] = hj
        jac[:, j] = (drift(p, x + e) - drift(p, x - e)) / (2 * hj)
    return jac


def linearize(p: GameParams) -> LinearSystem:
    """Linearization at the stationary state with the standard SDE wiring (one shared w)."""
    c1, c2, k1, k2 = p.c1, p.c2, p.k1, p.k2
    a = np.array(
        [
            [-2 * k1 * c1 * (c1 + c2), -k1 * (c1**2 - c2**2)],
            [k2 * (c1**2 - c2**2), -2 * k2 * c2 * (c1 + c2)],
        ]
    )
    x0 = stationary_state(p).as_array()
    fd_dev = float(np.max(np.abs(jacobian_fd(p, x0) - a)))
    meta = {"fd_jacobian_max_abs_dev": fd_dev, "fd_jacobian_ok": fd_dev < 1e-6}
    return LinearSystem(a, p.b, NoiseWiring.SHARED, p, meta)


@dataclass(frozen=True)
class CharacteristicRoots:
    mu1: complex
    mu2: complex
    half_trace: float
    discriminant: float

    @property
    def max_real(self) -> float:
        return self.mu1.real


def characteristic_roots(sys: LinearSystem) -> CharacteristicRoots:
    """Roots of mu**2 - tr(A) mu + det(A), ordered by real part (descending).

    ``half_trace`` equals the common real part only when the roots are complex.
    """
    a = sys.a
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = tr * tr - 4 * det
    half = tr / 2
    if disc >= 0:
        r = math.sqrt(disc) / 2
        # avoid cancellation in the smaller-magnitude root
        big = half - r if half < 0 else half + r
        small = det / big if big != 0 else half + r
        roots = sorted([complex(big), complex(small)], key=lambda z: -z.real)
    else:
        r = math.sqrt(-disc) / 2
        roots = [complex(half, r), complex(half, -r)]
    return CharacteristicRoots(roots[0], roots[1], half, disc)
