import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cournot_sde.core_model import GameParams, LinearSystem, linearize, rotation_scale_matrix  # noqa: E402

FIG1 = dict(c1=0.2, c2=2.0, k1=0.2, k2=0.4)
FIG1_A = np.array([[-0.176, 0.792], [-1.584, -3.52]])


def game(alpha=2.0, beta=2.0, **kw):
    p = dict(FIG1, **kw)
    return GameParams.rotation_scale(p["c1"], p["c2"], p["k1"], p["k2"], alpha, beta)


def rotation_system(a, alpha, beta, wiring="shared"):
    return LinearSystem(a, rotation_scale_matrix(alpha, beta), wiring)


@pytest.fixture
def fig1_params():
    return game()


@pytest.fixture
def fig1_sys():
    return linearize(game())
