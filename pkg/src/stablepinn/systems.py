"""The four benchmark ODE systems in first-order form.

Each system carries its vector field, analytic Jacobian, and a catalog of
fixed points with stability classifications.  The second-order oscillators
(Duffing, van der Pol) are written as 2-d first-order systems in the state
(x, v) with v = x'.

``f`` and ``jacobian`` are written with plain arithmetic so they evaluate
on floats, numpy arrays (batched, elementwise), and DualScalar graph
nodes alike.  Jacobian entries that are constants stay plain floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Stability",
    "FixedPoint",
    "SystemDynamics",
    "SYSTEM_NAMES",
    "get_system",
    "eval_f",
    "eval_jacobian",
    "real_eigen_parts",
    "classify_fixed_point",
    "trace_det",
]


class Stability(enum.Enum):
    ASYMPTOTICALLY_STABLE = "stable"
    UNSTABLE = "unstable"
    SADDLE = "saddle"


@dataclass(frozen=True)
class FixedPoint:
    location: tuple[float, ...]
    classification: Stability

    @property
    def is_attracting(self) -> bool:
        return self.classification is Stability.ASYMPTOTICALLY_STABLE


@dataclass(frozen=True)
class SystemDynamics:
    """An autonomous ODE system x' = f(x) with analytic stability data.

    ``trace_det_grads`` returns, for a batch of states U with shape (N, n),
    the Jacobian trace and determinant at each state together with their
    gradients w.r.t. the state -- the closed forms the vectorized training
    path needs to differentiate the local-stability penalty.
    """

    name: str
    dim: int
    first_order: bool  # trained with the hard IC constraint iff True
    f: Callable[[Sequence], list]
    jacobian: Callable[[Sequence], list]
    trace_det_grads: Callable[[np.ndarray], tuple]
    fixed_points: tuple[FixedPoint, ...] = field(default=())

    def f_batch(self, states: np.ndarray) -> np.ndarray:
        """Vector field on a batch of states, shape (N, n) -> (N, n)."""
        states = np.asarray(states, dtype=np.float64)
        comps = self.f([states[:, j] for j in range(self.dim)])
        return np.stack([np.broadcast_to(c, states.shape[0]) for c in comps], axis=1)

    def jacobian_batch(self, states: np.ndarray) -> np.ndarray:
        """Analytic Jacobian on a batch, shape (N, n) -> (N, n, n)."""
        states = np.asarray(states, dtype=np.float64)
        n, N = self.dim, states.shape[0]
        rows = self.jacobian([states[:, j] for j in range(n)])
        out = np.empty((N, n, n), dtype=np.float64)
        for i in range(n):
            for j in range(n):
                out[:, i, j] = rows[i][j]
        return out


def eval_f(system: SystemDynamics, state: Sequence) -> list:
    """First-order form derivatives at a state (any scalar algebra)."""
    if len(state) != system.dim:
        raise ValueError(
            f"{system.name} expects dimension {system.dim}, got {len(state)}"
        )
    return system.f(state)


def eval_jacobian(system: SystemDynamics, state: Sequence) -> list:
    """Analytic Jacobian rows at a state (any scalar algebra)."""
    if len(state) != system.dim:
        raise ValueError(
            f"{system.name} expects dimension {system.dim}, got {len(state)}"
        )
    return system.jacobian(state)


# -- eigenvalue real parts (closed form, n <= 2) -----------------------


def real_eigen_parts(J) -> list[float]:
    """Real parts of the spectrum of a 1x1 or 2x2 matrix.

    Closed-form: for 2x2, roots of the characteristic polynomial via
    trace/determinant; a negative discriminant means a complex pair with
    real part tr/2.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.shape == (1, 1):
        return [float(J[0, 0])]
    if J.shape == (2, 2):
        tr = float(J[0, 0] + J[1, 1])
        det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
        disc = tr * tr - 4.0 * det
        if disc >= 0.0:
            s = math.sqrt(disc)
            return [(tr + s) / 2.0, (tr - s) / 2.0]
        return [tr / 2.0, tr / 2.0]
    raise ValueError(f"unsupported matrix shape {J.shape}; only n in {{1, 2}}")


def trace_det(J) -> tuple[float, float]:
    J = np.asarray(J, dtype=np.float64)
    if J.shape == (1, 1):
        return float(J[0, 0]), float(J[0, 0])
    return float(J[0, 0] + J[1, 1]), float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])


def classify_fixed_point(system: SystemDynamics, point: Sequence[float]) -> Stability:
    """Classify a fixed point by the signs of the Jacobian eigenvalue real parts.

    All real parts negative -> asymptotically stable; mixed signs with a
    real spectrum -> saddle; otherwise any positive real part -> unstable.
    Raises if the point is not actually a fixed point of the system.
    """
    point = [float(p) for p in point]
    residual = max(abs(float(c)) for c in system.f(point))
    if residual > 1e-9:
        raise ValueError(
            f"({', '.join(f'{p:g}' for p in point)}) is not a fixed point of "
            f"{system.name}: |f| = {residual:g}"
        )
    J = np.array(system.jacobian(point), dtype=np.float64).reshape(
        system.dim, system.dim
    )
    parts = real_eigen_parts(J)
    if all(p < 0.0 for p in parts):
        return Stability.ASYMPTOTICALLY_STABLE
    if any(p > 0.0 for p in parts):
        tr, det = trace_det(J)
        spectrum_real = system.dim == 1 or tr * tr - 4.0 * det >= 0.0
        if spectrum_real and any(p < 0.0 for p in parts):
            return Stability.SADDLE
        return Stability.UNSTABLE
    raise ValueError(
        f"marginal fixed point of {system.name} (max real part 0); "
        "linearization does not decide stability"
    )


# -- system definitions ------------------------------------------------


def _pitchfork_f(s):
    (x,) = s
    return [x - x**3]


def _pitchfork_jac(s):
    (x,) = s
    return [[1.0 - 3.0 * x**2]]


def _pitchfork_tdg(U):
    x = U[:, 0]
    tr = 1.0 - 3.0 * x**2
    dtr = np.empty_like(U)
    dtr[:, 0] = -6.0 * x
    return tr, None, dtr, None


def _duffing_f(s):
    x, v = s
    return [v, -v + x - x**3]


def _duffing_jac(s):
    x, _v = s
    return [[0.0, 1.0], [1.0 - 3.0 * x**2, -1.0]]


def _duffing_tdg(U):
    x = U[:, 0]
    N = U.shape[0]
    tr = np.full(N, -1.0)
    det = 3.0 * x**2 - 1.0
    dtr = np.zeros_like(U)
    ddet = np.zeros_like(U)
    ddet[:, 0] = 6.0 * x
    return tr, det, dtr, ddet


def _vanderpol_f(s):
    x, v = s
    return [v, (1.0 - x**2) * v - x]


def _vanderpol_jac(s):
    x, v = s
    return [[0.0, 1.0], [-2.0 * x * v - 1.0, 1.0 - x**2]]


def _vanderpol_tdg(U):
    x, v = U[:, 0], U[:, 1]
    tr = 1.0 - x**2
    det = 2.0 * x * v + 1.0
    dtr = np.zeros_like(U)
    dtr[:, 0] = -2.0 * x
    ddet = np.empty_like(U)
    ddet[:, 0] = 2.0 * v
    ddet[:, 1] = 2.0 * x
    return tr, det, dtr, ddet


def _lotka_f(s):
    x, y = s
    return [x * (3.0 - x - 2.0 * y), y * (2.0 - x - y)]


def _lotka_jac(s):
    x, y = s
    return [[3.0 - 2.0 * x - 2.0 * y, -2.0 * x], [-1.0 * y, 2.0 - x - 2.0 * y]]


def _lotka_tdg(U):
    x, y = U[:, 0], U[:, 1]
    tr = 5.0 - 3.0 * x - 3.0 * y
    det = (3.0 - 2.0 * x - 2.0 * y) * (2.0 - x - 2.0 * y) - 2.0 * x * y
    dtr = np.full_like(U, -3.0)
    ddet = np.empty_like(U)
    ddet[:, 0] = -2.0 * (2.0 - x - 2.0 * y) - (3.0 - 2.0 * x - 2.0 * y) - 2.0 * y
    ddet[:, 1] = -4.0 * (3.0 - 2.0 * x - 2.0 * y) / 2.0 - 2.0 * (
        2.0 - x - 2.0 * y
    ) - 2.0 * x
    return tr, det, dtr, ddet


_ST = Stability.ASYMPTOTICALLY_STABLE
_UN = Stability.UNSTABLE
_SA = Stability.SADDLE

_SYSTEMS = {
    "pitchfork": SystemDynamics(
        name="pitchfork",
        dim=1,
        first_order=True,
        f=_pitchfork_f,
        jacobian=_pitchfork_jac,
        trace_det_grads=_pitchfork_tdg,
        fixed_points=(
            FixedPoint((0.0,), _UN),
            FixedPoint((1.0,), _ST),
            FixedPoint((-1.0,), _ST),
        ),
    ),
    "duffing": SystemDynamics(
        name="duffing",
        dim=2,
        first_order=False,
        f=_duffing_f,
        jacobian=_duffing_jac,
        trace_det_grads=_duffing_tdg,
        fixed_points=(
            FixedPoint((0.0, 0.0), _SA),
            FixedPoint((1.0, 0.0), _ST),
            FixedPoint((-1.0, 0.0), _ST),
        ),
    ),
    "vanderpol": SystemDynamics(
        name="vanderpol",
        dim=2,
        first_order=False,
        f=_vanderpol_f,
        jacobian=_vanderpol_jac,
        trace_det_grads=_vanderpol_tdg,
        fixed_points=(FixedPoint((0.0, 0.0), _UN),),
    ),
    "lotka-volterra": SystemDynamics(
        name="lotka-volterra",
        dim=2,
        first_order=True,
        f=_lotka_f,
        jacobian=_lotka_jac,
        trace_det_grads=_lotka_tdg,
        fixed_points=(
            FixedPoint((0.0, 0.0), _UN),
            FixedPoint((1.0, 1.0), _SA),
            FixedPoint((0.0, 2.0), _ST),
            FixedPoint((3.0, 0.0), _ST),
        ),
    ),
}

SYSTEM_NAMES = tuple(_SYSTEMS)


def get_system(name: str) -> SystemDynamics:
    try:
        return _SYSTEMS[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}"
        ) from None
