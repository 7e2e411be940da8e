"""Fourth-order synchronous generator with PMU terminal measurements.

State ``x = (delta, omega, e'_q, e'_d)``, input ``u = (T_m, E_fd, i_R, i_I)``,
output ``y = (e_R, e_I)``.  The model is written as::

    xdot = A x + f(x, u) + Bu u
    y    = h(x, u) + Du u

Currents ``i_R, i_I`` are on the system base; the ``S_B/S_N`` ratio converts
them to the machine base wherever they enter the machine equations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "GeneratorParams",
    "DerivedConstants",
    "StateMatrices",
    "AirGapQuantities",
    "derive_constants",
    "build_matrices",
    "eval_f",
    "eval_h",
    "eval_dynamics",
    "eval_output",
    "jac_f_x",
    "jac_h_x",
    "intermediate_quantities",
    "steady_state",
    "load_params",
    "params_to_dict",
]


@dataclass(frozen=True)
class GeneratorParams:
    omega0: float
    H: float
    K_D: float
    Td0p: float
    Tq0p: float
    xd: float
    xq: float
    xdp: float
    xqp: float
    S_B: float
    S_N: float

    def __post_init__(self):
        for name in ("omega0", "H", "Td0p", "Tq0p", "S_B", "S_N"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    @property
    def base_ratio(self) -> float:
        """S_B / S_N."""
        return self.S_B / self.S_N


@dataclass(frozen=True)
class DerivedConstants:
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float
    alpha7: float
    alpha8: float
    alpha9: float
    alpha10: float
    beta1: float
    beta2: float


@dataclass(frozen=True)
class StateMatrices:
    A: np.ndarray
    Bu: np.ndarray
    Du: np.ndarray


@dataclass(frozen=True)
class AirGapQuantities:
    iq: float
    id: float
    eq: float
    ed: float
    Pe: float
    Te: float


def _split(x, u):
    # works for a single point (4,) or a batch (N, 4)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return x[..., 0], x[..., 2], x[..., 3], u[..., 2], u[..., 3]


def derive_constants(p: GeneratorParams) -> DerivedConstants:
    # GeneratorParams already rejects nonpositive H, T'do, T'qo, S_N.
    k = p.S_B / p.S_N
    w = p.omega0 / (2.0 * p.H)
    return DerivedConstants(
        alpha1=p.omega0,
        alpha2=w,
        alpha3=w * k,
        alpha4=w * k**2 * (p.xqp - p.xdp),
        alpha5=p.K_D / (2.0 * p.H),
        alpha6=p.K_D / (2.0 * p.H) * p.omega0,
        alpha7=1.0 / p.Td0p,
        alpha8=k * (p.xd - p.xdp) / p.Td0p,
        alpha9=1.0 / p.Tq0p,
        alpha10=k * (p.xq - p.xqp) / p.Tq0p,
        beta1=0.5 * k * (p.xqp - p.xdp),
        beta2=0.5 * k * (p.xqp + p.xdp),
    )


def build_matrices(c: DerivedConstants) -> StateMatrices:
    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[1, 1] = -c.alpha5
    A[2, 2] = -c.alpha7
    A[3, 3] = -c.alpha9
    Bu = np.zeros((4, 4))
    Bu[1, 0] = c.alpha2
    Bu[2, 1] = c.alpha7
    Du = np.zeros((2, 4))
    Du[0, 3] = c.beta2
    Du[1, 2] = -c.beta2
    return StateMatrices(A=A, Bu=Bu, Du=Du)


def _f_terms(c: DerivedConstants, x1, x3, x4, u3, u4, sin, cos):
    s, co = sin(x1), cos(x1)
    s2, c2 = sin(2.0 * x1), cos(2.0 * x1)
    a3, a4 = c.alpha3, c.alpha4
    f2 = (
        a3 * x4 * u4 * co
        - a3 * x3 * u4 * s
        - a3 * x4 * u3 * s
        - a3 * x3 * u3 * co
        + a4 * u3 * u4 * c2
        + 0.5 * a4 * (u4 * u4 - u3 * u3) * s2
        + c.alpha6
    )
    f3 = c.alpha8 * u4 * co - c.alpha8 * u3 * s
    f4 = c.alpha10 * u3 * co + c.alpha10 * u4 * s
    return f2, f3, f4


def _h_terms(c: DerivedConstants, x1, x3, x4, u3, u4, sin, cos):
    s, co = sin(x1), cos(x1)
    s2, c2 = sin(2.0 * x1), cos(2.0 * x1)
    b1 = c.beta1
    h1 = x3 * co + x4 * s + b1 * u3 * s2 - b1 * u4 * c2
    h2 = x3 * s - x4 * co - b1 * u3 * c2 - b1 * u4 * s2
    return h1, h2


def _is_point(x, u) -> bool:
    return np.ndim(x) == 1 and np.ndim(u) == 1


def _point(x, u):
    # plain floats: far cheaper than 0-d numpy arithmetic in the simulation loop
    return float(x[0]), float(x[2]), float(x[3]), float(u[2]), float(u[3])


def eval_f(c: DerivedConstants, x, u) -> np.ndarray:
    """Nonlinear part of the process model, collected into alpha constants."""
    if _is_point(x, u):
        f2, f3, f4 = _f_terms(c, *_point(x, u), math.sin, math.cos)
        return np.array([-c.alpha1, f2, f3, f4])
    f2, f3, f4 = _f_terms(c, *_split(x, u), np.sin, np.cos)
    return np.stack([np.full_like(f2, -c.alpha1), f2, f3, f4], axis=-1)


def eval_h(c: DerivedConstants, x, u) -> np.ndarray:
    """Nonlinear part of the PMU voltage measurement.

    The ``beta1 * u4 * cos(2 x1)`` term of the first component carries a
    minus sign; that is what substituting the d-q terminal voltages into
    ``e_R = e_d sin(delta) + e_q cos(delta)`` produces.
    """
    if _is_point(x, u):
        return np.array(_h_terms(c, *_point(x, u), math.sin, math.cos))
    return np.stack(_h_terms(c, *_split(x, u), np.sin, np.cos), axis=-1)


def eval_dynamics(c: DerivedConstants, m: StateMatrices, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return x @ m.A.T + eval_f(c, x, u) + u @ m.Bu.T


def eval_output(c: DerivedConstants, m: StateMatrices, x, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return eval_h(c, x, u) + u @ m.Du.T


def jac_f_x(c: DerivedConstants, x, u) -> np.ndarray:
    """Partial derivatives of ``f`` with respect to the state (4x4)."""
    x1, x3, x4, u3, u4 = _split(x, u)
    s, co = np.sin(x1), np.cos(x1)
    s2, c2 = np.sin(2.0 * x1), np.cos(2.0 * x1)
    a3, a4 = c.alpha3, c.alpha4
    iq = u4 * s + u3 * co
    id_ = u3 * s - u4 * co
    J = np.zeros(np.shape(x1) + (4, 4))
    J[..., 1, 0] = (
        -a3 * x4 * u4 * s
        - a3 * x3 * u4 * co
        - a3 * x4 * u3 * co
        + a3 * x3 * u3 * s
        - 2.0 * a4 * u3 * u4 * s2
        + a4 * (u4 * u4 - u3 * u3) * c2
    )
    J[..., 1, 2] = -a3 * iq
    J[..., 1, 3] = -a3 * id_
    J[..., 2, 0] = -c.alpha8 * (u4 * s + u3 * co)
    J[..., 3, 0] = c.alpha10 * (u4 * co - u3 * s)
    return J


def jac_h_x(c: DerivedConstants, x, u) -> np.ndarray:
    """Partial derivatives of ``h`` with respect to the state (2x4)."""
    x1, x3, x4, u3, u4 = _split(x, u)
    s, co = np.sin(x1), np.cos(x1)
    s2, c2 = np.sin(2.0 * x1), np.cos(2.0 * x1)
    b1 = c.beta1
    J = np.zeros(np.shape(x1) + (2, 4))
    J[..., 0, 0] = -x3 * s + x4 * co + 2.0 * b1 * u3 * c2 + 2.0 * b1 * u4 * s2
    J[..., 0, 2] = co
    J[..., 0, 3] = s
    J[..., 1, 0] = x3 * co + x4 * s + 2.0 * b1 * u3 * s2 - 2.0 * b1 * u4 * c2
    J[..., 1, 2] = s
    J[..., 1, 3] = -co
    return J


def intermediate_quantities(c: DerivedConstants, p: GeneratorParams, x, u) -> AirGapQuantities:
    """Stator currents, terminal voltages and air-gap power/torque in d-q axes."""
    x1, x3, x4, u3, u4 = _split(x, u)
    k = p.base_ratio
    iq = u4 * np.sin(x1) + u3 * np.cos(x1)
    id_ = u3 * np.sin(x1) - u4 * np.cos(x1)
    eq = x3 - k * p.xdp * id_
    ed = x4 + k * p.xqp * iq
    Pe = eq * iq + ed * id_
    return AirGapQuantities(
        iq=float(iq), id=float(id_), eq=float(eq), ed=float(ed), Pe=float(Pe), Te=float(k * Pe)
    )


def steady_state(c: DerivedConstants, m: StateMatrices, u, x_guess, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Equilibrium state for constant input ``u`` by Newton's method.

    Speed is pinned to ``alpha1`` (so the angle equation balances) and
    ``(delta, e'_q, e'_d)`` are solved from the other three rows.
    """
    x = np.array(x_guess, dtype=float)
    x[1] = c.alpha1
    u = np.asarray(u, dtype=float)
    rows = [1, 2, 3]
    cols = [0, 2, 3]
    for _ in range(max_iter):
        r = eval_dynamics(c, m, x, u)[rows]
        if np.max(np.abs(r)) <= tol * max(1.0, c.alpha1):
            return x
        J = (m.A + jac_f_x(c, x, u))[np.ix_(rows, cols)]
        x[cols] -= np.linalg.solve(J, r)
    raise RuntimeError("steady-state iteration did not converge")


def load_params(path) -> GeneratorParams:
    """Read a generator parameter JSON file (keys are GeneratorParams fields)."""
    path = Path(path)
    raw = json.loads(path.read_text())
    names = [f.name for f in fields(GeneratorParams)]
    missing = [n for n in names if n not in raw]
    if missing:
        raise KeyError(f"{path}: missing parameter field(s): {', '.join(missing)}")
    try:
        return GeneratorParams(**{n: float(raw[n]) for n in names})
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def params_to_dict(p: GeneratorParams) -> dict:
    return {f.name: getattr(p, f.name) for f in fields(p)}
