"""Analytic and sampled Lipschitz constants of the generator nonlinearities.

The analytic constants are closed-form bounds in terms of the magnitudes
``kappa = max(|lo|, |hi|)`` of the operating box.  The sampled estimates
approximate the true constant from below: either the largest spectral norm
of the state Jacobian over the sample, or the largest difference quotient
over all sample pairs.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .linalg import spectral_norm
from .model import DerivedConstants, eval_f, eval_h, jac_f_x, jac_h_x
from .qmc import SequenceSpec, generate, scale_to_box

__all__ = [
    "BoundsBox",
    "KappaVec",
    "LipschitzEstimate",
    "kappas",
    "gamma_f_tilde",
    "gamma_f_analytic",
    "gamma_h_analytic",
    "component_aggregate",
    "estimate_gamma_jacobian",
    "estimate_gamma_pairwise",
    "load_bounds",
    "bounds_to_dict",
]

PAIR_DISTANCE_FLOOR = 1e-12

Target = Union[str, Callable]


@dataclass(frozen=True)
class BoundsBox:
    """Operating region: state box times input box."""

    x_lo: np.ndarray
    x_hi: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray

    def __post_init__(self):
        for name in ("x_lo", "x_hi", "u_lo", "u_hi"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (4,):
                raise ValueError(f"{name} must have 4 entries, got {v.size}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if np.any(self.x_lo > self.x_hi):
            raise ValueError("x_lo must not exceed x_hi")
        if np.any(self.u_lo > self.u_hi):
            raise ValueError("u_lo must not exceed u_hi")

    @classmethod
    def point(cls, x, u) -> "BoundsBox":
        """Zero-width box around a single (x, u)."""
        return cls(x, x, u, u)

    @property
    def lo(self) -> np.ndarray:
        return np.concatenate([self.x_lo, self.u_lo])

    @property
    def hi(self) -> np.ndarray:
        return np.concatenate([self.x_hi, self.u_hi])


@dataclass(frozen=True)
class KappaVec:
    kx: np.ndarray
    ku: np.ndarray


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    target: str
    method: str
    sampler: str = "none"
    samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("Lipschitz estimate must be nonnegative")
        if (self.sampler == "none") != (self.method == "analytic"):
            raise ValueError("analytic estimates carry no sampler; sampled ones need one")

    def to_record(self) -> dict:
        return asdict(self)


def kappas(b: BoundsBox) -> KappaVec:
    return KappaVec(
        kx=np.maximum(np.abs(b.x_lo), np.abs(b.x_hi)),
        ku=np.maximum(np.abs(b.u_lo), np.abs(b.u_hi)),
    )


def gamma_f_tilde(c: DerivedConstants, b: BoundsBox) -> float:
    """Bound on the Lipschitz constant of the swing-equation component f_2."""
    k = kappas(b)
    kx3, kx4 = k.kx[2], k.kx[3]
    ku3, ku4 = k.ku[2], k.ku[3]
    return float(
        abs(c.alpha3) * ((ku3 + ku4) * (1.0 + kx3 + kx4) + 2.0 * ku3 * ku4)
        + abs(c.alpha4) * (ku3 * (1.0 + ku3) + ku4 * (1.0 + ku4))
    )


def gamma_f_analytic(c: DerivedConstants, b: BoundsBox) -> LipschitzEstimate:
    k = kappas(b)
    g2 = gamma_f_tilde(c, b)
    su = k.ku[2] + k.ku[3]
    value = math.sqrt(g2**2 + (c.alpha8**2 + c.alpha10**2) * su**2)
    return LipschitzEstimate(value=value, target="f", method="analytic")


def gamma_h_analytic(c: DerivedConstants, b: BoundsBox) -> LipschitzEstimate:
    k = kappas(b)
    row = k.kx[2] + k.kx[3] + 2.0 * abs(c.beta1) * (k.ku[2] + k.ku[3]) + math.sqrt(2.0)
    return LipschitzEstimate(value=float(math.sqrt(2.0) * row), target="h", method="analytic")


def component_aggregate(gammas) -> float:
    """Combine per-component Lipschitz constants into one for the vector map."""
    g = np.asarray(list(gammas), dtype=float)
    if g.size == 0:
        raise ValueError("need at least one component constant")
    if np.any(g < 0):
        raise ValueError("component constants must be nonnegative")
    return float(np.sqrt(np.sum(g * g)))


def _samples(b: BoundsBox, seq: SequenceSpec, s: int) -> tuple[np.ndarray, np.ndarray]:
    if seq.dim != 8:
        seq = SequenceSpec(seq.kind, 8, seq.seed)
    z = scale_to_box(generate(seq, s), b.lo, b.hi)
    return z[:, :4], z[:, 4:]


def _jacobian(target: str):
    if target == "f":
        return jac_f_x
    if target == "h":
        return jac_h_x
    raise ValueError(f"unknown target {target!r}; expected 'f' or 'h'")


def estimate_gamma_jacobian(
    target: str,
    c: DerivedConstants,
    b: BoundsBox,
    seq: SequenceSpec,
    s: int,
    chunk: int = 4096,
    workers: int = 1,
) -> LipschitzEstimate:
    """Largest spectral norm of the state Jacobian over ``s`` sampled (x, u).

    The running maximum is taken chunk by chunk; chunks may be spread over
    ``workers`` threads without changing the result.
    """
    if s < 1:
        raise ValueError("need at least one sample")
    jac = _jacobian(target)
    X, U = _samples(b, seq, s)

    def chunk_max(start: int) -> float:
        J = jac(c, X[start:start + chunk], U[start:start + chunk])
        return float(np.max(spectral_norm(J)))

    starts = range(0, s, chunk)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            maxima = list(pool.map(chunk_max, starts))
    else:
        maxima = [chunk_max(i) for i in starts]
    return LipschitzEstimate(
        value=max(maxima), target=target, method="jacobian-sup",
        sampler=seq.kind, samples=s, seed=seq.seed,
    )


def estimate_gamma_pairwise(
    target: Target,
    c: DerivedConstants,
    b: BoundsBox,
    seq: SequenceSpec,
    s: int,
) -> LipschitzEstimate:
    """Largest difference quotient over all pairs of ``s`` sampled states.

    Both states of a pair are evaluated at the same input, the one drawn
    with the lower-indexed sample.  ``target`` is ``"f"``, ``"h"`` or any
    callable ``g(x, u)`` that broadcasts over a leading batch axis.
    Pairs closer than ``PAIR_DISTANCE_FLOOR`` are skipped.
    """
    if s < 2:
        raise ValueError("pairwise estimate needs at least two samples")
    if callable(target):
        g = target
        name = getattr(target, "__name__", "custom")
    elif target == "f":
        g = lambda x, u: eval_f(c, x, u)  # noqa: E731
        name = "f"
    elif target == "h":
        g = lambda x, u: eval_h(c, x, u)  # noqa: E731
        name = "h"
    else:
        raise ValueError(f"unknown target {target!r}; expected 'f', 'h' or a callable")
    X, U = _samples(b, seq, s)
    best = 0.0
    for i in range(s - 1):
        xs = X[i + 1:]
        us = np.broadcast_to(U[i], xs.shape)
        gi = np.asarray(g(X[i], U[i]), dtype=float)
        gj = np.asarray(g(xs, us), dtype=float).reshape(len(xs), -1)
        dx = np.linalg.norm(xs - X[i], axis=1)
        keep = dx >= PAIR_DISTANCE_FLOOR
        if not np.any(keep):
            continue
        dg = np.linalg.norm(gj[keep] - gi.reshape(1, -1), axis=1)
        best = max(best, float(np.max(dg / dx[keep])))
    return LipschitzEstimate(
        value=best, target=name, method="pairwise",
        sampler=seq.kind, samples=s, seed=seq.seed,
    )


def load_bounds(path) -> BoundsBox:
    path = Path(path)
    raw = json.loads(path.read_text())
    values = {}
    for key in ("x_lo", "x_hi", "u_lo", "u_hi"):
        if key not in raw:
            raise KeyError(f"{path}: missing bounds field '{key}'")
        v = raw[key]
        if not isinstance(v, list) or len(v) != 4:
            raise ValueError(f"{path}: field '{key}' must be a list of 4 numbers")
        try:
            values[key] = [float(e) for e in v]
        except (TypeError, ValueError):
            raise ValueError(f"{path}: field '{key}' must contain numbers") from None
    try:
        return BoundsBox(**values)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def bounds_to_dict(b: BoundsBox) -> dict:
    return {k: getattr(b, k).tolist() for k in ("x_lo", "x_hi", "u_lo", "u_hi")}
