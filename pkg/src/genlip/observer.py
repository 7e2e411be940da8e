"""Lipschitz observer synthesis through an LMI feasibility problem.

Find ``P = P^T > 0``, ``Y`` and ``eta >= 0`` with::

    [ A^T P + P A - C^T Y^T - Y C + eta gamma^2 I    P     ]
    [ P                                           -eta I ]  < 0

then ``L = P^{-1} Y``.  Strict inequalities are decided with a margin: a
certificate has block ``<= -margin I`` and ``P >= margin I``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .linalg import min_max_eig_sym
from .model import DerivedConstants, build_matrices, jac_h_x

__all__ = [
    "LMIProblem",
    "FeasibilityCertificate",
    "Infeasible",
    "ObserverGain",
    "linearize_output",
    "assemble_lmi",
    "solve_lmi",
    "verify_certificate",
    "extract_gain",
    "necessary_gamma_bound",
]


@dataclass(frozen=True)
class LMIProblem:
    A: np.ndarray
    C: np.ndarray
    gamma_f: float
    margin: Optional[float] = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if C.ndim != 2 or C.shape[1] != A.shape[0]:
            raise ValueError("C must have as many columns as A")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(C)) and math.isfinite(self.gamma_f)):
            raise ValueError("LMI data must be finite")
        if self.gamma_f < 0:
            raise ValueError("gamma_f must be nonnegative")
        margin = self.margin
        if margin is None:
            margin = 1e-6 * max(1.0, float(np.linalg.norm(A, 2)))
        if not margin > 0:
            raise ValueError("margin must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "margin", float(margin))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class FeasibilityCertificate:
    P: np.ndarray
    Y: np.ndarray
    eta: float
    max_eig: float
    margin: float
    iterations: int = 0

    def to_record(self) -> dict:
        return {
            "P": self.P.tolist(),
            "Y": self.Y.tolist(),
            "eta": self.eta,
            "max_eig": self.max_eig,
            "margin": self.margin,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class Infeasible:
    """No certificate found; ``best_max_eig`` is on the normalised slice."""

    best_max_eig: float
    iterations: int
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ObserverGain:
    L: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if not np.all(np.isfinite(L)):
            raise ValueError("observer gain has non-finite entries")
        object.__setattr__(self, "L", L)


def linearize_output(c: DerivedConstants, x0, u0) -> tuple[np.ndarray, np.ndarray]:
    """Output matrix ``C`` at ``(x0, u0)`` and the input feedthrough ``Du``."""
    return jac_h_x(c, x0, u0), build_matrices(c).Du


def assemble_lmi(prob: LMIProblem, P, Y, eta: float) -> np.ndarray:
    A, C, n = prob.A, prob.C, prob.n
    P = np.asarray(P, dtype=float)
    Y = np.asarray(Y, dtype=float)
    top = A.T @ P + P @ A - C.T @ Y.T - Y @ C + eta * prob.gamma_f**2 * np.eye(n)
    return np.block([[top, P.T], [P, -eta * np.eye(n)]])


def _sym_basis(n: int) -> np.ndarray:
    mats = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            mats.append(E)
    return np.array(mats)


class _Barrier:
    """Log-det barrier over affine blocks ``G(z) = G0 + sum_k z_k G_k``.

    Variables ``z = (p, y, eta, t)``: upper triangle of P, entries of Y,
    eta and the eigenvalue bound t.  Blocks::

        t I - M(P, Y, eta)        > 0
        P - I                     > 0
        eta                       > 0
        trace_cap - tr(P) - eta   > 0
        [[R I, y], [y^T, R]]      > 0     (||Y||_F < R)
    """

    def __init__(self, prob: LMIProblem, gain_bound: float, trace_cap: float):
        n, q = prob.n, prob.p
        A, C, g2 = prob.A, prob.C, prob.gamma_f**2
        self.n, self.q = n, q
        Ps = _sym_basis(n)
        self.n_p = len(Ps)
        self.n_y = n * q
        nvar = self.n_p + self.n_y + 2
        self.nvar = nvar
        I = np.eye(n)
        Z = np.zeros((n, n))

        SM = np.zeros((nvar, 2 * n, 2 * n))
        for k, E in enumerate(Ps):
            SM[k] = -np.block([[A.T @ E + E @ A, E], [E, Z]])
        for k in range(self.n_y):
            E = np.zeros((n, q))
            E.flat[k] = 1.0
            SM[self.n_p + k, :n, :n] = C.T @ E.T + E @ C
        SM[-2] = -np.block([[g2 * I, Z], [Z, -I]])
        SM[-1] = np.eye(2 * n)
        blocks = [(np.zeros((2 * n, 2 * n)), SM)]

        PP = np.zeros((nvar, n, n))
        PP[: self.n_p] = Ps
        blocks.append((-I, PP))

        E1 = np.zeros((nvar, 1, 1))
        E1[-2] = 1.0
        blocks.append((np.zeros((1, 1)), E1))

        T1 = np.zeros((nvar, 1, 1))
        T1[: self.n_p, 0, 0] = -np.trace(Ps, axis1=1, axis2=2)
        T1[-2] = -1.0
        blocks.append((np.array([[float(trace_cap)]]), T1))

        m = self.n_y + 1
        BY = np.zeros((nvar, m, m))
        for k in range(self.n_y):
            BY[self.n_p + k, k, -1] = BY[self.n_p + k, -1, k] = 1.0
        blocks.append((float(gain_bound) * np.eye(m), BY))

        self.blocks = blocks
        self.theta = sum(G0.shape[0] for G0, _ in blocks)

    def mats(self, z):
        return [G0 + np.tensordot(z, Gk, axes=1) for G0, Gk in self.blocks]

    def feasible(self, z) -> bool:
        try:
            for G in self.mats(z):
                np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return False
        return True

    def value(self, z, mu: float) -> float:
        total = mu * z[-1]
        for G in self.mats(z):
            total -= np.linalg.slogdet(G)[1]
        return float(total)

    def newton(self, z, mu: float):
        grad = np.zeros(self.nvar)
        hess = np.zeros((self.nvar, self.nvar))
        grad[-1] = mu
        for G, (_, Gk) in zip(self.mats(z), self.blocks):
            g, h = _logdet_terms(G, Gk)
            grad += g
            hess += h
        return grad, hess

    def unpack(self, z):
        n = self.n
        P = np.zeros((n, n))
        P[np.triu_indices(n)] = z[: self.n_p]
        P = P + np.triu(P, 1).T
        Y = z[self.n_p: self.n_p + self.n_y].reshape(n, self.q)
        return P, Y, float(z[-2]), float(z[-1])

    def start(self, prob: LMIProblem) -> np.ndarray:
        """P = 2 I, Y = 0, eta = 1, t one above the top eigenvalue."""
        z = np.zeros(self.nvar)
        iu = np.triu_indices(self.n)
        z[: self.n_p][iu[0] == iu[1]] = 2.0
        z[-2] = 1.0
        P, Y, eta, _ = self.unpack(z)
        z[-1] = float(np.linalg.eigvalsh(assemble_lmi(prob, P, Y, eta))[-1]) + 1.0
        return z


def _logdet_terms(G: np.ndarray, Gk: np.ndarray):
    """Gradient and Hessian of ``-logdet(G)`` w.r.t. the coefficients of ``Gk``."""
    Lc = np.linalg.cholesky(G)
    W = np.linalg.solve(Lc, np.eye(len(G)))
    Ghat = W @ Gk @ W.T
    grad = -np.trace(Ghat, axis1=1, axis2=2)
    hess = np.einsum("kij,lij->kl", Ghat, Ghat)
    return grad, hess


def solve_lmi(
    prob: LMIProblem,
    max_iter: int = 5000,
    gain_bound: float = 1e3,
    trace_cap: float = 1e4,
    mu0: float = 1.0,
    mu_factor: float = 10.0,
    gap_tol: float = 1e-9,
) -> Union[FeasibilityCertificate, Infeasible]:
    """Decide feasibility of the observer LMI; return a certificate or ``Infeasible``.

    The LMI is homogeneous, so the search runs over ``P >= I`` with
    ``trace(P) + eta <= trace_cap`` and ``||Y||_F <= gain_bound``.  Since
    ``P >= I`` the last bound also caps ``||L||_2``, which keeps the observer
    usable with explicit integrators.  A log-det barrier method minimises the
    top eigenvalue ``t`` of the block and stops at the first centred point
    with ``t < 0``.  ``Infeasible`` is returned when the duality-gap bound
    shows the optimal ``t`` is positive over that region, or not negative
    within ``gap_tol``.  ``max_iter`` caps the total number of Newton steps.
    """
    bar = _Barrier(prob, gain_bound, trace_cap)
    z = bar.start(prob)
    mu = mu0
    iters = 0
    best_t = z[-1]
    reason = "no strictly feasible point found"
    while True:
        centered = False
        while iters < max_iter:
            grad, hess = bar.newton(z, mu)
            step = -np.linalg.solve(hess, grad)
            decrement = float(-grad @ step)
            iters += 1
            if decrement / 2.0 <= 1e-9:
                centered = True
                break
            alpha = 1.0
            f0 = bar.value(z, mu)
            while alpha >= 1e-12:
                cand = z + alpha * step
                if bar.feasible(cand) and bar.value(cand, mu) <= f0 - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            else:
                centered = True  # no progress at working precision
                break
            z = cand
            best_t = min(best_t, z[-1])
        t = z[-1]
        if not centered:
            reason = "iteration cap reached"
            break
        if t < 0.0:
            break
        if t - bar.theta / mu > 0.0:
            reason = "largest eigenvalue is bounded away from zero from above"
            break
        if bar.theta / mu <= gap_tol:
            reason = "optimal largest eigenvalue is not negative within tolerance"
            break
        mu *= mu_factor

    P, Y, eta, t = bar.unpack(z)
    if not t < 0.0:
        return Infeasible(best_max_eig=float(best_t), iterations=iters, reason=reason)
    # P >= I already; scale up only if the eigenvalue margin needs it
    scale = max(1.0, 2.0 * prob.margin / -t)
    P, Y, eta = scale * P, scale * Y, scale * eta
    max_eig, min_p = verify_certificate(prob, P, Y, eta)
    if not (max_eig <= -prob.margin and min_p >= prob.margin and eta >= 0.0):
        return Infeasible(best_max_eig=float(t), iterations=iters, reason="certificate failed re-verification")
    return FeasibilityCertificate(P=P, Y=Y, eta=float(eta), max_eig=max_eig, margin=prob.margin, iterations=iters)


def verify_certificate(prob: LMIProblem, P, Y, eta: float) -> tuple[float, float]:
    """``(lambda_max(block), lambda_min(P))`` recomputed from scratch."""
    block = assemble_lmi(prob, P, Y, eta)
    _, lam_max = min_max_eig_sym(block)
    lam_min_P, _ = min_max_eig_sym(P)
    return lam_max, lam_min_P


def extract_gain(cert: FeasibilityCertificate) -> ObserverGain:
    P = np.asarray(cert.P, dtype=float)
    Y = np.asarray(cert.Y, dtype=float)
    if np.linalg.cond(P) > 1e14:
        raise RuntimeError("certificate P is numerically singular")
    L = np.linalg.solve(P, Y)
    return ObserverGain(L)


def necessary_gamma_bound(A, C) -> float:
    """Upper limit on ``gamma_f`` for which the LMI can be feasible at all.

    For ``v`` in the null space of ``C``, ``(A - L C) v = A v`` whatever the
    gain, so ``sigma_min(A - L C) <= sigma_min(A N)`` with ``N`` an orthonormal
    null-space basis.  A feasible LMI forces ``gamma_f < sigma_min(A - L C)``.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    _, sv, Vt = np.linalg.svd(C)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max(initial=0.0))))
    N = Vt[rank:].T
    if N.shape[1] == 0:
        return math.inf
    return float(np.linalg.svd(A @ N, compute_uv=False).min())
