"""Pilot matrices and the discrete assignment baselines.

Baselines pick, for every user, one column of an orthogonal tau x tau basis.
Their sum rate only depends on which users share a column, so the searches
below score candidate assignments through the squared Gram magnitudes
(``tau**2`` for a shared pilot, 0 otherwise) without building the matrices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .sysmodel import BetaMatrix, SystemConfig


class PilotKind(enum.Enum):
    UNIMODULAR = "unimodular"
    ORTHONORMAL_ASSIGNED = "orthonormal_assigned"


class BasisFlavor(enum.Enum):
    RANDOM_UNITARY = "random_unitary"
    DFT = "dft"


@dataclass
class PilotBasis:
    B: np.ndarray
    flavor: BasisFlavor

    @property
    def tau(self) -> int:
        return self.B.shape[0]


@dataclass
class PilotMatrix:
    """tau x K pilot matrix; columns have squared norm tau."""

    F: np.ndarray
    kind: PilotKind
    assignment: np.ndarray | None = None

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=complex)
        tau = self.F.shape[0]
        norms = np.sum(np.abs(self.F) ** 2, axis=0) / tau
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("every pilot column must satisfy ||f_k||^2 = tau")
        if self.kind is PilotKind.UNIMODULAR:
            if not np.allclose(np.abs(self.F), 1.0, atol=1e-9):
                raise ValueError("unimodular pilots need |F[i, k]| = 1")
            if self.assignment is not None:
                raise ValueError("unimodular pilots carry no assignment")
        elif self.assignment is None:
            raise ValueError("assigned pilots need an assignment vector")
        else:
            self.assignment = np.asarray(self.assignment, dtype=int)

    @property
    def tau(self) -> int:
        return self.F.shape[0]

    @property
    def K(self) -> int:
        return self.F.shape[1]


@dataclass
class TabuConfig:
    tenure: int | None = None  # default ceil(K / 4)
    max_iter: int | None = None  # default 100 K
    seed: int = 0


def make_basis(tau: int, flavor=BasisFlavor.RANDOM_UNITARY,
               rng: np.random.Generator | None = None) -> PilotBasis:
    """Orthogonal basis with ``B^H B = tau I``."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    flavor = BasisFlavor(flavor)
    if flavor is BasisFlavor.DFT:
        n = np.arange(tau)
        B = np.exp(-2j * np.pi * np.outer(n, n) / tau)
    else:
        rng = rng if rng is not None else np.random.default_rng()
        Z = (rng.standard_normal((tau, tau)) + 1j * rng.standard_normal((tau, tau))) / np.sqrt(2)
        Q, R = np.linalg.qr(Z)
        # fix column phases so Q is Haar distributed
        d = np.diag(R)
        Q = Q * (d / np.abs(d))
        B = np.sqrt(tau) * Q
    return PilotBasis(B, flavor)


def from_assignment(basis: PilotBasis, assignment) -> PilotMatrix:
    assignment = np.asarray(assignment, dtype=int)
    return PilotMatrix(basis.B[:, assignment], PilotKind.ORTHONORMAL_ASSIGNED, assignment)


def unimodular(F) -> PilotMatrix:
    return PilotMatrix(F, PilotKind.UNIMODULAR)


def round_robin(K: int, tau: int) -> np.ndarray:
    return np.arange(K) % tau


def assignment_abs_gram(assignment, tau: int) -> np.ndarray:
    """Squared Gram magnitudes for an orthogonal-basis assignment.

    Works on batches: ``assignment`` of shape ``(..., K)`` gives ``(..., K, K)``.
    """
    a = np.asarray(assignment)
    same = a[..., :, None] == a[..., None, :]
    return same * float(tau) ** 2


def assignment_sum_rate(assignment, beta, tau: int, rho: float, rho_p=None):
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    return metrics.sum_rate_from_abs_gram(assignment_abs_gram(assignment, tau), b, tau, rho, rho_p)


def assign_random(basis: PilotBasis, K: int, rng: np.random.Generator) -> PilotMatrix:
    """Each user draws a basis column uniformly at random (with replacement)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return from_assignment(basis, rng.integers(0, basis.tau, size=K))


def _rho(cfg: SystemConfig):
    return cfg.rho_sinr, cfg.rho_p


def assign_greedy(basis: PilotBasis, beta, cfg: SystemConfig, n_iter: int | None = None) -> PilotMatrix:
    """Worst-user greedy reassignment starting from round robin.

    Each round takes the user with the lowest rate and moves it to the pilot
    whose current users put the least large-scale power on the APs, i.e. the
    pilot minimizing ``sum_l sum_{k' on pilot} beta[l, k']``. The best
    assignment seen (by sum rate) is returned.
    """
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    tau = basis.tau
    K = b.shape[1]
    n_iter = K if n_iter is None else n_iter
    rho, rho_p = _rho(cfg)
    assign = round_robin(K, tau)
    load = b.sum(axis=0)  # total large-scale gain of every user

    def score(a):
        sinr = metrics.sinr_from_abs_gram(assignment_abs_gram(a, tau), b, tau, rho, rho_p)
        return sinr

    sinr = score(assign)
    best, best_val = assign.copy(), float(np.sum(np.log2(1 + sinr)))
    for _ in range(n_iter):
        worst = int(np.argmin(sinr))
        others = np.ones(K, dtype=bool)
        others[worst] = False
        contamination = np.bincount(assign[others], weights=load[others], minlength=tau)
        target = int(np.argmin(contamination))
        if target == assign[worst]:
            break
        assign = assign.copy()
        assign[worst] = target
        sinr = score(assign)
        val = float(np.sum(np.log2(1 + sinr)))
        if val > best_val:
            best, best_val = assign.copy(), val
    return from_assignment(basis, best)


def assign_tabu(basis: PilotBasis, beta, cfg: SystemConfig,
                tabu_cfg: TabuConfig | None = None) -> PilotMatrix:
    """Tabu search over single-user pilot moves maximizing the sum rate.

    Every iteration scores all ``K * (tau - 1)`` moves and applies the best
    one that is not tabu, unless it beats the best assignment found so far
    (aspiration). A move (user, pilot) becomes tabu for ``tenure``
    iterations once the user leaves that pilot. Ties are broken at random
    with the seed from ``tabu_cfg``.
    """
    tabu_cfg = tabu_cfg or TabuConfig()
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    tau = basis.tau
    K = b.shape[1]
    tenure = math.ceil(K / 4) if tabu_cfg.tenure is None else tabu_cfg.tenure
    max_iter = 100 * K if tabu_cfg.max_iter is None else tabu_cfg.max_iter
    rho, rho_p = _rho(cfg)
    rng = np.random.default_rng(tabu_cfg.seed)

    cur = round_robin(K, tau)
    cur_val = float(assignment_sum_rate(cur, b, tau, rho, rho_p))
    best, best_val = cur.copy(), cur_val
    tabu_until = np.zeros((K, tau), dtype=int)

    users = np.repeat(np.arange(K), tau)
    pilots = np.tile(np.arange(tau), K)
    for it in range(max_iter):
        valid = pilots != cur[users]
        if not np.any(valid):
            break
        u, p = users[valid], pilots[valid]
        cand = np.repeat(cur[None, :], u.size, axis=0)
        cand[np.arange(u.size), u] = p
        vals = assignment_sum_rate(cand, b, tau, rho, rho_p)
        allowed = (tabu_until[u, p] <= it) | (vals > best_val)
        if not np.any(allowed):
            continue
        vals = np.where(allowed, vals, -np.inf)
        top = np.flatnonzero(vals == vals.max())
        pick = top[rng.integers(top.size)] if top.size > 1 else top[0]
        tabu_until[u[pick], cur[u[pick]]] = it + 1 + tenure
        cur = cand[pick]
        cur_val = float(vals[pick])
        if cur_val > best_val:
            best, best_val = cur.copy(), cur_val
    return from_assignment(basis, best)
