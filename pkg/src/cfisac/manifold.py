"""Conjugate-gradient ascent of the uplink sum rate on the complex circle manifold.

Points are tau x K matrices whose entries all have unit modulus. Tangent
vectors at X have zero radial component entrywise, the metric is
``Re tr(U^H V)``, retraction renormalizes each entry, and vector transport is
the tangent projection at the new point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .metrics import LN2
from .sysmodel import BetaMatrix

logger = logging.getLogger(__name__)


class DegenerateRetraction(ValueError):
    """Raised when X + Z has an exactly zero entry."""


@dataclass
class OptimizerConfig:
    eps: float = 1e-6
    i_max: int = 500
    initial_step: float = 1.0
    contraction: float = 0.5
    sufficient_increase_coef: float = 1e-4
    m_max: int = 30
    fd_step: float = 1e-6
    # "fixed": every search starts at initial_step; "adaptive": start from the
    # previous step rescaled by the ratio of directional slopes
    step_rule: str = "fixed"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")


@dataclass
class OptimizationResult:
    F: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    grad_norms: list = field(default_factory=list)


def random_point(tau: int, K: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random((tau, K)))


def retract(X, Z) -> np.ndarray:
    """Entrywise ``(X + Z) / |X + Z|``."""
    Y = np.asarray(X) + np.asarray(Z)
    mag = np.abs(Y)
    if np.any(mag == 0):
        raise DegenerateRetraction("retraction hit an exactly zero entry")
    return Y / mag


def project_tangent(X, U) -> np.ndarray:
    """Remove the radial component of U at X: ``U - Re(conj(X) * U) * X``."""
    X = np.asarray(X)
    U = np.asarray(U)
    return U - np.real(X.conj() * U) * X


def metric(U, V) -> float:
    return float(np.real(np.vdot(U, V)))


def objective(F, beta, rho, rho_p=None) -> float:
    """Sum rate in bit/s/Hz; ``tau`` is taken from the number of rows of F."""
    return metrics.sum_rate(F, beta, rho, rho_p)


def euclidean_gradient(F, beta, rho: float, rho_p: float | None = None) -> np.ndarray:
    """Wirtinger gradient ``2 df/dconj(F)`` of the sum rate.

    The sum rate depends on F only through ``A = |F^H F|^2`` (entrywise).
    With ``W[k, k'] = df/dA[k, k']`` (entries of A treated as independent),
    the chain rule through ``G = F^H F`` gives ``2 F ((W + W^T) * G)``.
    ``tau`` is held fixed at ``F.shape[0]``, so the expression is valid off the
    manifold as well, which is what the finite-difference checks rely on.
    """
    F = np.asarray(F)
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    rho_p = rho if rho_p is None else rho_p
    tau = F.shape[0]
    K = b.shape[1]
    G = F.conj().T @ F
    A = (G * G.conj()).real
    off = 1.0 - np.eye(K)

    den = rho_p * (b @ A.T) + tau
    gamma = tau ** 2 * rho_p * b ** 2 / den
    S = gamma.sum(axis=0)
    T = (gamma / b).T @ b
    bsum = b.sum(axis=1)
    D = rho * np.sum(T ** 2 * A * off, axis=1) + rho * (bsum @ gamma) + S
    N = rho * S ** 2
    sinr = N / D

    # dSINR_k / dA[k, k'] holding gamma fixed (only through the D1 term)
    direct = -(N / D ** 2)[:, None] * rho * T ** 2 * off
    # dSINR_k / dgamma[l, k]
    Q = b @ (T * A * off).T  # Q[l, k] = sum_{k' != k} T[k, k'] A[k, k'] beta[l, k']
    dD_dgamma = 2.0 * rho * Q / b + rho * bsum[:, None] + 1.0
    dsinr_dgamma = (2.0 * rho * S * D - N * dD_dgamma) / D ** 2
    # dgamma[l, k] / dA[k, k'] = -rho_p gamma[l, k] beta[l, k'] / den[l, k]
    V = dsinr_dgamma * gamma / den
    indirect = -rho_p * (V.T @ b)

    W = (direct + indirect) / (LN2 * (1.0 + sinr))[:, None]
    return 2.0 * F @ ((W + W.T) * G)


def riemannian_gradient(F, beta, rho, rho_p=None) -> np.ndarray:
    return project_tangent(F, euclidean_gradient(F, beta, rho, rho_p))


def fd_gradient_oracle(F, beta, rho, step: float = 1e-6, rho_p=None, func=None) -> np.ndarray:
    """Central differences on the real and imaginary part of every entry.

    Returns ``df/dRe + j df/dIm``, which equals the Wirtinger gradient
    ``2 df/dconj(F)`` for a real-valued f. ``func`` overrides the objective.
    """
    if not 1e-8 <= step <= 1e-4:
        raise ValueError("step must lie in [1e-8, 1e-4]")
    F = np.asarray(F, dtype=complex)
    if func is None:
        def func(X):
            return objective(X, beta, rho, rho_p)
    out = np.zeros_like(F)
    for idx in np.ndindex(F.shape):
        for unit, part in ((1.0, 1.0), (1j, 1j)):
            Fp = F.copy()
            Fm = F.copy()
            Fp[idx] += step * unit
            Fm[idx] -= step * unit
            out[idx] += part * (func(Fp) - func(Fm)) / (2.0 * step)
    return out


def armijo_step(F, direction, evaluate, cfg: OptimizerConfig, grad=None, f0=None):
    """Backtracking step for ascent along ``direction``.

    Tries ``initial_step * contraction**m`` for m = 0..m_max and returns the
    first step meeting the sufficient-increase test together with the new
    point and value. When no trial succeeds the step is 0 and the point is
    unchanged; callers treat that as stagnation.
    """
    if f0 is None:
        f0 = evaluate(F)
    if grad is None:
        grad = direction
    slope = metric(grad, direction)
    alpha = cfg.initial_step
    for _ in range(cfg.m_max + 1):
        X = retract(F, alpha * direction)
        fx = evaluate(X)
        if fx >= f0 + cfg.sufficient_increase_coef * alpha * slope:
            return alpha, X, fx
        alpha *= cfg.contraction
    return 0.0, F, f0


def optimize_pilots(beta, rho: float, cfg: OptimizerConfig | None = None, init=None,
                    rng: np.random.Generator | None = None, tau: int | None = None,
                    rho_p: float | None = None, callback=None) -> OptimizationResult:
    """Riemannian conjugate-gradient ascent of the sum rate.

    Polak-Ribiere-type coefficient ``max(0, <G+, G+ - Xi> / <G, G>)`` with the
    previous direction Xi transported by projection;
    the search direction falls back to the gradient whenever it stops being
    an ascent direction. Stops when the relative objective increase drops to
    ``cfg.eps`` or after ``cfg.i_max`` iterations. ``callback(F)`` runs after
    every accepted step.
    """
    cfg = cfg or OptimizerConfig()
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    if init is None:
        if tau is None:
            raise ValueError("tau is required when no initial point is given")
        rng = rng if rng is not None else np.random.default_rng()
        F = random_point(tau, b.shape[1], rng)
    else:
        F = retract(np.asarray(init, dtype=complex), 0.0)

    def evaluate(X):
        return objective(X, b, rho, rho_p)

    f = evaluate(F)
    G = riemannian_gradient(F, b, rho, rho_p)
    Xi = G
    prev_alpha, prev_slope = None, None
    result = OptimizationResult(F=F, trace=[f], grad_norms=[np.sqrt(metric(G, G))])
    for i in range(cfg.i_max):
        if metric(G, Xi) <= 0:
            Xi = G
        gg = metric(G, G)
        if gg == 0.0:
            result.converged = True
            break
        slope = metric(G, Xi)
        step_cfg = cfg
        if cfg.step_rule == "adaptive" and prev_alpha:
            start = min(prev_alpha * prev_slope / slope * 2.0, 1e12)
            step_cfg = replace(cfg, initial_step=start)
        alpha, F_new, f_new = armijo_step(F, Xi, evaluate, step_cfg, grad=G, f0=f)
        prev_alpha, prev_slope = alpha, slope
        result.iterations = i + 1
        if alpha == 0.0:
            logger.debug("line search stalled at iteration %d", i)
            result.converged = True
            break
        G_new = riemannian_gradient(F_new, b, rho, rho_p)
        G_trans = project_tangent(F_new, G_new)
        Xi_trans = project_tangent(F_new, Xi)
        pr = max(0.0, metric(G_trans, G_trans - Xi_trans) / gg)
        Xi = G_new + pr * Xi_trans
        increase = f_new - f
        F, f, G = F_new, f_new, G_new
        result.trace.append(f)
        result.grad_norms.append(np.sqrt(metric(G, G)))
        if callback is not None:
            callback(F)
        if increase <= cfg.eps * max(abs(f), 1e-300):
            result.converged = True
            break
    result.F = F
    return result


@dataclass
class DesignConfig:
    """Outer schedule around :func:`optimize_pilots`.

    The ascent is run on a sequence of problems whose SNR is scaled by
    ``snr_schedule`` (low to high), each warm-started from the previous
    solution, and this is repeated from ``n_starts`` random points; the best
    final point is kept. ``snr_schedule=(1.0,)`` with ``n_starts=1`` is the
    plain single run.
    """

    snr_schedule: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    n_starts: int = 3
    stage: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(eps=1e-14, i_max=3000, step_rule="adaptive"))

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if not self.snr_schedule or any(s <= 0 for s in self.snr_schedule):
            raise ValueError("snr_schedule must hold positive scales")


def design_pilots(beta, rho: float, tau: int, rng: np.random.Generator,
                  cfg: DesignConfig | None = None, rho_p: float | None = None) -> OptimizationResult:
    """Best-of-``n_starts`` continuation ascent; see :class:`DesignConfig`.

    The returned trace holds the objective at the true SNR after every
    iteration of the winning start, across all stages; it is only guaranteed
    to be non-decreasing within the final stage.
    """
    cfg = cfg or DesignConfig()
    b = beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)
    rho_p = rho if rho_p is None else rho_p
    best = None
    for _ in range(cfg.n_starts):
        F = random_point(tau, b.shape[1], rng)
        trace = [objective(F, b, rho, rho_p)]
        iters = 0
        res = None
        for scale in cfg.snr_schedule:
            res = optimize_pilots(b, rho * scale, cfg.stage, init=F, rho_p=rho_p * scale,
                                  callback=lambda X: trace.append(objective(X, b, rho, rho_p)))
            F = res.F
            iters += res.iterations
        res.trace = trace
        res.iterations = iters
        if best is None or objective(F, b, rho, rho_p) > objective(best.F, b, rho, rho_p):
            best = res
    return best
