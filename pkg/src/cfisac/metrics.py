"""Closed-form uplink metrics: MMSE estimation statistics, SINR and rates.

Everything here depends on the pilots only through the squared Gram
magnitudes ``A[k, k'] = |f_k^H f_k'|^2``. The ``*_from_abs_gram`` helpers work
on that matrix directly and accept leading batch dimensions, which the pilot
assignment searches use to score many candidate assignments at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sysmodel import BetaMatrix, ChannelRealization, SystemConfig

LN2 = np.log(2.0)


@dataclass
class ChannelEstimate:
    c: np.ndarray
    gamma: np.ndarray
    err_var: np.ndarray
    g_hat: np.ndarray | None = None


@dataclass
class RateReport:
    sinr: np.ndarray
    rate_bits: np.ndarray
    net_bps: np.ndarray

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rate_bits))

    @property
    def sum_net_bps(self) -> float:
        return float(np.sum(self.net_bps))


def _pilots(F) -> np.ndarray:
    return np.asarray(getattr(F, "F", F))


def _beta(beta) -> np.ndarray:
    return beta.beta if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)


def pilot_gram(F) -> np.ndarray:
    """K x K Gram matrix ``G[k, k'] = f_k^H f_k'``."""
    F = _pilots(F)
    return F.conj().T @ F


def abs_gram_sq(F) -> np.ndarray:
    G = pilot_gram(F)
    return (G * G.conj()).real


def _denominator(A, beta, tau, rho_p):
    # rho_p * sum_k' beta[l, k'] A[k, k'] + tau, shape (..., L, K)
    return rho_p * (beta @ np.swapaxes(A, -1, -2)) + tau


def gamma_from_abs_gram(A, beta, tau, rho_p):
    den = _denominator(A, beta, tau, rho_p)
    return tau ** 2 * rho_p * beta ** 2 / den


def estimation_stats(F, beta, rho_p: float) -> ChannelEstimate:
    """MMSE coefficients ``c``, estimate powers ``gamma`` and error variances."""
    if rho_p <= 0:
        raise ValueError("rho_p must be positive")
    Fm = _pilots(F)
    b = _beta(beta)
    tau = Fm.shape[0]
    den = _denominator(abs_gram_sq(Fm), b, tau, rho_p)
    c = tau * np.sqrt(rho_p) * b / den
    gamma = tau ** 2 * rho_p * b ** 2 / den
    return ChannelEstimate(c=c, gamma=gamma, err_var=b - gamma)


def estimate_channels(F, beta, g, rho_p: float, rng: np.random.Generator) -> ChannelEstimate:
    """Simulate the pilot phase and return MMSE channel estimates.

    User k sends ``sqrt(rho_p) f_k``; AP l observes ``Y_l = sqrt(rho_p) F g_l^T + n_l``
    with unit-variance noise, correlates with ``f_k^H`` and scales by ``c``.
    """
    Fm = _pilots(F)
    gm = g.g if isinstance(g, ChannelRealization) else np.asarray(g)
    stats = estimation_stats(Fm, beta, rho_p)
    tau = Fm.shape[0]
    L = gm.shape[0]
    noise = (rng.standard_normal((tau, L)) + 1j * rng.standard_normal((tau, L))) / np.sqrt(2.0)
    y_pilot = np.sqrt(rho_p) * Fm @ gm.T + noise  # (tau, L)
    y_check = (Fm.conj().T @ y_pilot).T  # (L, K)
    stats.g_hat = stats.c * y_check
    return stats


def sinr_from_abs_gram(A, beta, tau, rho, rho_p=None):
    """Uplink SINR for every user from squared Gram magnitudes.

    ``A`` may carry leading batch dimensions ``(..., K, K)``; the result then
    has shape ``(..., K)``.
    """
    rho_p = rho if rho_p is None else rho_p
    b = np.asarray(beta, dtype=float)
    A = np.asarray(A, dtype=float)
    K = b.shape[1]
    gamma = gamma_from_abs_gram(A, b, tau, rho_p)
    S = gamma.sum(axis=-2)
    # T[k, k'] = sum_l gamma[l, k] beta[l, k'] / beta[l, k]
    T = np.swapaxes(gamma / b, -1, -2) @ b
    off = 1.0 - np.eye(K)
    D1 = rho * np.sum(T ** 2 * A * off, axis=-1)
    D2 = rho * np.sum(gamma * b.sum(axis=1)[:, None], axis=-2)
    return rho * S ** 2 / (D1 + D2 + S)


def sum_rate_from_abs_gram(A, beta, tau, rho, rho_p=None):
    return np.sum(np.log2(1.0 + sinr_from_abs_gram(A, beta, tau, rho, rho_p)), axis=-1)


def sinr_per_user(F, beta, rho: float, rho_p: float | None = None) -> np.ndarray:
    """Per-user SINR. ``rho_p`` (defaults to ``rho``) drives the estimation quality."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    Fm = _pilots(F)
    return sinr_from_abs_gram(abs_gram_sq(Fm), _beta(beta), Fm.shape[0], rho, rho_p)


def sum_rate(F, beta, rho: float, rho_p: float | None = None) -> float:
    return float(np.sum(np.log2(1.0 + sinr_per_user(F, beta, rho, rho_p))))


def net_throughput(rate_bits, tau: int, cfg: SystemConfig) -> np.ndarray:
    """Per-user net throughput in bit/s after pilot overhead and duplex split."""
    return cfg.B_Hz * (1.0 - tau / cfg.T) * cfg.duplex_factor * np.asarray(rate_bits)


def rates(F, beta, cfg: SystemConfig) -> RateReport:
    Fm = _pilots(F)
    sinr = sinr_per_user(Fm, beta, cfg.rho_sinr, cfg.rho_p)
    r = np.log2(1.0 + sinr)
    return RateReport(sinr=sinr, rate_bits=r, net_bps=net_throughput(r, Fm.shape[0], cfg))
