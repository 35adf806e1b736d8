"""Uplink data detection at the CPU.

All detectors take an :class:`EffectiveChannel` (the L x K matrix that maps
unit-energy-normalized symbols to the AP observations) and received samples
``y`` of shape ``(L,)`` or ``(L, N)``; the second form detects N symbol
vectors sharing one channel in a single call.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped QPSK with average energy ``E_S``.

    Bit pair (b0, b1) maps to ``c_x * ((1 - 2 b0) + j (1 - 2 b1))`` so that
    ``00 -> c_x (1 + j)``.
    """

    E_S: float = 1.0

    @property
    def c_x(self) -> float:
        return float(np.sqrt(self.E_S / 2.0))

    @property
    def points(self) -> np.ndarray:
        c = self.c_x
        return np.array([c * (1 + 1j), c * (1 - 1j), c * (-1 + 1j), c * (-1 - 1j)])

    @property
    def bits_per_symbol(self) -> int:
        return 2


QPSK = Constellation()


def modulate(bits, constellation: Constellation = QPSK) -> np.ndarray:
    """Map a flat bit array (even length) to QPSK symbols."""
    bits = np.asarray(bits, dtype=int)
    if bits.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    pairs = bits.reshape(-1, 2)
    c = constellation.c_x
    return c * ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1]))


def demodulate(symbols) -> np.ndarray:
    """Nearest-point QPSK demapping back to a flat bit array."""
    s = np.asarray(symbols).ravel()
    bits = np.empty((s.size, 2), dtype=int)
    bits[:, 0] = s.real < 0
    bits[:, 1] = s.imag < 0
    return bits.ravel()


def hard_decision(x, constellation: Constellation = QPSK) -> np.ndarray:
    x = np.asarray(x)
    c = constellation.c_x
    return c * (np.where(x.real < 0, -1.0, 1.0) + 1j * np.where(x.imag < 0, -1.0, 1.0))


@dataclass
class EffectiveChannel:
    """Channel seen by the detector.

    ``est_err_var`` holds per-entry variances of the error between the true
    effective channel and ``H`` (zero under perfect CSI).
    """

    H: np.ndarray
    noise_var: float
    est_err_var: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        if not np.all(np.isfinite(self.H)):
            raise ValueError("channel must be finite")
        if self.est_err_var is None:
            self.est_err_var = np.zeros(self.H.shape)


@dataclass
class DetectionResult:
    x_hat: np.ndarray
    hard: np.ndarray
    bits: np.ndarray


def _result(x_hat, constellation):
    hard = hard_decision(x_hat, constellation)
    # bits ordered user-major within each symbol vector
    bits = demodulate(np.asarray(hard).T if np.ndim(hard) == 2 else hard)
    return DetectionResult(x_hat=x_hat, hard=hard, bits=bits)


def mr_combine(g_hat, y, gamma=None, rho_u: float = 1.0, eta=None,
               constellation: Constellation = QPSK) -> DetectionResult:
    """Maximum-ratio combining ``r_k = sum_l conj(g_hat[l, k]) y_l``.

    The statistic is divided by ``sqrt(rho_u eta_k) sum_l gamma[l, k]`` (the
    mean desired-signal gain) before slicing; without ``gamma`` the
    instantaneous ``sum_l |g_hat[l, k]|^2`` is used instead.
    """
    g_hat = np.asarray(g_hat)
    K = g_hat.shape[1]
    eta = np.ones(K) if eta is None else np.asarray(eta, dtype=float)
    gain = np.sum(np.abs(g_hat) ** 2, axis=0) if gamma is None else np.sum(gamma, axis=0)
    scale = np.sqrt(rho_u * eta) * gain
    r = g_hat.conj().T @ np.asarray(y)
    x_hat = r / (scale[:, None] if r.ndim == 2 else scale)
    return _result(x_hat, constellation)


def lmmse_detect(ch: EffectiveChannel, y, constellation: Constellation = QPSK) -> DetectionResult:
    """``(H^H H + sigma^2 / E_S I)^{-1} H^H y`` through a Cholesky solve."""
    H = ch.H
    K = H.shape[1]
    A = H.conj().T @ H + (ch.noise_var / constellation.E_S) * np.eye(K)
    try:
        cho = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("LMMSE system is singular") from exc
    x_hat = linalg.cho_solve(cho, H.conj().T @ np.asarray(y))
    return _result(x_hat, constellation)


def _symbol_posterior(mean, var, constellation):
    """Moments of a discrete prior on the constellation times CN(mean, var)."""
    pts = constellation.points
    logw = -np.abs(mean[..., None] - pts) ** 2 / var[..., None]
    w = np.exp(logw - logsumexp(logw, axis=-1, keepdims=True))
    m = np.sum(w * pts, axis=-1)
    v = np.sum(w * np.abs(pts) ** 2, axis=-1) - np.abs(m) ** 2
    return m, v


@dataclass
class EPConfig:
    t_max: int = 10
    damping: float = 0.7
    var_floor: float = 1e-8


def ep_detect(ch: EffectiveChannel, y, cfg: EPConfig | None = None,
              constellation: Constellation = QPSK) -> DetectionResult:
    """Expectation-propagation detection with Gaussian sites per symbol.

    The observation module computes the Gaussian posterior
    ``Sigma = (H^H R^-1 H + diag(lam))^-1``, ``mu = Sigma (H^H R^-1 y + gam)`` with
    ``R = D + sigma^2 I`` and ``D_ll = E_S sum_k est_err_var[l, k]``. The
    estimation module matches the moments of the cavity times the discrete
    prior and refreshes the sites (damped). Sites start uninformative
    (``lam = 1/E_S``, ``gam = 0``), so a single iteration is LMMSE.
    """
    cfg = cfg or EPConfig()
    H = ch.H
    L, K = H.shape
    Y = np.asarray(y)
    single = Y.ndim == 1
    Y = Y[:, None] if single else Y
    N = Y.shape[1]
    r_diag = ch.noise_var + constellation.E_S * np.sum(ch.est_err_var, axis=1)
    Hw = H / r_diag[:, None]
    HtH = H.conj().T @ Hw  # H^H R^-1 H
    Hty = (Hw.conj().T @ Y).T  # (N, K)

    lam = np.full((N, K), 1.0 / constellation.E_S)
    gam = np.zeros((N, K), dtype=complex)
    eye = np.eye(K)
    mu = None
    for t in range(cfg.t_max):
        P = HtH[None, :, :] + lam[:, :, None] * eye
        Sigma = np.linalg.inv(P)
        mu = np.einsum("nij,nj->ni", Sigma, Hty + gam)
        if t == cfg.t_max - 1:
            break
        s_diag = np.maximum(np.real(np.einsum("nii->ni", Sigma)), cfg.var_floor)
        cav_var = 1.0 / np.maximum(1.0 / s_diag - lam, 1.0 / (1e3 * constellation.E_S))
        cav_mean = cav_var * (mu / s_diag - gam)
        pm, pv = _symbol_posterior(cav_mean, cav_var, constellation)
        pv = np.maximum(pv, cfg.var_floor)
        lam_new = 1.0 / pv - 1.0 / cav_var
        gam_new = pm / pv - cav_mean / cav_var
        ok = lam_new > 0
        lam_new = np.where(ok, lam_new, lam)
        gam_new = np.where(ok, gam_new, gam)
        lam = cfg.damping * lam_new + (1 - cfg.damping) * lam
        gam = cfg.damping * gam_new + (1 - cfg.damping) * gam
    x_hat = mu[0] if single else mu.T
    return _result(x_hat, constellation)


@dataclass
class GaBPConfig:
    i_max: int = 20
    damping: float = 0.5


@dataclass
class GaBPState:
    x_hat: np.ndarray
    var: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)


def gabp_detect(ch: EffectiveChannel, y, cfg: GaBPConfig | None = None,
                constellation: Constellation = QPSK, return_state: bool = False):
    """Gaussian belief propagation with soft interference cancellation.

    Per iteration and for every edge (l, k): cancel the other users' soft
    replicas from ``y_l``, combine the resulting scalar observations of x_k
    from all APs except l into an extrinsic Gaussian belief, pass it through
    the QPSK posterior-mean denoiser, and damp mean and variance. After
    ``i_max`` iterations the consensus over all APs gives the estimate.
    Only elementwise work on L x K arrays is involved.
    """
    cfg = cfg or GaBPConfig()
    if not 0 < cfg.damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    H = ch.H
    L, K = H.shape
    Y = np.asarray(y)
    single = Y.ndim == 1
    Y = Y[:, None] if single else Y  # (L, N)
    N = Y.shape[1]
    E_S = constellation.E_S
    c_x = constellation.c_x
    beta_x = cfg.damping
    sigma2 = ch.noise_var

    Hn = H[:, :, None]  # (L, K, 1)
    H2 = (np.abs(H) ** 2)[:, :, None]
    x_hat = np.zeros((L, K, N), dtype=complex)
    var = np.full((L, K, N), float(E_S))
    state = GaBPState(x_hat, var)
    r_til = v_til = None
    for i in range(1, cfg.i_max + 1):
        # soft interference cancellation
        contrib = Hn * x_hat
        r_til = Y[:, None, :] - contrib.sum(axis=1, keepdims=True) + contrib
        pw = H2 * var
        v_til = pw.sum(axis=1, keepdims=True) - pw + sigma2
        v_til = np.maximum(v_til, VAR_FLOOR)
        # extrinsic beliefs excluding AP l
        prec = H2 / v_til
        num = Hn.conj() * r_til / v_til
        prec_ext = np.maximum(prec.sum(axis=0, keepdims=True) - prec, VAR_FLOOR)
        num_ext = num.sum(axis=0, keepdims=True) - num
        v_bar = 1.0 / prec_ext
        x_bar = v_bar * num_ext
        # QPSK denoiser and damping
        x_den = c_x * (np.tanh(2 * c_x * x_bar.real / v_bar)
                       + 1j * np.tanh(2 * c_x * x_bar.imag / v_bar))
        v_den = np.maximum(E_S - np.abs(x_den) ** 2, VAR_FLOOR)
        x_hat = beta_x * x_den + (1 - beta_x) * x_hat
        var = beta_x * v_den + (1 - beta_x) * var
        state.iteration = i
    # consensus from the last sIC pass
    prec = H2 / v_til
    num = Hn.conj() * r_til / v_til
    x_final = num.sum(axis=0) / np.maximum(prec.sum(axis=0), VAR_FLOOR)  # (K, N)
    state.x_hat, state.var = x_hat, var
    out = _result(x_final[:, 0] if single else x_final, constellation)
    return (out, state) if return_state else out


def map_oracle(ch: EffectiveChannel, y, constellation: Constellation = QPSK,
               max_candidates: int = 10 ** 6, chunk: int = 4096) -> DetectionResult:
    """Exhaustive minimization of ``||y - H x||^2`` over all constellation vectors."""
    H = ch.H
    K = H.shape[1]
    pts = constellation.points
    if len(pts) ** K > max_candidates:
        raise ValueError(f"search space {len(pts)}^{K} exceeds the cap of {max_candidates}")
    cand = np.array(list(itertools.product(pts, repeat=K)))  # (M^K, K)
    Y = np.asarray(y)
    single = Y.ndim == 1
    Y = Y[:, None] if single else Y
    HX = H @ cand.T  # (L, M^K)
    best_cost = np.full(Y.shape[1], np.inf)
    best_idx = np.zeros(Y.shape[1], dtype=int)
    for start in range(0, cand.shape[0], chunk):
        block = HX[:, start:start + chunk]
        cost = np.sum(np.abs(Y[:, None, :] - block[:, :, None]) ** 2, axis=0)
        idx = np.argmin(cost, axis=0)
        c = cost[idx, np.arange(Y.shape[1])]
        better = c < best_cost
        best_cost[better] = c[better]
        best_idx[better] = start + idx[better]
    x = cand[best_idx].T  # (K, N)
    return _result(x[:, 0] if single else x, constellation)


DETECTORS = ("MR", "LMMSE", "EP", "GaBP")


@dataclass
class BerScenario:
    """Link-level BER setup.

    ``system`` supplies geometry, L, K, tau and eta. Large-scale gains are
    normalized per drop so that ``mean_k sum_l beta[l, k] = 1``; the SNR
    grid then sets both the pilot and the data SNR (unit noise variance),
    making ``snr_db`` the average per-user array SNR.
    """

    system: object
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    csi: str = "estimated"  # or "perfect"
    n_drops: int = 50
    symbols_per_drop: int = 100
    master_seed: int = 0
    ep: EPConfig = field(default_factory=EPConfig)
    gabp: GaBPConfig = field(default_factory=GaBPConfig)

    def __post_init__(self):
        if self.csi not in ("estimated", "perfect"):
            raise ValueError("csi must be 'estimated' or 'perfect'")
        if self.n_drops < 1 or self.symbols_per_drop < 1:
            raise ValueError("n_drops and symbols_per_drop must be >= 1")
        if len(self.snr_db) == 0:
            raise ValueError("snr grid must be non-empty")


@dataclass
class BerRecord:
    snr_db: float
    scheme: str
    ber: float
    bits_counted: int
    errors: int


def _detect(scheme, g_hat, gamma, ch, y, rho_u, eta, scen):
    if scheme == "MR":
        return mr_combine(g_hat, y, gamma, rho_u, eta)
    if scheme == "LMMSE":
        return lmmse_detect(ch, y)
    if scheme == "EP":
        return ep_detect(ch, y, scen.ep)
    if scheme == "GaBP":
        return gabp_detect(ch, y, scen.gabp)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {DETECTORS}")


def ber_experiment(scheme, scenario: BerScenario, rng=None) -> list[BerRecord]:
    """Monte Carlo BER for one or several detectors over the SNR grid.

    Every drop uses its own derived seed and the same draws (geometry,
    random pilot assignment, fading, pilot noise, bits, data noise) are
    reused across SNR points and detectors. ``rng`` may override the master
    seed with an integer. Returns one record per (SNR, scheme).
    """
    from . import metrics, pilots, sysmodel
    from .seeding import derive

    schemes = [scheme] if isinstance(scheme, str) else list(scheme)
    for s in schemes:
        if s not in DETECTORS:
            raise ValueError(f"unknown scheme {s!r}; choose from {DETECTORS}")
    master = scenario.master_seed if rng is None else int(rng)
    cfg = scenario.system
    eta = cfg.eta_vector
    n_sym = scenario.symbols_per_drop
    errors = np.zeros((len(scenario.snr_db), len(schemes)), dtype=np.int64)
    bits_total = 0
    for d in range(scenario.n_drops):
        streams = [np.random.default_rng(derive(master, d, j)) for j in range(5)]
        beta = sysmodel.drop_network(cfg, streams[0]).beta
        beta = beta / np.mean(beta.sum(axis=0))
        basis = pilots.make_basis(cfg.tau, rng=streams[1])
        F = pilots.assign_random(basis, cfg.K, streams[1])
        g = sysmodel.draw_channel(sysmodel.BetaMatrix(beta), streams[2]).g
        pilot_seed = derive(master, d, 3)
        bits = streams[4].integers(0, 2, size=2 * cfg.K * n_sym)
        X = modulate(bits).reshape(n_sym, cfg.K).T  # (K, N)
        W = (streams[4].standard_normal((cfg.L, n_sym))
             + 1j * streams[4].standard_normal((cfg.L, n_sym))) / np.sqrt(2.0)
        bits_total += bits.size
        for i, snr_db in enumerate(scenario.snr_db):
            rho = 10.0 ** (snr_db / 10.0)
            scale = np.sqrt(rho * eta)
            y = (g * scale) @ X + W
            est = metrics.estimate_channels(F, beta, g, rho, np.random.default_rng(pilot_seed))
            if scenario.csi == "perfect":
                g_hat, gamma, err = g, beta, np.zeros_like(beta)
            else:
                g_hat, gamma, err = est.g_hat, est.gamma, est.err_var
            ch = EffectiveChannel(g_hat * scale, 1.0, err * rho * eta)
            for j, s in enumerate(schemes):
                out = _detect(s, g_hat, gamma, ch, y, rho, eta, scenario)
                errors[i, j] += int(np.sum(out.bits != bits))
    return [BerRecord(float(snr), s, errors[i, j] / bits_total, bits_total, int(errors[i, j]))
            for i, snr in enumerate(scenario.snr_db) for j, s in enumerate(schemes)]
