"""Autocorrelation and matched-filter ranging for pilot sequences.

Optimized pilot entries are read as frequency-domain samples; the sequence
that goes on the air is their unitary inverse DFT. Unit-modulus spectra give
an ideal periodic autocorrelation, and the transform keeps every pilot inner
product, so the rate analysis is unaffected by the choice of domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pilots import PilotKind, PilotMatrix

SPEED_OF_LIGHT = 3e8


@dataclass
class AcfProfile:
    lags: np.ndarray
    values: np.ndarray
    mode: str

    @property
    def r0(self) -> float:
        return float(self.values[self.lags == 0][0].real)


@dataclass
class Target:
    range_m: float
    amplitude: complex = 1.0


@dataclass
class RangeScene:
    targets: list
    snr_dB: float
    pilot: np.ndarray
    B_Hz: float = 20e6

    def __post_init__(self):
        self.pilot = np.asarray(self.pilot, dtype=complex)
        self.targets = [t if isinstance(t, Target) else Target(*np.atleast_1d(t)) for t in self.targets]
        if any(t.range_m < 0 for t in self.targets):
            raise ValueError("target ranges must be nonnegative")

    @property
    def resolution_m(self) -> float:
        return range_resolution(self.B_Hz)


def range_resolution(B_Hz: float) -> float:
    return SPEED_OF_LIGHT / (2.0 * B_Hz)


def time_domain_pilot(F, k: int) -> np.ndarray:
    """Transmitted sequence of user k.

    Unimodular pilots go through the unitary inverse DFT (squared norm stays
    ``tau``); assigned orthonormal pilots are already time-domain columns.
    Raw arrays are treated as unimodular.
    """
    if isinstance(F, PilotMatrix):
        col = F.F[:, k]
        if F.kind is PilotKind.ORTHONORMAL_ASSIGNED:
            return col.copy()
    else:
        col = np.asarray(F)[:, k]
    return np.fft.ifft(col, norm="ortho")


def acf(x, mode: str = "aperiodic") -> AcfProfile:
    """``r_k = sum_n conj(x_n) x_{n+k}`` for lags ``-(N-1) .. N-1``.

    ``mode="periodic"`` takes ``n + k`` modulo N.
    """
    x = np.asarray(x, dtype=complex).ravel()
    N = x.size
    if N < 1:
        raise ValueError("sequence must be non-empty")
    if mode == "aperiodic":
        full = np.correlate(x, x, mode="full")  # full[N-1+k] = sum_n x[n+k] conj(x[n])
    elif mode == "periodic":
        pos = np.fft.ifft(np.abs(np.fft.fft(x)) ** 2)  # pos[k] = sum_n conj(x_n) x_{(n+k) % N}
        full = np.concatenate([pos[1:][::-1].conj(), pos])
    else:
        raise ValueError("mode must be 'aperiodic' or 'periodic'")
    return AcfProfile(np.arange(-(N - 1), N), full, mode)


def sidelobe_profile_dB(pilot_source, n_sequences: int, mode: str = "aperiodic",
                        rng: np.random.Generator | None = None):
    """Average ``|r_k| / r_0`` over sequences and convert to dB.

    ``pilot_source`` is either an array of sequences (rows; the first
    ``n_sequences`` are used) or a callable ``rng -> sequence`` drawn
    ``n_sequences`` times. Returns ``(lags, level_dB)``.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    if callable(pilot_source):
        rng = rng if rng is not None else np.random.default_rng()
        seqs = [pilot_source(rng) for _ in range(n_sequences)]
    else:
        seqs = np.asarray(pilot_source)
        if seqs.shape[0] < n_sequences:
            raise ValueError("not enough sequences supplied")
        seqs = seqs[:n_sequences]
    acc = None
    lags = None
    for x in seqs:
        prof = acf(x, mode)
        norm = np.abs(prof.values) / prof.r0
        acc = norm if acc is None else acc + norm
        lags = prof.lags
    mean = acc / n_sequences
    with np.errstate(divide="ignore"):
        return lags, 20.0 * np.log10(mean)


def fractional_delay(x, delay_samples: float) -> np.ndarray:
    """Circular delay by a possibly fractional number of samples.

    Multiplies the DFT by ``exp(-j 2 pi f d / N)`` with signed integer
    frequency indices, so integer delays are exact circular shifts and
    delays compose additively.
    """
    if not np.isfinite(delay_samples):
        raise ValueError("delay must be finite")
    x = np.asarray(x, dtype=complex)
    N = x.size
    f = np.fft.fftfreq(N) * N
    return np.fft.ifft(np.fft.fft(x) * np.exp(-2j * np.pi * f * delay_samples / N))


@dataclass
class RangeProfile:
    range_m: np.ndarray
    magnitude_dB: np.ndarray
    raw: np.ndarray = field(repr=False, default=None)

    def peaks(self, n: int = 2, method: str = "bins") -> np.ndarray:
        """Ranges of the ``n`` strongest responses, ascending.

        ``"bins"`` ranks every range bin by magnitude; ``"local"`` only ranks
        circular local maxima. Targets closer than about two bins share one
        lobe at rate B, so only ``"bins"`` can report both of them.
        """
        m = np.abs(self.raw)
        if method == "bins":
            idx = np.argsort(m)[::-1][:n]
        elif method == "local":
            idx = np.flatnonzero((m >= np.roll(m, 1)) & (m > np.roll(m, -1)))
            idx = idx[np.argsort(m[idx])[::-1][:n]]
        else:
            raise ValueError("method must be 'bins' or 'local'")
        return np.sort(self.range_m[idx])


def range_profile(scene: RangeScene, rng: np.random.Generator) -> RangeProfile:
    """Monostatic echo synthesis followed by circular matched filtering.

    Each target contributes ``amplitude * pilot`` delayed by ``2 R / c``
    (in samples at rate B). Noise is complex Gaussian with power set by
    ``snr_dB`` relative to the mean pilot power per sample. Range bin m sits
    at ``m * c / (2 B)``; the magnitude is normalized to its peak.
    """
    p = scene.pilot
    N = p.size
    if N < 2:
        raise ValueError("pilot must have at least two samples")
    delta = scene.resolution_m
    y = np.zeros(N, dtype=complex)
    for t in scene.targets:
        if t.range_m >= N * delta:
            raise ValueError(f"target at {t.range_m} m is outside the unambiguous window {N * delta} m")
        y += t.amplitude * fractional_delay(p, t.range_m / delta)
    noise_var = np.mean(np.abs(p) ** 2) / 10.0 ** (scene.snr_dB / 10.0)
    y += np.sqrt(noise_var / 2.0) * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    # z[m] = sum_n conj(p_n) y_{(n+m) % N}
    z = np.fft.ifft(np.conj(np.fft.fft(p)) * np.fft.fft(y))
    mag = np.abs(z)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / mag.max())
    return RangeProfile(np.arange(N) * delta, db, z)
