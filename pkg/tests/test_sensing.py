import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfisac import pilots, sensing


def test_time_domain_pilot_examples():
    imp = sensing.time_domain_pilot(np.ones((4, 1)), 0)
    assert np.allclose(imp, [2, 0, 0, 0])
    rng = np.random.default_rng(0)
    F = np.exp(2j * np.pi * rng.random((6, 5)))
    T = np.stack([sensing.time_domain_pilot(F, k) for k in range(5)], axis=1)
    assert np.allclose(np.sum(np.abs(T) ** 2, axis=0), 6, atol=1e-10)
    assert np.allclose(np.abs(T.conj().T @ T), np.abs(F.conj().T @ F), atol=1e-10)
    basis = pilots.make_basis(4, rng=rng)
    assigned = pilots.from_assignment(basis, [1, 3])
    assert np.allclose(sensing.time_domain_pilot(assigned, 1), basis.B[:, 3])


def test_acf_examples():
    prof = sensing.acf([1, 1, 1, 1])
    assert np.allclose(prof.values[prof.lags >= 0], [4, 3, 2, 1])
    rng = np.random.default_rng(1)
    x = np.fft.ifft(np.exp(2j * np.pi * rng.random(16)), norm="ortho")
    per = sensing.acf(x, "periodic")
    assert np.isclose(per.r0, 16)
    assert np.all(np.abs(per.values[per.lags != 0]) <= 1e-9 * per.r0)
    with pytest.raises(ValueError):
        sensing.acf(x, "cyclic")


def shift_matrix_acf(x, periodic):
    N = len(x)
    out = {}
    for k in range(-(N - 1), N):
        J = np.zeros((N, N))
        for n in range(N):
            m = n + k
            if periodic:
                J[n, m % N] = 1
            elif 0 <= m < N:
                J[n, m] = 1
        out[k] = x.conj() @ J @ x
    return np.array([out[k] for k in range(-(N - 1), N)])


@pytest.mark.parametrize("mode", ["aperiodic", "periodic"])
def test_acf_matches_shift_matrix_definition(mode):
    rng = np.random.default_rng(2)
    x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    assert np.allclose(sensing.acf(x, mode).values, shift_matrix_acf(x, mode == "periodic"), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 20), st.sampled_from(["aperiodic", "periodic"]))
def test_acf_conjugate_symmetry(seed, n, mode):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    prof = sensing.acf(x, mode)
    assert np.allclose(prof.values, prof.values[::-1].conj(), atol=1e-12)
    assert np.isclose(prof.r0, np.sum(np.abs(x) ** 2))
    assert abs(prof.values[prof.lags == 0][0].imag) < 1e-12


def test_sidelobe_profile_basics():
    rng = np.random.default_rng(3)
    seqs = rng.standard_normal((10, 8)) + 1j * rng.standard_normal((10, 8))
    lags, lvl = sensing.sidelobe_profile_dB(seqs, 10)
    assert lvl[lags == 0][0] == 0.0
    assert np.allclose(lvl, lvl[::-1])
    lags2, lvl2 = sensing.sidelobe_profile_dB(lambda r: r.standard_normal(8) + 0j, 5, rng=rng)
    assert lags2.size == 15
    with pytest.raises(ValueError):
        sensing.sidelobe_profile_dB(seqs, 0)


def test_fractional_delay_identities():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    assert np.allclose(sensing.fractional_delay(x, 0), x)
    assert np.allclose(sensing.fractional_delay(x, 1), np.roll(x, 1), atol=1e-10)
    assert np.allclose(sensing.fractional_delay(x, 3), np.roll(x, 3), atol=1e-10)
    half = sensing.fractional_delay(sensing.fractional_delay(x, 0.5), 0.5)
    assert np.allclose(half, np.roll(x, 1), atol=1e-10)
    y = sensing.fractional_delay(x, 0.37)
    assert np.isclose(np.sum(np.abs(y) ** 2), np.sum(np.abs(x) ** 2), rtol=1e-10)
    with pytest.raises(ValueError):
        sensing.fractional_delay(x, np.nan)


def flat_pilot(n, seed=0):
    return np.fft.ifft(np.exp(2j * np.pi * np.random.default_rng(seed).random(n)), norm="ortho")


def test_range_profile_single_target_and_resolution():
    scene = sensing.RangeScene([0.0], 200.0, flat_pilot(16))
    prof = sensing.range_profile(scene, np.random.default_rng(0))
    assert np.argmax(prof.magnitude_dB) == 0
    assert np.isclose(scene.resolution_m, 7.5)
    assert np.isclose(prof.range_m[1], 7.5)


def test_range_profile_integer_delay_peak():
    p = flat_pilot(32)
    for bins in (3, 10):
        scene = sensing.RangeScene([bins * 7.5], 200.0, p)
        prof = sensing.range_profile(scene, np.random.default_rng(1))
        assert np.argmax(prof.magnitude_dB) == bins


def test_range_profile_fractional_peak_against_oversampled_oracle():
    p = flat_pilot(32)
    d = 4.3
    scene = sensing.RangeScene([d * 7.5], 300.0, p)
    prof = sensing.range_profile(scene, np.random.default_rng(2))
    mag = np.abs(prof.raw)
    # dense oracle: matched filter evaluated at fine lags
    fine = np.arange(0, 32, 0.01)
    y = sensing.fractional_delay(p, d)
    dense = np.array([abs(np.vdot(sensing.fractional_delay(p, t), y)) for t in fine])
    assert np.isclose(fine[np.argmax(dense)], d, atol=0.01)
    assert {int(np.floor(d)), int(np.ceil(d))} == set(np.argsort(mag)[-2:])
    assert min(mag[4], mag[5]) <= dense.max() and max(mag[4], mag[5]) <= dense.max() + 1e-9


def test_range_profile_domain_errors():
    with pytest.raises(ValueError):
        sensing.range_profile(sensing.RangeScene([200.0], 20.0, flat_pilot(8)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        sensing.RangeScene([-1.0], 20.0, flat_pilot(8))
    with pytest.raises(ValueError):
        sensing.range_profile(sensing.RangeScene([0.0], 20.0, [1.0]), np.random.default_rng(0))


def test_peak_readings():
    scene = sensing.RangeScene([8.0, 19.0], 20.0, flat_pilot(64))
    prof = sensing.range_profile(scene, np.random.default_rng(3))
    top = prof.peaks(2, method="bins")
    assert np.all(np.abs(top - np.array([8.0, 19.0])) <= 7.5)
    assert prof.peaks(1, method="local")[0] in top
