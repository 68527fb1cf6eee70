import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detlab import modem
from detlab.channel import TappedChannel, add_awgn, draw_tapped, exponential_profile
from detlab.detect import DETECTOR_NAMES, detect_ml, make_detector
from detlab.errors import CpTooShort, LengthMismatch
from detlab.ofdm import (
    OfdmParams, Packet, add_cp, channel_to_subcarriers, dft, idft, ofdm_receive,
    ofdm_transmit, receive_grid, remove_cp, training_grid, transmit_grid,
)
from detlab.simkit import SweepSpec, run_per_sweep

from conftest import crandn

P = OfdmParams()


def test_defaults():
    assert (P.n_fft, P.cp_len, P.symbol_len) == (64, 16, 80)
    assert P.cp_duration == pytest.approx(640e-9)


def test_add_cp_example():
    np.testing.assert_array_equal(add_cp(np.array([1, 2, 3, 4]), 2), [3, 4, 1, 2, 3, 4])


@given(st.integers(0, 2**32 - 1), st.integers(0, 15))
def test_cp_round_trip(seed, cp):
    x = crandn(np.random.default_rng(seed), 3, 16)
    np.testing.assert_array_equal(remove_cp(add_cp(x, cp), cp), x)


@given(st.integers(0, 2**32 - 1))
def test_dft_round_trip_and_parseval(seed):
    x = crandn(np.random.default_rng(seed), 4, 64)
    np.testing.assert_allclose(idft(dft(x)), x, atol=1e-12)
    np.testing.assert_allclose(np.sum(np.abs(dft(x)) ** 2, -1), np.sum(np.abs(x) ** 2, -1), rtol=1e-12)


def _tapped(taps):
    taps = np.asarray(taps, dtype=complex)
    return TappedChannel(taps, exponential_profile(0.0))


def test_single_tap_is_flat(rng):
    h = crandn(rng, 1, 2, 2)
    hk = channel_to_subcarriers(_tapped(h), P).h
    assert hk.shape == (64, 2, 2)
    np.testing.assert_allclose(hk, np.broadcast_to(h[0], hk.shape), atol=1e-15)


def test_two_equal_taps_null_at_half_band():
    hk = channel_to_subcarriers(_tapped(np.ones((2, 1, 1))), P).h[:, 0, 0]
    assert abs(hk[32]) < 1e-12
    assert hk[0] == pytest.approx(2.0)


def test_cp_too_short(rng):
    with pytest.raises(CpTooShort):
        channel_to_subcarriers(_tapped(crandn(rng, 18, 1, 1)), P)
    channel_to_subcarriers(_tapped(crandn(rng, 17, 1, 1)), P)  # L - 1 == cp is fine


@pytest.mark.parametrize("n_taps", [1, 5, 17])
def test_subcarrier_model_matches_time_domain(rng, n_taps):
    m, n, n_sym = 2, 3, 4
    ch = _tapped(crandn(rng, n_taps, n, m))
    grid = crandn(rng, n_sym, 64, m)
    y = receive_grid(ch.apply(transmit_grid(grid, P)), P)
    hk = channel_to_subcarriers(ch, P).h
    expected = np.einsum("kij,skj->ski", hk, grid)
    np.testing.assert_allclose(y, expected, atol=1e-9)


def test_time_domain_energy(rng):
    grid = crandn(rng, 3, 64, 2)
    tx = transmit_grid(grid, P)
    assert tx.shape == (2, 3 * 80)
    body = remove_cp(tx.reshape(2, 3, 80), 16)
    assert np.sum(np.abs(body) ** 2) == pytest.approx(np.sum(np.abs(grid) ** 2))


# sic-mrc-first leaves the other streams uncancelled in its first decision, so
# it is interference-limited even without noise; see the floor test below
@pytest.mark.parametrize("name", [d for d in DETECTOR_NAMES if d not in ("stbc", "mrc", "sic-mrc-first")])
def test_noise_free_recovery(name):
    rng = np.random.default_rng(2)
    c = modem.get_constellation("qpsk")
    m, n = 2, 2
    prof = exponential_profile(50e-9)
    bits = modem.random_bits(rng, (100, 2 * 64 * m * c.bits_per_symbol))
    ch = draw_tapped(m, n, prof, rng, batch=100).scaled(1 / np.sqrt(m))
    tx = ofdm_transmit(Packet(bits, m, n_train=1), c, P, m)
    hk = channel_to_subcarriers(ch, P)
    got = ofdm_receive(ch.apply(tx), hk, make_detector(name, c, np.inf), P, c, n_train=1)
    np.testing.assert_array_equal(got, bits)


def test_mrc_first_has_interference_floor():
    rng = np.random.default_rng(2)
    c = modem.get_constellation("qpsk")
    bits = modem.random_bits(rng, (100, 2 * 64 * 4))
    ch = draw_tapped(2, 2, exponential_profile(50e-9), rng, batch=100).scaled(1 / np.sqrt(2))
    tx = ofdm_transmit(Packet(bits, 2), c, P, 2)
    got = ofdm_receive(ch.apply(tx), channel_to_subcarriers(ch, P), make_detector("sic-mrc-first", c, np.inf), P, c)
    assert 0 < np.mean(got != bits) < 0.1


def test_noise_free_mrc_single_stream():
    rng = np.random.default_rng(4)
    c = modem.get_constellation("qam16")
    bits = modem.random_bits(rng, (20, 64 * 4))
    ch = draw_tapped(1, 3, exponential_profile(50e-9), rng, batch=20)
    tx = ofdm_transmit(Packet(bits, 1), c, P, 1)
    got = ofdm_receive(ch.apply(tx), channel_to_subcarriers(ch, P), make_detector("mrc", c, np.inf), P, c)
    np.testing.assert_array_equal(got, bits)


def test_per_subcarrier_ml_matches_direct(rng):
    c = modem.get_constellation("bpsk")
    ch = draw_tapped(2, 2, exponential_profile(50e-9), rng)
    bits = modem.random_bits(rng, 2 * 64)
    rx = add_awgn(ch.apply(ofdm_transmit(Packet(bits, 2), c, P, 2)), 0.3, rng)
    hk = channel_to_subcarriers(ch, P)
    got = ofdm_receive(rx, hk, make_detector("ml", c, 1 / 0.3), P, c)
    y = receive_grid(rx, P)[0]  # (64, N)
    direct = np.stack([detect_ml(y[k], hk.h[k], c) for k in range(64)])
    np.testing.assert_array_equal(got, modem.demodulate(direct.reshape(-1), c))


def test_training_is_deterministic():
    c = modem.get_constellation("qpsk")
    np.testing.assert_array_equal(training_grid(2, 2, P, c), training_grid(2, 2, P, c))


def test_length_mismatch(rng):
    c = modem.get_constellation("bpsk")
    with pytest.raises(LengthMismatch):
        ofdm_transmit(Packet(modem.random_bits(rng, 100), 2), c, P, 2)
    with pytest.raises(LengthMismatch):
        ofdm_transmit(Packet(modem.random_bits(rng, 128), 1), c, P, 2)
    with pytest.raises(LengthMismatch):
        receive_grid(np.zeros((2, 81)), P)


def test_zero_delay_spread_per_equals_flat():
    kw = dict(detector="mmse", m_tx=2, n_rx=2, snr_points_db=(15.0,), mode="quasi_static_per",
              payload_bits=1024, max_trials=1500, target_errors=10**9)
    flat = run_per_sweep(SweepSpec(channel="flat", seed=1, **kw)).points[0]
    ofdm = run_per_sweep(SweepSpec(channel="ofdm_tapped", tau_rms_ns=0.0, seed=2, **kw)).points[0]
    p = (flat.packet_errors + ofdm.packet_errors) / (flat.trials + ofdm.trials)
    se = np.sqrt(p * (1 - p) * (1 / flat.trials + 1 / ofdm.trials))
    assert 0.05 < p < 0.95
    assert abs(flat.per - ofdm.per) < 4 * se
