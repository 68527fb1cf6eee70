import math
import os

import numpy as np
import pytest

from detlab.errors import ConfigError, TargetNotBracketed
from detlab.simkit import (
    CSV_HEADER, SnrPoint, SweepResult, SweepSpec, analytic_ber_mrc, analytic_ber_stbc,
    diversity_order, ebn0_to_snr_db, run_ber_sweep, run_per_sweep, snr_at_ber, snr_gap_at_ber,
    write_atomic,
)


def q(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def test_analytic_examples():
    assert analytic_ber_mrc(0.0) == pytest.approx(0.05806, abs=1e-5)
    assert analytic_ber_stbc(0.0) == pytest.approx(0.1151, abs=1e-4)
    assert analytic_ber_mrc(-200.0) == pytest.approx(0.5, abs=1e-9)
    assert analytic_ber_mrc(200.0) < 1e-30
    grid = np.linspace(-10, 40, 51)
    assert np.all(analytic_ber_stbc(grid) >= analytic_ber_mrc(grid))
    # 3 dB transmit-power penalty, exactly
    np.testing.assert_allclose(analytic_ber_stbc(grid + 10 * np.log10(2)), analytic_ber_mrc(grid), rtol=1e-12)


def test_ebn0_conversion():
    assert ebn0_to_snr_db(5.0, "bpsk") == 5.0
    assert ebn0_to_snr_db(5.0, "qpsk") == pytest.approx(5 + 10 * np.log10(2))


def test_snr_at_ber_interpolates_in_log():
    assert snr_at_ber(([0.0, 10.0], [1e-1, 1e-3]), 1e-2) == pytest.approx(5.0)
    with pytest.raises(TargetNotBracketed):
        snr_at_ber(([0.0, 10.0], [1e-1, 1e-2]), 1e-4)
    with pytest.raises(TargetNotBracketed):
        snr_at_ber(([0.0, 10.0], [1e-1, 0.0]), 1e-3)


def test_snr_gap_examples():
    snr = np.arange(0, 31, 2.0)
    ber = 0.5 * 10 ** (-snr / 10)
    assert snr_gap_at_ber((snr, ber), (snr, ber), 1e-3) == 0.0
    shifted = 0.5 * 10 ** (-(snr - 3.0) / 10)
    assert snr_gap_at_ber((snr, shifted), (snr, ber), 1e-3) == pytest.approx(3.0, abs=0.1)


def test_diversity_order_synthetic():
    snr = np.arange(0, 41, 5.0)
    assert diversity_order((snr, 10 ** (-2 * snr / 10)), 10, 30) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        diversity_order((snr, np.zeros_like(snr)), 10, 30)


def test_noiseless_and_noise_only():
    spec = SweepSpec("mmse", 2, 2, (math.inf, -40.0), max_trials=20000, target_errors=10**9)
    res = run_ber_sweep(spec)
    assert res.points[0].bit_errors == 0 and res.points[0].bits == 40000
    assert res.ber[1] == pytest.approx(0.5, abs=0.02)


def test_mrc_matches_analytic():
    pt = run_ber_sweep(SweepSpec("mrc", 1, 2, (5.0,), max_trials=10**6, target_errors=2000, seed=4)).points[0]
    assert pt.bit_errors >= 2000
    assert abs(pt.ber - analytic_ber_mrc(5.0)) < 3 * pt.ber_se


def test_ci_covers_truth():
    truth = 0.5 * (1 - math.sqrt(10 / 11))  # 1x1 BPSK Rayleigh at 10 dB
    hits = 0
    for seed in range(30):
        spec = SweepSpec("mrc", 1, 1, (10.0,), max_trials=20000, target_errors=10**9, seed=seed)
        pt = run_ber_sweep(spec).points[0]
        hits += abs(pt.ber - truth) <= pt.ber_ci95
    assert hits >= 24


def test_reproducible_and_worker_independent():
    spec = SweepSpec("zf-sic-ordered", 2, 2, (0.0, 6.0, 12.0), max_trials=40000,
                     target_errors=300, batch_size=1000, seed=11)
    a = run_ber_sweep(spec).to_csv()
    assert run_ber_sweep(spec).to_csv() == a
    assert run_ber_sweep(spec, workers=3).to_csv() == a
    other = SweepSpec("zf-sic-ordered", 2, 2, (0.0, 6.0, 12.0), max_trials=40000,
                      target_errors=300, batch_size=1000, seed=12)
    assert run_ber_sweep(other).to_csv() != a


def test_ber_decreases_with_snr():
    spec = SweepSpec("mmse", 2, 2, tuple(range(0, 25, 4)), max_trials=10**6, target_errors=1000, seed=3)
    res = run_ber_sweep(spec)
    assert np.all(np.diff(res.ber) < 0)


def test_target_errors_stops_early():
    spec = SweepSpec("zf", 2, 2, (0.0,), max_trials=10**6, target_errors=50, batch_size=100)
    pt = run_ber_sweep(spec).points[0]
    assert 50 <= pt.bit_errors and pt.trials < 10**6


def test_per_siso_matches_block_identity():
    snr_db, payload = 20.0, 200
    snr = 10 ** (snr_db / 10)
    # PER = E_g[1 - (1 - Q(sqrt(2 g snr)))^B], g ~ Exp(1)
    g = np.linspace(0, 40, 400001)
    cond = np.array([q(math.sqrt(2 * gi * snr)) for gi in g[:4000]] + [0.0] * (g.size - 4000))
    f = (1 - (1 - cond) ** payload) * np.exp(-g)
    oracle = float(np.sum((f[1:] + f[:-1]) / 2 * np.diff(g)))
    spec = SweepSpec("zf", 1, 1, (snr_db,), mode="quasi_static_per", payload_bits=payload,
                     max_trials=6000, target_errors=10**9, seed=8)
    pt = run_per_sweep(spec).points[0]
    se = math.sqrt(oracle * (1 - oracle) / pt.trials)
    assert abs(pt.per - oracle) < 4 * se


def test_per_sic_not_worse_than_mmse():
    kw = dict(m_tx=2, n_rx=2, snr_points_db=(10.0, 20.0), mode="quasi_static_per",
              max_trials=2000, target_errors=10**9, seed=5)
    sic = run_per_sweep(SweepSpec("mmse-sic-ordered", **kw))
    lin = run_per_sweep(SweepSpec("mmse", **kw))
    assert np.all(sic.per <= lin.per)


def test_ber_sweep_delegates_to_per_mode():
    spec = SweepSpec("zf", 1, 1, (10.0,), mode="quasi_static_per", max_trials=100, target_errors=5)
    assert run_ber_sweep(spec).points[0].packet_errors >= 5
    with pytest.raises(ConfigError):
        run_per_sweep(SweepSpec("zf", 1, 1, (10.0,)))


@pytest.mark.parametrize("kw", [
    dict(detector="mrc", m_tx=2),
    dict(detector="stbc", m_tx=1),
    dict(detector="zf", m_tx=3, n_rx=2),
    dict(detector="nope"),
    dict(detector="stbc", channel="ofdm_tapped"),
    dict(channel="ofdm_tapped", tau_rms_ns=500.0),
    dict(mode="slow"),
    dict(channel="wideband"),
    dict(constellation="qam64"),
    dict(snr_points_db=()),
    dict(max_trials=0),
    dict(detector="ml", m_tx=5, n_rx=5, constellation="qam16"),
])
def test_illegal_specs(kw):
    base = dict(detector="mmse", m_tx=2, n_rx=2, snr_points_db=(0.0,))
    base.update(kw)
    with pytest.raises(ConfigError):
        SweepSpec(**base)


def test_ofdm_payload_rounds_to_whole_symbols():
    spec = SweepSpec("mmse", 2, 2, (0.0,), mode="quasi_static_per", channel="ofdm_tapped")
    assert spec.symbols_per_trial == 16
    assert spec.profile.n_taps == 9


def test_csv_round_trip(tmp_path):
    pts = [SnrPoint(0.0, 10, 200, 17, 3), SnrPoint(2.5, 10, 200, 0, 0)]
    res = SweepResult(pts)
    text = res.to_csv()
    assert text.splitlines()[0] == CSV_HEADER
    assert text.splitlines()[1] == "0.0,10,200,17,3,0.085,0.3," + repr(1.96 * math.sqrt(0.085 * 0.915 / 200))
    path = tmp_path / "r.csv"
    res.write_csv(path)
    back = SweepResult.read_csv(path)
    assert back.to_csv() == text
    with pytest.raises(ValueError):
        SweepResult.from_csv("a,b\n")


def test_write_atomic_leaves_no_temp(tmp_path):
    target = tmp_path / "out.txt"
    write_atomic(target, "one\n")
    write_atomic(target, "two\n")
    assert target.read_text() == "two\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_clustered_se_for_single_bit_trials():
    pt = SnrPoint(0.0, 10000, 10000, 1000, 0, err_sq=1000.0)
    assert pt.ber_se_clustered == pytest.approx(pt.ber_se, rel=1e-3)
