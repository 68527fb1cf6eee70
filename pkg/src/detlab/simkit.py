"""Monte Carlo BER/PER engine, analytic reference curves, curve utilities.

A sweep is split into fixed-size batches.  Batch ``j`` of SNR point ``i``
draws everything from ``default_rng([seed, i, j])`` and batches are reduced
in index order, stopping at the first batch that reaches the error target.
The result therefore depends only on the spec, never on the worker count.
"""

import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import modem
from .channel import add_awgn, draw_flat, draw_tapped, exponential_profile, snr_to_noise_var
from .detect import check_detector, make_detector, stbc_decode, stbc_encode
from .errors import ConfigError, TargetNotBracketed
from .ofdm import OfdmParams, channel_to_subcarriers, ofdm_receive, transmit_grid

MODES = ("fast_fading_ber", "quasi_static_per")
CHANNELS = ("flat", "ofdm_tapped")
CSV_HEADER = "snr_db,trials,bits,bit_errors,packet_errors,ber,per,ber_ci95"

CONVENTIONS = {
    "snr_definition": "average Es/N0 per receive antenna; total transmit energy 1 split over m_tx",
    "noise_variance": "10^(-snr_db/10)",
    "channel_power": "unit average power per link (taps sum to 1)",
    "csi": "perfect channel knowledge at the receiver",
    "fast_fading_ber": "channel redrawn every vector symbol (every OFDM symbol on ofdm_tapped)",
    "quasi_static_per": "channel fixed within a packet, independent across packets",
    "per_definition": "packet errored if any payload bit is wrong",
    "ofdm_subcarriers": "all n_fft subcarriers carry data, no pilots or guards, unitary DFT",
    "stopping_rule": "bit errors (ber mode) or packet errors (per mode) >= target_errors, or max_trials",
}

# trials per batch when the spec leaves batch_size at 0
_DEFAULT_BATCH = {
    ("fast_fading_ber", "flat"): 20000,
    ("fast_fading_ber", "ofdm_tapped"): 200,
    ("quasi_static_per", "flat"): 50,
    ("quasi_static_per", "ofdm_tapped"): 20,
}


@dataclass(frozen=True)
class SweepSpec:
    detector: str
    m_tx: int
    n_rx: int
    snr_points_db: tuple
    constellation: str = "bpsk"
    max_trials: int = 1_000_000
    target_errors: int = 100
    mode: str = "fast_fading_ber"
    channel: str = "flat"
    seed: int = 0
    tau_rms_ns: float = 50.0
    n_fft: int = 64
    cp_len: int = 16
    payload_bits: int = 1000
    batch_size: int = 0

    def __post_init__(self):
        object.__setattr__(self, "snr_points_db", tuple(float(s) for s in self.snr_points_db))
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.channel not in CHANNELS:
            raise ConfigError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        if self.constellation not in modem.NAMES:
            raise ConfigError(f"unknown constellation {self.constellation!r}")
        check_detector(self.detector, self.m_tx, self.n_rx, modem.get_constellation(self.constellation))
        if not self.snr_points_db:
            raise ConfigError("snr_points_db is empty")
        if self.max_trials < 1 or self.target_errors < 1 or self.payload_bits < 1:
            raise ConfigError("max_trials, target_errors and payload_bits must be >= 1")
        if self.batch_size < 0:
            raise ConfigError("batch_size must be >= 0")
        if self.channel == "ofdm_tapped":
            if self.detector == "stbc":
                raise ConfigError("stbc is only simulated on flat channels")
            try:
                params = self.ofdm_params
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if self.profile.n_taps > params.cp_len + 1:
                raise ConfigError(
                    f"tau_rms_ns={self.tau_rms_ns} needs {self.profile.n_taps} taps, "
                    f"more than cp_len + 1 = {params.cp_len + 1}"
                )

    @property
    def ofdm_params(self):
        return OfdmParams(self.n_fft, self.cp_len)

    @property
    def profile(self):
        return exponential_profile(self.tau_rms_ns * 1e-9)

    @property
    def batch(self):
        return self.batch_size or _DEFAULT_BATCH[(self.mode, self.channel)]

    @property
    def symbols_per_trial(self):
        """Vector symbols (flat) or OFDM symbols (ofdm_tapped) per trial."""
        k = modem.get_constellation(self.constellation).bits_per_symbol
        if self.mode == "fast_fading_ber":
            return 2 if self.detector == "stbc" and self.channel == "flat" else 1
        if self.channel == "flat":
            n = math.ceil(self.payload_bits / k)
            return n + (n % 2) if self.detector == "stbc" else n
        return math.ceil(self.payload_bits / (k * self.n_fft))


@dataclass
class SnrPoint:
    snr_db: float
    trials: int = 0
    bits: int = 0
    bit_errors: int = 0
    packet_errors: int = 0
    err_sq: float = 0.0  # sum over trials of (bit errors in trial)^2

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def per(self):
        return self.packet_errors / self.trials if self.trials else 0.0

    @property
    def ber_se(self):
        """Binomial standard error of the BER estimate."""
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits) if self.bits else 0.0

    @property
    def ber_ci95(self):
        return 1.96 * self.ber_se

    @property
    def ber_se_clustered(self):
        """Standard error treating each trial (not each bit) as independent.

        Bits sharing one channel draw are correlated; this is the honest
        error bar when a trial carries many bits.
        """
        if self.trials < 2 or not self.bits:
            return self.ber_se
        per_trial = self.bits / self.trials
        mean = self.bit_errors / self.trials
        var = max(self.err_sq / self.trials - mean**2, 0.0) * self.trials / (self.trials - 1)
        return math.sqrt(var / self.trials) / per_trial

    def add(self, counts):
        self.trials += counts[0]
        self.bits += counts[1]
        self.bit_errors += counts[2]
        self.packet_errors += counts[3]
        self.err_sq += counts[4]

    def csv_row(self):
        vals = (self.snr_db, self.trials, self.bits, self.bit_errors, self.packet_errors,
                self.ber, self.per, self.ber_ci95)
        return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in vals)


@dataclass
class SweepResult:
    points: list
    spec: SweepSpec = None
    extra: dict = field(default_factory=dict)

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self):
        return np.array([p.ber for p in self.points])

    @property
    def per(self):
        return np.array([p.per for p in self.points])

    @property
    def ber_ci95(self):
        return np.array([p.ber_ci95 for p in self.points])

    def to_csv(self):
        return "".join(line + "\n" for line in [CSV_HEADER] + [p.csv_row() for p in self.points])

    def write_csv(self, path):
        write_atomic(path, self.to_csv())

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != CSV_HEADER:
            raise ValueError(f"expected CSV header {CSV_HEADER!r}")
        points = []
        for ln in lines[1:]:
            f = ln.split(",")
            if len(f) != 8:
                raise ValueError(f"bad CSV row {ln!r}")
            points.append(SnrPoint(float(f[0]), int(f[1]), int(f[2]), int(f[3]), int(f[4])))
        return cls(points)

    @classmethod
    def read_csv(cls, path):
        with open(path) as fh:
            return cls.from_csv(fh.read())


def write_atomic(path, text):
    """Write ``text`` via a temp file in the same directory plus rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- trial simulation --------------------------------------------------------

def _count(bits, bits_hat):
    err = np.sum(bits != bits_hat, axis=tuple(range(1, bits.ndim)))
    return err


def _simulate_flat(spec, c, noise_var, n_trials, n_vec, rng):
    m, n, k = spec.m_tx, spec.n_rx, c.bits_per_symbol
    h = draw_flat(m, n, rng, batch=n_trials).h
    snr = np.inf if noise_var == 0 else 1.0 / noise_var
    if spec.detector == "stbc":
        bits = modem.random_bits(rng, (n_trials, n_vec // 2, 2 * k))
        s = modem.modulate(bits, c)
        he = h[:, None] / np.sqrt(2.0)
        y = add_awgn(he @ stbc_encode(s[..., 0], s[..., 1]).s, noise_var, rng)
        s1, s2 = stbc_decode(y, he, c)
        bits_hat = modem.demodulate(np.stack([s1, s2], axis=-1), c)
        return _count(bits, bits_hat)
    bits = modem.random_bits(rng, (n_trials, n_vec, m * k))
    x = modem.modulate(bits, c)
    he = h / np.sqrt(m)
    y = add_awgn(np.einsum("tij,tvj->tvi", he, x), noise_var, rng)
    x_hat = make_detector(spec.detector, c, snr)(y, he[:, None])
    return _count(bits, modem.demodulate(x_hat, c))


def _simulate_ofdm(spec, c, noise_var, n_trials, n_sym, rng):
    m, n, k = spec.m_tx, spec.n_rx, c.bits_per_symbol
    params = spec.ofdm_params
    ch = draw_tapped(m, n, spec.profile, rng, batch=n_trials).scaled(1.0 / np.sqrt(m))
    bits = modem.random_bits(rng, (n_trials, n_sym * params.n_fft * m * k))
    grid = modem.modulate(bits, c).reshape(n_trials, n_sym, params.n_fft, m)
    rx = add_awgn(ch.apply(transmit_grid(grid, params)), noise_var, rng)
    snr = np.inf if noise_var == 0 else 1.0 / noise_var
    det = make_detector(spec.detector, c, snr)
    bits_hat = ofdm_receive(rx, channel_to_subcarriers(ch, params), det, params, c)
    return _count(bits, bits_hat)


def run_batch(spec, snr_index, batch_index):
    """Simulate one batch; returns (trials, bits, bit_errors, packet_errors, err_sq)."""
    n_trials = min(spec.batch, spec.max_trials - batch_index * spec.batch)
    rng = np.random.default_rng([spec.seed, snr_index, batch_index])
    c = modem.get_constellation(spec.constellation)
    noise_var = snr_to_noise_var(spec.snr_points_db[snr_index], spec.m_tx)
    n_sym = spec.symbols_per_trial
    if spec.channel == "flat":
        err = _simulate_flat(spec, c, noise_var, n_trials, n_sym, rng)
        bits_per_trial = n_sym * (c.bits_per_symbol if spec.detector == "stbc" else spec.m_tx * c.bits_per_symbol)
    else:
        err = _simulate_ofdm(spec, c, noise_var, n_trials, n_sym, rng)
        bits_per_trial = n_sym * spec.n_fft * spec.m_tx * c.bits_per_symbol
    err = err.astype(np.int64)
    return (n_trials, n_trials * bits_per_trial, int(err.sum()),
            int(np.count_nonzero(err)), float(np.sum(err.astype(float) ** 2)))


def _run_point(spec, snr_index, pool, workers):
    point = SnrPoint(spec.snr_points_db[snr_index])
    n_batches = math.ceil(spec.max_trials / spec.batch)
    per_mode = spec.mode == "quasi_static_per"
    j = 0
    while j < n_batches:
        idx = range(j, min(j + workers, n_batches))
        if pool is None:
            results = (run_batch(spec, snr_index, b) for b in idx)
        else:
            results = pool.map(run_batch, [spec] * len(idx), [snr_index] * len(idx), idx)
        for counts in results:
            point.add(counts)
            errors = point.packet_errors if per_mode else point.bit_errors
            if errors >= spec.target_errors:
                return point
        j += len(idx)
    return point


def run_sweep(spec, workers=1):
    workers = max(1, int(workers))
    if workers == 1:
        return SweepResult([_run_point(spec, i, None, 1) for i in range(len(spec.snr_points_db))], spec)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        points = [_run_point(spec, i, pool, workers) for i in range(len(spec.snr_points_db))]
    return SweepResult(points, spec)


def run_ber_sweep(spec, workers=1):
    """BER versus SNR; stops each point at ``target_errors`` bit errors."""
    if spec.mode != "fast_fading_ber":
        return run_per_sweep(spec, workers)
    return run_sweep(spec, workers)


def run_per_sweep(spec, workers=1):
    """PER versus SNR with a quasi-static channel per packet.

    Each point stops at ``target_errors`` packet errors.
    """
    if spec.mode != "quasi_static_per":
        raise ConfigError("run_per_sweep needs mode = quasi_static_per")
    return run_sweep(spec, workers)


# -- analytic references -----------------------------------------------------

def _two_branch(ebn0_db, scale):
    g = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    with np.errstate(divide="ignore"):
        p = 0.5 - 0.5 * (1.0 + scale / g) ** -0.5
    pe = p**2 * (1.0 + 2.0 * (1.0 - p))
    return float(pe) if np.ndim(pe) == 0 else pe


def analytic_ber_mrc(ebn0_db):
    """BPSK BER of two-branch MRC in Rayleigh fading."""
    return _two_branch(ebn0_db, 1.0)


def analytic_ber_stbc(ebn0_db):
    """BPSK BER of 2x1 Alamouti with the transmit power split over both antennas."""
    return _two_branch(ebn0_db, 2.0)


def ebn0_to_snr_db(ebn0_db, constellation):
    k = modem.get_constellation(constellation).bits_per_symbol
    return ebn0_db + 10.0 * math.log10(k)


# -- curve utilities ---------------------------------------------------------

def _curve(result):
    if isinstance(result, SweepResult):
        return result.snr_db, result.ber
    snr, ber = result
    return np.asarray(snr, dtype=float), np.asarray(ber, dtype=float)


def snr_at_ber(result, ber_target):
    """SNR where the curve first crosses ``ber_target`` (log-BER interpolation)."""
    snr, ber = _curve(result)
    keep = ber > 0
    snr, ber = snr[keep], ber[keep]
    for i in range(len(ber) - 1):
        hi, lo = ber[i], ber[i + 1]
        if hi >= ber_target >= lo:
            if hi == lo:
                return float(snr[i])
            t = (math.log10(hi) - math.log10(ber_target)) / (math.log10(hi) - math.log10(lo))
            return float(snr[i] + t * (snr[i + 1] - snr[i]))
    raise TargetNotBracketed(f"BER {ber_target:g} not bracketed by the curve")


def snr_gap_at_ber(result_a, result_b, ber_target):
    """``snr_a - snr_b`` in dB at ``ber_target``; positive means ``b`` is better."""
    return snr_at_ber(result_a, ber_target) - snr_at_ber(result_b, ber_target)


def diversity_order(result, lo_db, hi_db):
    """Negative log-log slope of BER versus linear SNR over ``[lo_db, hi_db]``."""
    snr, ber = _curve(result)
    keep = (snr >= lo_db) & (snr <= hi_db) & (ber > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two non-zero BER points in range")
    slope = np.polyfit(snr[keep] / 10.0, np.log10(ber[keep]), 1)[0]
    return float(-slope)
