"""MIMO-OFDM packet layer.

All subcarriers carry data; there are no pilots or guard bands.  The DFT is
unitary, so noise added in the time domain keeps its variance on every
subcarrier and the flat-fading SNR calibration carries over unchanged.

Serial-to-parallel order: consecutive modulated symbols fill the transmit
antennas first, then subcarriers, then OFDM symbols, i.e. a grid of shape
``(n_symbols, n_fft, M)`` in C order.
"""

from dataclasses import dataclass

import numpy as np

from . import modem
from .channel import SAMPLE_PERIOD, FlatChannel
from .errors import CpTooShort, LengthMismatch

TRAINING_SEED = 0x5EED


@dataclass(frozen=True)
class OfdmParams:
    n_fft: int = 64
    cp_len: int = 16
    sample_period: float = SAMPLE_PERIOD

    def __post_init__(self):
        if self.n_fft < 1 or not 0 <= self.cp_len < self.n_fft:
            raise ValueError(f"need 0 <= cp_len < n_fft, got {self.cp_len}, {self.n_fft}")

    @property
    def symbol_len(self):
        return self.n_fft + self.cp_len

    @property
    def cp_duration(self):
        return self.cp_len * self.sample_period


@dataclass(frozen=True, eq=False)
class Packet:
    payload_bits: np.ndarray
    streams: int
    n_train: int = 0  # known training OFDM symbols prepended to the payload


def dft(x):
    return np.fft.fft(x, axis=-1, norm="ortho")


def idft(x):
    return np.fft.ifft(x, axis=-1, norm="ortho")


def add_cp(sym, cp_len):
    """Prepend the last ``cp_len`` samples (last axis)."""
    sym = np.asarray(sym)
    if not 0 <= cp_len < sym.shape[-1]:
        raise ValueError("cp_len must be smaller than the symbol length")
    if cp_len == 0:
        return sym.copy()
    return np.concatenate([sym[..., -cp_len:], sym], axis=-1)


def remove_cp(sym, cp_len):
    return np.asarray(sym)[..., cp_len:]


def channel_to_subcarriers(ch, params):
    """Per-subcarrier flat channels ``H_k = sum_l taps[l] exp(-2 pi i k l / n_fft)``.

    Returns a FlatChannel whose ``h`` has shape ``(..., n_fft, N, M)``.
    """
    n_taps = ch.n_taps
    if n_taps > params.cp_len + 1:
        raise CpTooShort(f"{n_taps} taps need cp_len >= {n_taps - 1}, have {params.cp_len}")
    k = np.arange(params.n_fft)[:, None]
    l = np.arange(n_taps)[None, :]
    phase = np.exp(-2j * np.pi * k * l / params.n_fft)
    return FlatChannel(np.einsum("kl,...lij->...kij", phase, ch.taps))


def transmit_grid(grid, params):
    """Frequency grid ``(..., n_sym, n_fft, M)`` -> samples ``(..., M, n_sym * symbol_len)``."""
    grid = np.asarray(grid)
    per_antenna = np.moveaxis(grid, -1, -3)  # (..., M, n_sym, n_fft)
    time = add_cp(idft(per_antenna), params.cp_len)
    return time.reshape(time.shape[:-2] + (-1,))


def receive_grid(samples, params):
    """Samples ``(..., N, T)`` -> frequency observations ``(..., n_sym, n_fft, N)``."""
    samples = np.asarray(samples)
    if samples.shape[-1] % params.symbol_len:
        raise LengthMismatch(f"{samples.shape[-1]} samples is not a whole number of OFDM symbols")
    blocks = samples.reshape(samples.shape[:-1] + (-1, params.symbol_len))
    freq = dft(remove_cp(blocks, params.cp_len))
    return np.moveaxis(freq, -3, -1)


def training_grid(n_train, m_tx, params, c):
    """Known training symbols, identical at transmitter and receiver."""
    rng = np.random.default_rng(TRAINING_SEED)
    idx = rng.integers(0, c.size, size=(n_train, params.n_fft, m_tx))
    return c.points[idx]


def ofdm_transmit(packet, c, params, m_tx):
    """Modulate, map onto the grid, IDFT and add a CP to every OFDM symbol."""
    bits = np.asarray(packet.payload_bits)
    chunk = c.bits_per_symbol * m_tx * params.n_fft
    if packet.streams != m_tx:
        raise LengthMismatch(f"packet has {packet.streams} streams, link has {m_tx}")
    if bits.shape[-1] == 0 or bits.shape[-1] % chunk:
        raise LengthMismatch(f"payload of {bits.shape[-1]} bits is not a multiple of {chunk}")
    grid = modem.modulate(bits, c).reshape(bits.shape[:-1] + (-1, params.n_fft, m_tx))
    if packet.n_train:
        train = training_grid(packet.n_train, m_tx, params, c)
        train = np.broadcast_to(train, grid.shape[:-3] + train.shape)
        grid = np.concatenate([train, grid], axis=-3)
    return transmit_grid(grid, params)


def ofdm_receive(samples, ch_sub, detector, params, c, n_train=0):
    """Strip CP, DFT, detect each subcarrier independently, demodulate.

    ``detector`` is any ``detect(y, h) -> x_hat`` callable (see
    :func:`detlab.detect.make_detector`); ``ch_sub`` comes from
    :func:`channel_to_subcarriers` and is held fixed across the packet.
    """
    y = receive_grid(samples, params)[..., n_train:, :, :]
    h = np.asarray(ch_sub.h)[..., None, :, :, :]
    x_hat = detector(y, h)
    return modem.demodulate(x_hat.reshape(x_hat.shape[:-3] + (-1,)), c)
