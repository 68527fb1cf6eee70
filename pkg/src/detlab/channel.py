"""Rayleigh fading channels, AWGN, and exponential-PDP tapped delay lines.

SNR convention used everywhere in the package: the M transmit antennas
share a total symbol energy of 1 (``1/M`` each), channel entries have unit
average power, so ``snr_db`` is the average Es/N0 seen at each receive
antenna and the noise variance is ``10**(-snr_db/10)``.
"""

from dataclasses import dataclass

import numpy as np

SAMPLE_PERIOD = 40e-9
TAIL_POWER = 1e-3


def complex_normal(rng, shape, var=1.0):
    """i.i.d. CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True, eq=False)
class FlatChannel:
    """Flat-fading gains ``h`` of shape ``(..., n_rx, m_tx)``."""

    h: np.ndarray

    @property
    def m_tx(self):
        return self.h.shape[-1]

    @property
    def n_rx(self):
        return self.h.shape[-2]


def draw_flat(m, n, rng, batch=()):
    """Draw ``n x m`` i.i.d. CN(0, 1) channel matrices (optionally a stack)."""
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 and n >= 1")
    batch = (batch,) if isinstance(batch, int) else tuple(batch)
    return FlatChannel(complex_normal(rng, batch + (n, m)))


def add_awgn(y, noise_var, rng):
    """Add CN(0, noise_var) noise to every element of ``y``."""
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    y = np.asarray(y)
    if noise_var == 0:
        return y
    return y + complex_normal(rng, y.shape, noise_var)


def snr_to_noise_var(snr_db, m_tx=1):
    """Noise variance giving per-receive-antenna Es/N0 of ``snr_db``.

    ``m_tx`` is accepted for interface symmetry; with total transmit energy
    normalized to 1 the answer does not depend on it.  ``+inf`` gives 0.
    """
    if m_tx < 1:
        raise ValueError("m_tx must be >= 1")
    return float(10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class DelayProfile:
    tap_spacing: float
    tau_rms: float
    n_taps: int
    tap_powers: tuple

    @property
    def rms_delay(self):
        """rms delay spread actually realized by the discrete taps."""
        p = np.asarray(self.tap_powers)
        t = np.arange(p.size) * self.tap_spacing
        mean = np.sum(p * t)
        return float(np.sqrt(np.sum(p * (t - mean) ** 2)))


def exponential_profile(tau_rms, tap_spacing=SAMPLE_PERIOD, tail=TAIL_POWER):
    """Exponential power delay profile ``p_l ~ exp(-l Ts / tau_rms)``.

    The tap count is the smallest for which the discarded tail carries less
    than ``tail`` of the untruncated power.  ``tau_rms == 0`` is a single tap.
    """
    if tau_rms < 0 or tap_spacing <= 0:
        raise ValueError("need tau_rms >= 0 and tap_spacing > 0")
    if tau_rms == 0:
        return DelayProfile(tap_spacing, 0.0, 1, (1.0,))
    ratio = np.exp(-tap_spacing / tau_rms)
    # tail fraction after L taps is ratio**L
    n_taps = int(np.floor(np.log(tail) / np.log(ratio))) + 1 if ratio > 0 else 1
    p = ratio ** np.arange(n_taps)
    p /= p.sum()
    return DelayProfile(tap_spacing, float(tau_rms), n_taps, tuple(float(x) for x in p))


@dataclass(frozen=True, eq=False)
class TappedChannel:
    """Tap matrices ``taps`` of shape ``(..., L, n_rx, m_tx)``."""

    taps: np.ndarray
    profile: DelayProfile

    @property
    def n_taps(self):
        return self.taps.shape[-3]

    def scaled(self, factor):
        return TappedChannel(self.taps * factor, self.profile)

    def apply(self, x):
        """Linear convolution of transmit streams ``x`` ``(..., M, T)``.

        Returns ``(..., N, T)``; samples before ``t = 0`` are zero and the
        output is truncated to the input length.
        """
        x = np.asarray(x)
        n_samples = x.shape[-1]
        out = np.zeros(x.shape[:-2] + (self.taps.shape[-2], n_samples), dtype=complex)
        for lag in range(min(self.n_taps, n_samples)):
            out[..., lag:] += self.taps[..., lag, :, :] @ x[..., : n_samples - lag]
        return out


def draw_tapped(m, n, profile, rng, batch=()):
    """Draw a tapped channel; tap ``l`` entries are CN(0, tap_powers[l])."""
    batch = (batch,) if isinstance(batch, int) else tuple(batch)
    g = complex_normal(rng, batch + (profile.n_taps, n, m))
    amp = np.sqrt(np.asarray(profile.tap_powers))[:, None, None]
    return TappedChannel(g * amp, profile)
