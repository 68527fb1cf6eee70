"""Training-based linear MIMO detection with LMS and RLS.

The weight matrix ``W`` (``M x N``) maps received vectors to symbol
estimates, exactly as the non-adaptive combiners do, but is learned from a
known training sequence instead of computed from the channel.  States may
carry leading batch axes; every member of a batch adapts independently.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import modem
from .channel import add_awgn, draw_flat, snr_to_noise_var
from .detect import weights_mmse
from .errors import DivergedState
from .numerics import hermitian, max_eigenvalue_hermitian

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class AdaptParams:
    mu: float = 0.02
    lam: float = 0.99
    pi0: float = 100.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")
        if self.pi0 <= 0:
            raise ValueError("pi0 must be positive")


@dataclass(frozen=True, eq=False)
class AdaptiveState:
    w: np.ndarray                 # (..., M, N)
    p: np.ndarray = None          # (..., N, N), RLS only
    mu: float = 0.02
    lam: float = 0.99
    pi0: float = 100.0
    iteration: int = 0


def init_state(m, n, params=AdaptParams(), batch=()):
    """Zero weights and ``P = pi0 * I``."""
    batch = (batch,) if isinstance(batch, int) else tuple(batch)
    w = np.zeros(batch + (m, n), dtype=complex)
    p = np.broadcast_to(params.pi0 * np.eye(n, dtype=complex), batch + (n, n)).copy()
    return AdaptiveState(w, p, params.mu, params.lam, params.pi0, 0)


def lms_step(state, x, y):
    """One LMS update ``W += mu (x - W y) y^H``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    e = x - (state.w @ y[..., None])[..., 0]
    w = state.w + state.mu * e[..., :, None] * np.conj(y)[..., None, :]
    return replace(state, w=w, iteration=state.iteration + 1)


def rls_step(state, x, y):
    """One exponentially weighted RLS update.

    ``k = P y / (lam + y^H P y)``, ``W += (x - W y) k^H``,
    ``P = (P - k y^H P) / lam``, then ``P`` is re-symmetrized.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    p = state.p
    py = (p @ y[..., None])[..., 0]
    denom = state.lam + np.real(np.sum(np.conj(y) * py, axis=-1))
    k = py / denom[..., None]
    e = x - (state.w @ y[..., None])[..., 0]
    w = state.w + e[..., :, None] * np.conj(k)[..., None, :]
    if np.max(np.abs(w), initial=0.0) > DIVERGENCE_LIMIT:
        raise DivergedState(f"weight magnitude exceeded {DIVERGENCE_LIMIT:g}")
    # y^H P == (P y)^H for Hermitian P
    p = (p - k[..., :, None] * np.conj(py)[..., None, :]) / state.lam
    p = 0.5 * (p + hermitian(p))
    return replace(state, w=w, p=p, iteration=state.iteration + 1)


@dataclass(frozen=True, eq=False)
class SignalStats:
    sigma_x2: float
    sigma_z2: float
    r_y: np.ndarray


def signal_stats(h, sigma_x2, sigma_z2):
    """Receive correlation ``R_y = sigma_x2 H H^H + sigma_z2 I``."""
    h = np.asarray(h, dtype=complex)
    r_y = sigma_x2 * (h @ hermitian(h)) + sigma_z2 * np.eye(h.shape[-2])
    return SignalStats(sigma_x2, sigma_z2, r_y)


def lms_max_step(stats):
    """Mean-square stability bound ``2 / lambda_max(R_y)`` on the LMS step."""
    return 2.0 / max_eigenvalue_hermitian(stats.r_y)


@dataclass(frozen=True, eq=False)
class LearningCurve:
    ber: np.ndarray       # ensemble BER after each training symbol
    mmse_ber: float       # MMSE detector on the same channels and probes
    algo: str
    snr_db: float


def _errors(z, bits, c):
    return np.count_nonzero(modem.demodulate(z, c) != bits)


def learning_curve(m, n, snr_db, algo, params=AdaptParams(), n_train=1000,
                   n_ensemble=500, rng=None, constellation="bpsk", n_probe=200):
    """Ensemble-averaged probe BER versus number of training symbols.

    Each ensemble member draws its own flat Rayleigh channel, a random
    training sequence and a held-out probe block of ``n_probe`` vectors (all
    through the same channel, fresh noise).  After every training update the
    probe block is re-detected with the current weights.  All randomness is
    drawn before adaptation starts, so LMS and RLS runs with the same seed
    see identical realizations.
    """
    if n_ensemble < 1 or n_train < 1:
        raise ValueError("n_ensemble and n_train must be >= 1")
    algo = algo.lower()
    if algo not in ("lms", "rls"):
        raise ValueError(f"unknown algorithm {algo!r}")
    rng = np.random.default_rng() if rng is None else rng
    c = modem.get_constellation(constellation)
    k = c.bits_per_symbol
    noise_var = snr_to_noise_var(snr_db, m)

    h = draw_flat(m, n, rng, batch=n_ensemble).h / np.sqrt(m)
    train_bits = modem.random_bits(rng, (n_ensemble, n_train, m * k))
    x_train = modem.modulate(train_bits, c)
    y_train = add_awgn(np.einsum("eij,etj->eti", h, x_train), noise_var, rng)
    probe_bits = modem.random_bits(rng, (n_ensemble, n_probe, m * k))
    x_probe = modem.modulate(probe_bits, c)
    y_probe = add_awgn(np.einsum("eij,etj->eti", h, x_probe), noise_var, rng)
    total = probe_bits.size

    snr = np.inf if noise_var == 0 else 1.0 / noise_var
    w_mmse = weights_mmse(h, snr).w
    gain = np.real(np.einsum("eij,eji->ei", w_mmse, h))
    z = (y_probe @ np.swapaxes(w_mmse, -1, -2)) / gain[:, None, :]
    mmse_ber = _errors(z, probe_bits, c) / total

    step = lms_step if algo == "lms" else rls_step
    state = init_state(m, n, params, batch=n_ensemble)
    ber = np.empty(n_train)
    for i in range(n_train):
        state = step(state, x_train[:, i], y_train[:, i])
        z = y_probe @ np.swapaxes(state.w, -1, -2)
        ber[i] = _errors(z, probe_bits, c) / total
    return LearningCurve(ber, float(mmse_ber), algo, float(snr_db))
