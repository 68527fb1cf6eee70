"""Non-adaptive MIMO detectors with perfect channel knowledge.

Shapes follow the usual convention: ``y`` is ``(..., N)``, ``h`` is
``(..., N, M)``, symbol estimates are ``(..., M)``.  Leading axes are
independent trials and broadcast against each other.  ``h`` is always the
*effective* channel seen by unit-energy symbols (transmit power split
already folded in), and ``snr`` is the symbol-energy to noise-variance
ratio with respect to it.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import modem
from .errors import ConfigError, SearchSpaceTooLarge
from .numerics import hermitian, inverse, pseudo_inverse

ML_MAX_CANDIDATES = 2**16

DETECTOR_NAMES = (
    "ml", "zf", "mmse", "mrc", "stbc",
    "zf-sic", "mmse-sic", "zf-sic-ordered", "mmse-sic-ordered",
    "sic-ml-first", "sic-mrc-first",
)


@dataclass(frozen=True, eq=False)
class DetectorWeights:
    """Linear combiner ``w`` of shape ``(..., M, N)``; estimates are ``w @ y``."""

    w: np.ndarray
    kind: str  # "ZF" | "MMSE" | "MatchedFilter"

    def apply(self, y):
        return (self.w @ np.asarray(y)[..., None])[..., 0]


def _broadcast(y, h):
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    n, m = h.shape[-2:]
    if y.shape[-1] != n:
        raise ValueError(f"y has {y.shape[-1]} entries but h has {n} rows")
    batch = np.broadcast_shapes(y.shape[:-1], h.shape[:-2])
    return np.broadcast_to(y, batch + (n,)), np.broadcast_to(h, batch + (n, m)), batch


# -- maximum likelihood ------------------------------------------------------

def ml_candidates(m, c):
    """All ``|A|^M`` transmit vectors in lexicographic point-index order."""
    if c.size**m > ML_MAX_CANDIDATES:
        raise SearchSpaceTooLarge(f"{c.size}^{m} candidates exceeds {ML_MAX_CANDIDATES}")
    idx = np.array(list(itertools.product(range(c.size), repeat=m)), dtype=np.int64)
    return c.points[idx]


def detect_ml(y, h, c):
    """Exhaustive search for ``argmin_x ||y - H x||^2`` over the constellation."""
    y, h, batch = _broadcast(y, h)
    n, m = h.shape[-2:]
    cand = ml_candidates(m, c)  # (K, M)
    yf = y.reshape(-1, n)
    hf = h.reshape(-1, n, m)
    best = np.empty(yf.shape[0], dtype=np.int64)
    chunk = max(1, 2**22 // (cand.shape[0] * n))
    for lo in range(0, yf.shape[0], chunk):
        hx = hf[lo:lo + chunk] @ cand.T  # (b, N, K)
        d = np.sum(np.abs(yf[lo:lo + chunk, :, None] - hx) ** 2, axis=1)
        best[lo:lo + chunk] = np.argmin(d, axis=1)
    return cand[best].reshape(batch + (m,))


# -- linear combiners --------------------------------------------------------

def weights_zf(h):
    """Zero-forcing weights: the channel pseudo-inverse."""
    return DetectorWeights(pseudo_inverse(h), "ZF")


def weights_mmse(h, snr):
    """MMSE weights ``(I/snr + H^H H)^{-1} H^H``."""
    h = np.asarray(h, dtype=complex)
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 0):
        raise ValueError("snr must be positive")
    m = h.shape[-1]
    hh = hermitian(h)
    reg = np.eye(m) / snr[..., None, None]
    return DetectorWeights(inverse(reg + hh @ h) @ hh, "MMSE")


def weights_matched(h):
    return DetectorWeights(hermitian(np.asarray(h, dtype=complex)), "MatchedFilter")


def detect_linear(y, weights, c, h=None):
    """Slice ``w @ y``.  MMSE outputs are rescaled by ``diag(W H)`` first.

    The rescaling is a positive real gain per stream, so it never changes
    BPSK/QPSK decisions; it removes the MMSE shrinkage that would otherwise
    bias 16-QAM decisions toward the origin.
    """
    z = weights.apply(y)
    if weights.kind == "MMSE" and h is not None:
        gain = np.real(np.einsum("...ij,...ji->...i", weights.w, np.asarray(h)))
        z = z / gain
    return modem.slice(z, c)


def combine_mrc(y, h):
    """Maximal ratio combining ``sum_i conj(h_i) y_i`` over the last axis."""
    return np.sum(np.conj(h) * np.asarray(y), axis=-1)


def detect_mrc(y, h, c):
    """Single-stream MRC decision for a channel column ``h`` ``(..., N)``."""
    h = np.asarray(h)
    z = combine_mrc(y, h) / np.sum(np.abs(h) ** 2, axis=-1)
    return modem.slice(z, c)


# -- Alamouti ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StbcBlock:
    """Alamouti code matrix; rows are antennas, columns symbol periods."""

    s: np.ndarray

    @property
    def gram(self):
        return self.s @ hermitian(self.s)


def stbc_encode(s1, s2):
    """Build ``[[s1, -conj(s2)], [s2, conj(s1)]]`` (broadcasts over arrays)."""
    s1 = np.asarray(s1, dtype=complex)
    s2 = np.asarray(s2, dtype=complex)
    s = np.stack(
        [np.stack([s1, -np.conj(s2)], axis=-1), np.stack([s2, np.conj(s1)], axis=-1)],
        axis=-2,
    )
    return StbcBlock(s)


def stbc_combine(y, h):
    """Orthogonal combining of two-period observations.

    ``y`` is ``(..., N, 2)`` (column ``t`` = period ``t``), ``h`` is
    ``(..., N, 2)``.  Returns the decoupled statistics normalized by the
    channel gain ``sum |h|^2`` so they sit on the constellation scale.
    """
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    y1, y2 = y[..., 0], y[..., 1]
    h1, h2 = h[..., 0], h[..., 1]
    gain = np.sum(np.abs(h) ** 2, axis=(-2, -1))
    z1 = np.sum(np.conj(h1) * y1 + h2 * np.conj(y2), axis=-1) / gain
    z2 = np.sum(np.conj(h2) * y1 - h1 * np.conj(y2), axis=-1) / gain
    return z1, z2


def stbc_decode(y, h, c):
    """Alamouti decoding; returns the sliced ``(s1, s2)`` estimates."""
    z1, z2 = stbc_combine(y, h)
    return modem.slice(z1, c), modem.slice(z2, c)


# -- V-BLAST successive interference cancellation ----------------------------

@dataclass(frozen=True)
class SicConfig:
    ordering: bool = True
    nulling: str = "zf"        # "zf" | "mmse"
    first_stage: str = "same"  # "same" | "ml" | "mrc"

    def __post_init__(self):
        if self.nulling not in ("zf", "mmse"):
            raise ConfigError(f"unknown nulling {self.nulling!r}")
        if self.first_stage not in ("same", "ml", "mrc"):
            raise ConfigError(f"unknown first_stage {self.first_stage!r}")


def vblast_sic(y, h, snr, c, cfg=SicConfig(), return_order=False):
    """Detect all streams by successive nulling, slicing and cancellation.

    At each stage the nulling matrix of the deflated channel is formed; with
    ordering on, the stream whose nulling row has the smallest squared norm
    (highest post-detection SNR) is taken next, otherwise the lowest
    remaining index.  Decisions are hard and cancelled before the next
    stage.  ``cfg.first_stage`` replaces the first decision by joint ML
    (``"ml"``) or by matched-filter combining of the chosen stream's column
    (``"mrc"``).

    Returns estimates in original stream order; with ``return_order`` also
    the ``(..., M)`` detection order.
    """
    y, h, batch = _broadcast(y, h)
    n, m = h.shape[-2:]
    if m > n:
        raise ConfigError(f"SIC needs M <= N, got M={m}, N={n}")
    yr = y.reshape(-1, n).copy()
    hf = h.reshape(-1, n, m)
    b = yr.shape[0]
    rows = np.arange(b)
    remaining = np.tile(np.arange(m), (b, 1))
    x_hat = np.zeros((b, m), dtype=complex)
    order = np.zeros((b, m), dtype=np.int64)
    joint = detect_ml(yr, hf, c) if cfg.first_stage == "ml" else None

    for stage in range(m):
        r = m - stage
        hr = np.take_along_axis(hf, remaining[:, None, :], axis=2)  # (b, N, r)
        weights = weights_zf(hr) if cfg.nulling == "zf" else weights_mmse(hr, snr)
        w = weights.w  # (b, r, N)
        if cfg.ordering and r > 1:
            pos = np.argmin(np.sum(np.abs(w) ** 2, axis=2), axis=1)
        else:
            pos = np.zeros(b, dtype=np.int64)
        stream = remaining[rows, pos]
        hcol = hr[rows, :, pos]
        if stage == 0 and joint is not None:
            s = joint[rows, stream]
        elif stage == 0 and cfg.first_stage == "mrc":
            s = detect_mrc(yr, hcol, c)
        else:
            wrow = w[rows, pos, :]
            z = np.sum(wrow * yr, axis=1)
            if weights.kind == "MMSE":
                z = z / np.real(np.sum(wrow * hcol, axis=1))
            s = modem.slice(z, c)
        x_hat[rows, stream] = s
        order[:, stage] = stream
        yr -= hcol * s[:, None]
        keep = np.ones((b, r), dtype=bool)
        keep[rows, pos] = False
        remaining = remaining[keep].reshape(b, r - 1)

    x_hat = x_hat.reshape(batch + (m,))
    if return_order:
        return x_hat, order.reshape(batch + (m,))
    return x_hat


SIC_CONFIGS = {
    "zf-sic": SicConfig(ordering=False, nulling="zf"),
    "mmse-sic": SicConfig(ordering=False, nulling="mmse"),
    "zf-sic-ordered": SicConfig(ordering=True, nulling="zf"),
    "mmse-sic-ordered": SicConfig(ordering=True, nulling="mmse"),
    "sic-ml-first": SicConfig(ordering=True, nulling="zf", first_stage="ml"),
    "sic-mrc-first": SicConfig(ordering=True, nulling="zf", first_stage="mrc"),
}


def check_detector(name, m_tx, n_rx, c=None):
    """Raise ConfigError if ``name`` cannot run on an ``n_rx x m_tx`` link."""
    if name not in DETECTOR_NAMES:
        raise ConfigError(f"unknown detector {name!r}; expected one of {DETECTOR_NAMES}")
    if m_tx < 1 or n_rx < 1:
        raise ConfigError("antenna counts must be >= 1")
    if name == "mrc" and m_tx != 1:
        raise ConfigError("mrc requires m_tx = 1")
    if name == "stbc" and m_tx != 2:
        raise ConfigError("stbc requires m_tx = 2")
    if (name == "zf" or name in SIC_CONFIGS) and m_tx > n_rx:
        raise ConfigError(f"{name} requires m_tx <= n_rx")
    if name in ("ml", "sic-ml-first") and c is not None and c.size**m_tx > ML_MAX_CANDIDATES:
        raise ConfigError(f"ml search space {c.size}^{m_tx} is too large")


def make_detector(name, c, snr):
    """Return ``detect(y, h) -> x_hat`` for a spatial-multiplexing detector.

    ``stbc`` is not a per-vector detector and is rejected here.
    """
    if name == "ml":
        return lambda y, h: detect_ml(y, h, c)
    if name == "zf":
        return lambda y, h: detect_linear(y, weights_zf(h), c)
    if name == "mmse":
        return lambda y, h: detect_linear(y, weights_mmse(h, snr), c, h)
    if name == "mrc":
        return lambda y, h: detect_mrc(y, h[..., 0], c)[..., None]
    if name in SIC_CONFIGS:
        cfg = SIC_CONFIGS[name]
        return lambda y, h: vblast_sic(y, h, snr, c, cfg)
    raise ConfigError(f"{name!r} is not a per-vector detector")
