"""Small complex linear-algebra kernel.

Every function accepts a single matrix of shape ``(rows, cols)`` or a stack
of matrices of shape ``(..., rows, cols)``; stacks are processed in one
vectorized pass, which is how the Monte Carlo engine feeds thousands of
channel draws at once.
"""

import numpy as np

from .errors import NonHermitian, SingularMatrix

PIVOT_TOL = 1e-12
HERMITIAN_TOL = 1e-9
POWER_ITERATIONS = 200
POWER_RTOL = 1e-8

# fixed, generic start vector for power iteration (never orthogonal to an
# eigenvector in practice, and deterministic across runs)
_START = np.random.default_rng(20240601).standard_normal(64) + 1j * np.random.default_rng(
    20240602
).standard_normal(64)


def cmatrix(data):
    """Coerce ``data`` to a complex matrix (or stack), rejecting NaN/Inf."""
    a = np.asarray(data, dtype=complex)
    if a.ndim < 2 or a.shape[-1] < 1 or a.shape[-2] < 1:
        raise ValueError(f"expected a matrix with rows, cols >= 1, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def hermitian(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def identity(n, dtype=complex):
    return np.eye(n, dtype=dtype)


def inverse(a):
    """Invert square matrices by Gauss-Jordan elimination with partial pivoting.

    Raises
    ------
    SingularMatrix
        If any pivot magnitude drops below ``PIVOT_TOL``.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    if a.ndim < 2 or a.shape[-2] != n:
        raise ValueError(f"inverse needs square matrices, got shape {a.shape}")
    batch_shape = a.shape[:-2]
    flat = a.reshape(-1, n, n)
    aug = np.concatenate([flat, np.broadcast_to(np.eye(n, dtype=complex), flat.shape)], axis=-1)
    rows = np.arange(aug.shape[0])
    for col in range(n):
        piv = col + np.argmax(np.abs(aug[:, col:, col]), axis=1)
        if np.any(np.abs(aug[rows, piv, col]) < PIVOT_TOL):
            raise SingularMatrix(f"pivot below {PIVOT_TOL:g} in column {col}")
        swap = piv != col
        if np.any(swap):
            r = rows[swap]
            top = aug[r, col, :].copy()
            aug[r, col, :] = aug[r, piv[swap], :]
            aug[r, piv[swap], :] = top
        aug[:, col, :] /= aug[:, col, col][:, None]
        factor = aug[:, :, col].copy()
        factor[:, col] = 0.0
        aug -= factor[:, :, None] * aug[:, None, col, :]
    return aug[:, :, n:].reshape(batch_shape + (n, n))


def pseudo_inverse(a):
    """Left inverse ``(a^H a)^{-1} a^H`` of a full-column-rank matrix."""
    a = np.asarray(a, dtype=complex)
    rows, cols = a.shape[-2:]
    if cols > rows:
        raise SingularMatrix(f"{rows}x{cols} matrix cannot have full column rank")
    ah = hermitian(a)
    return inverse(ah @ a) @ ah


def max_eigenvalue_hermitian(a):
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    Stops when the Rayleigh quotient changes by less than ``POWER_RTOL``
    (relative) or after ``POWER_ITERATIONS`` steps.  Returns a float for a
    single matrix, an array for a stack.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if np.max(np.abs(a - hermitian(a)), initial=0.0) > HERMITIAN_TOL:
        raise NonHermitian("matrix differs from its conjugate transpose")
    flat = a.reshape(-1, n, n)
    if n > _START.size:
        v = np.ones((flat.shape[0], n), dtype=complex)
    else:
        v = np.broadcast_to(_START[:n], (flat.shape[0], n)).copy()
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    lam = np.zeros(flat.shape[0])
    for _ in range(POWER_ITERATIONS):
        av = np.einsum("bij,bj->bi", flat, v)
        new = np.real(np.einsum("bi,bi->b", np.conj(v), av))
        norm = np.linalg.norm(av, axis=1)
        zero = norm == 0.0
        v = np.where(zero[:, None], v, av / np.where(zero, 1.0, norm)[:, None])
        done = np.abs(new - lam) <= POWER_RTOL * np.abs(new)
        lam = new
        if np.all(done | zero):
            break
    lam = np.maximum(lam, 0.0)
    if a.ndim == 2:
        return float(lam[0])
    return lam.reshape(a.shape[:-2])
