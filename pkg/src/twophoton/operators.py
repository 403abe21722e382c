"""Dense complex-matrix primitives for small Hilbert spaces (dims 2, 4, 8).

Basis convention used everywhere in this package: the two-level atom has
|e> = (1, 0)^T and |g> = (0, 1)^T, so the lowering operator is
sigma_- = |g><e|.  The two ancilla qubits use the same convention with
|up> = (1, 0)^T.  All operations broadcast over leading axes, so a stack of
density matrices with shape (..., d, d) is handled in one call.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "I2",
    "KET_E",
    "KET_G",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "EXCITED_PROJECTOR",
    "dag",
    "trace",
    "ket",
    "projector",
    "kron",
    "commutator",
    "anticommutator",
    "dissipator",
    "partial_trace_ancillas",
]

I2 = np.eye(2, dtype=complex)
KET_E = np.array([1.0, 0.0], dtype=complex)
KET_G = np.array([0.0, 1.0], dtype=complex)
SIGMA_MINUS = np.outer(KET_G, KET_E.conj())  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T
EXCITED_PROJECTOR = SIGMA_PLUS @ SIGMA_MINUS  # diag(1, 0)


def dag(a):
    """Adjoint (conjugate transpose) of the trailing matrix axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def trace(a):
    """Trace over the trailing matrix axes; broadcasts over leading axes."""
    return np.trace(a, axis1=-2, axis2=-1)


def ket(amplitudes) -> np.ndarray:
    """Validate and return a normalized state vector.

    Raises ValueError if the Euclidean norm deviates from 1 by more
    than 1e-12.
    """
    v = np.asarray(amplitudes, dtype=complex)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"state vector norm {norm!r} is not 1 within 1e-12")
    return v


def projector(v) -> np.ndarray:
    """Rank-one projector |v><v|."""
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def kron(a, b) -> np.ndarray:
    """Tensor (Kronecker) product of two matrices."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _check_same_dim(a, b, what):
    if a.shape[-1] != b.shape[-1] or a.shape[-2] != b.shape[-2]:
        raise ValueError(
            f"{what}: dimension mismatch {a.shape[-2:]} vs {b.shape[-2:]}"
        )


def commutator(a, b):
    """[A, B] = AB - BA.  Dimension mismatch raises ValueError."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_same_dim(a, b, "commutator")
    return a @ b - b @ a


def anticommutator(a, b):
    """{A, B} = AB + BA."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_same_dim(a, b, "anticommutator")
    return a @ b + b @ a


def dissipator(L, rho):
    """Adjoint dissipator L rho L^+ - (L^+ L rho + rho L^+ L) / 2.

    Trace-free for every rho; broadcasts over leading axes of rho.
    """
    L = np.asarray(L, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    _check_same_dim(L, rho, "dissipator")
    Ld = dag(L)
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def partial_trace_ancillas(rho8, weight4) -> np.ndarray:
    """Weighted partial trace over the two ancilla factors.

    For an 8x8 operator on ancilla1 (x) ancilla2 (x) atom and a 4x4 weight W
    on the ancilla pair, returns the 2x2 atom matrix M with
    Tr[M X] = Tr[rho8 (W (x) X)] for every 2x2 X.
    """
    rho8 = np.asarray(rho8, dtype=complex)
    weight4 = np.asarray(weight4, dtype=complex)
    if rho8.shape[-2:] != (8, 8):
        raise ValueError(f"expected an 8x8 operator, got {rho8.shape[-2:]}")
    if weight4.shape != (4, 4):
        raise ValueError(f"expected a 4x4 ancilla weight, got {weight4.shape}")
    r = rho8.reshape(rho8.shape[:-2] + (4, 2, 4, 2))
    # M_xy = sum_ab W_ab rho_(b x),(a y); W acts only on the ancilla pair.
    return np.einsum("ab,...bxay->...xy", weight4, r)
