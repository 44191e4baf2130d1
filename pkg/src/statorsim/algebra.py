"""Z_N clock and shift operators and small dense local operators.

Local operators are plain ``numpy`` arrays of shape ``(dim, dim)``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import BadOrder

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _check_order(N: int) -> None:
    if int(N) != N or N < 2:
        raise BadOrder(f"group order must be an integer >= 2, got {N}")


def delta(N: int) -> float:
    _check_order(N)
    return 2 * np.pi / N


def clock_p(N: int) -> np.ndarray:
    """``P|m> = exp(i delta m)|m>``."""
    _check_order(N)
    return np.diag(np.exp(1j * delta(N) * np.arange(N)))


def shift_q(N: int) -> np.ndarray:
    """Cyclic raising operator ``Q|m> = |m+1 mod N>``."""
    _check_order(N)
    return np.roll(np.eye(N, dtype=complex), 1, axis=0)


def _principal_angles(phases: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi], snapping values at -pi onto +pi."""
    ang = np.angle(np.exp(1j * phases))
    ang[np.isclose(ang, -np.pi, atol=1e-12)] = np.pi
    return ang


def log_unitary(U: np.ndarray) -> np.ndarray:
    """Principal-branch logarithm of a unitary matrix.

    Eigenphases are mapped into (-pi, pi]; the result ``A`` is
    anti-Hermitian with ``expm(A) == U``.
    """
    T, Z = scipy.linalg.schur(np.asarray(U, dtype=complex), output="complex")
    ang = _principal_angles(np.angle(np.diag(T)))
    return (Z * (1j * ang)) @ Z.conj().T


def log_shift(N: int) -> np.ndarray:
    """Principal logarithm of ``shift_q(N)``, built from its Fourier eigenbasis."""
    _check_order(N)
    m = np.arange(N)
    # columns are eigenvectors of Q: Q f_k = exp(i delta k) f_k
    F = np.exp(-1j * delta(N) * np.outer(m, m)) / np.sqrt(N)
    ang = _principal_angles(delta(N) * m)
    return (F * (1j * ang)) @ F.conj().T


def ancilla_in_state(N: int) -> np.ndarray:
    """Uniform superposition ``(1/sqrt N) sum_m |m>``, the +1 eigenstate of Q."""
    _check_order(N)
    return np.full(N, 1 / np.sqrt(N), dtype=complex)


def rotation(n, phi: float) -> np.ndarray:
    """``exp(-i phi n.sigma)`` for a unit 3-vector ``n``."""
    n = np.asarray(n, dtype=float)
    ns = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return np.cos(phi) * IDENTITY_2 - 1j * np.sin(phi) * ns


def is_unitary(U: np.ndarray, tol: float = 1e-12) -> bool:
    U = np.asarray(U)
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) < tol)


def controlled_power(N: int, op: np.ndarray) -> np.ndarray:
    """``sum_m |m><m| (x) op^m`` with the control as the most significant factor."""
    d = op.shape[0]
    out = np.zeros((N * d, N * d), dtype=complex)
    power = np.eye(d, dtype=complex)
    for m in range(N):
        out[m * d:(m + 1) * d, m * d:(m + 1) * d] = power
        power = op @ power
    return out
