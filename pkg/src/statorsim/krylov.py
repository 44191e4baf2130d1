"""Matrix-free Lanczos propagator for ``exp(-i t H) v`` with Hermitian ``H``."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg


def _lanczos(matvec, v, m_max):
    beta0 = np.linalg.norm(v)
    V = [v / beta0]
    alpha, beta = [], []
    for j in range(m_max):
        w = matvec(V[j])
        a = np.real(np.vdot(V[j], w))
        w = w - a * V[j] - (beta[-1] * V[j - 1] if j else 0)
        # full reorthogonalisation keeps the small basis numerically orthonormal
        for u in V:
            w -= np.vdot(u, w) * u
        alpha.append(a)
        b = np.linalg.norm(w)
        beta.append(b)
        if b < 1e-14 * max(1.0, abs(a)):
            break
        V.append(w / b)
    return beta0, np.array(V[: len(alpha)]), np.array(alpha), np.array(beta)


def expm_multiply_hermitian(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    t: float,
    tol: float = 1e-10,
    m_max: int = 40,
) -> np.ndarray:
    """Return ``exp(-i t H) v`` using restarted Lanczos with adaptive sub-steps.

    The sub-step length is shrunk until the standard a-posteriori estimate
    ``beta * h_{m+1,m} * |e_m^T exp(-i dt T) e_1|`` stays below its share of
    ``tol``.  The Krylov dimension grows up to ``m_max`` per restart.
    """
    w = np.array(v, dtype=complex)
    if t == 0 or not np.any(w):
        return w
    sign = np.sign(t)
    remaining = abs(t)
    total = abs(t)
    dt = remaining
    while remaining > 0:
        beta0, V, alpha, beta = _lanczos(matvec, w, m_max)
        m = len(alpha)
        evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, beta[: m - 1])
        breakdown = beta[m - 1] < 1e-14 * max(1.0, np.max(np.abs(alpha)))
        dt = min(dt, remaining)
        while True:
            y = evecs @ (np.exp(-1j * sign * dt * evals) * evecs[0].conj())
            err = 0.0 if breakdown else beta0 * beta[m - 1] * abs(y[-1])
            if err <= tol * dt / total or dt < 1e-12 * total:
                break
            dt *= 0.5
        w = beta0 * (y @ V)
        remaining -= dt
        if remaining <= 1e-15 * total:
            break
        if err < 0.1 * tol * dt / total:
            dt *= 2.0
    return w
