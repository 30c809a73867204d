"""Cyclic Jacobi eigensolver for small dense symmetric matrices."""

from __future__ import annotations

import numpy as np

from ..exceptions import ParameterError


def tournament_rounds(n):
    """Round-robin schedule: each round is a set of disjoint index pairs, and a
    full cycle of rounds visits every pair exactly once. Odd ``n`` gets a bye."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p), max(p)) for p in pairs if max(p) < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of symmetric ``a`` by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once in tournament order, so
    the rotations of one round act on disjoint rows and columns and are
    applied together. Sweeps stop once the off-diagonal Frobenius norm falls
    below ``tol * ||a||_F``. Returns ``(w, v)`` with eigenvalues ascending
    and eigenvectors in the columns of ``v``, as ``numpy.linalg.eigh`` does.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("matrix has non-finite entries")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n > 1 and scale > 0.0:
        rounds = tournament_rounds(n)
        for _ in range(max_sweeps):
            off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
            if off <= tol * scale:
                break
            for p, q in rounds:
                apq = a[p, q]
                active = np.abs(apq) > 1e-300
                if not active.any():
                    continue
                p, q, apq = p[active], q[active], apq[active]
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p], a[:, q]
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :], a[q, :]
                a[p, :], a[q, :] = c[:, None] * ap - s[:, None] * aq, s[:, None] * ap + c[:, None] * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p], v[:, q]
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
