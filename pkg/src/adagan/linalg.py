"""Symmetric eigen-decomposition and the SPD matrix square root.

The square root of a symmetric positive semi-definite matrix is needed
for the Fréchet distance between Gaussian moment pairs. It is computed
by a cyclic Jacobi eigen-decomposition (unconditionally convergent for
symmetric input), clamping small negative eigenvalues to zero.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_TOL = 1e-12


class SpdMatrix:
    """Symmetric positive semi-definite matrix of 64-bit floats.

    Symmetry is validated on construction; eigenvalue negativity down to
    −1e-10 is tolerated and clamped to zero wherever eigenvalues are
    actually computed.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, entries):
        m = np.asarray(entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"square matrix required, got shape {m.shape}")
        _require_symmetric(m)
        self.dim = m.shape[0]
        self.entries = m

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


def _require_symmetric(m: np.ndarray) -> None:
    bound = SYMMETRY_TOL * np.maximum(1.0, np.abs(m))
    if not np.all(np.abs(m - m.T) <= bound + bound.T):
        raise ValueError("matrix is not symmetric within tolerance")


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, SpdMatrix):
        return m.entries
    m = np.asarray(m, dtype=np.float64)
    _require_symmetric(m)
    return m


def jacobi_eigh(m, sweep_tol: float = 1e-14, max_sweeps: int = 50):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns). Sweeps stop
    when the off-diagonal Frobenius mass drops below sweep_tol relative
    to the matrix norm.
    """
    a = np.array(_as_matrix(m), dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        # sum off-diagonal squares directly; subtracting the diagonal from
        # the total Frobenius mass cancels catastrophically near convergence
        hollow = a.copy()
        np.fill_diagonal(hollow, 0.0)
        off = np.linalg.norm(hollow)
        if off <= sweep_tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= sweep_tol * norm / n:
                    continue
                # rotation angle zeroing a[p,q] (stable two-branch form)
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = a.diagonal().copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def matrix_sqrt_spd(m) -> SpdMatrix:
    """Symmetric PSD square root: S with S·S ≈ M.

    Eigenvalues below zero (numerical noise) are clamped to 0 before the
    per-eigenvalue square root.
    """
    a = _as_matrix(m)
    w, v = jacobi_eigh(a)
    w = np.maximum(w, 0.0)
    s = (v * np.sqrt(w)) @ v.T
    return SpdMatrix((s + s.T) * 0.5)


def trace_sqrt_product(a, b) -> float:
    """trace(√(√A · B · √A)) for symmetric PSD A, B.

    This symmetric form equals trace((A·B)^{1/2}) and avoids taking the
    root of the non-symmetric product.
    """
    sa = matrix_sqrt_spd(a).entries
    bm = _as_matrix(b)
    inner = sa @ bm @ sa
    inner = (inner + inner.T) * 0.5
    w, _ = jacobi_eigh(inner)
    return float(np.sum(np.sqrt(np.maximum(w, 0.0))))
