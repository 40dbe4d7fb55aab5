"""Pure-numpy trial-scoring kernels (fallback when the extension is missing)."""
import numpy as np


def llr_pairs(U1, U2, i1, i2, psi, c, m, out):
    if U1.shape[1] != psi.shape[0] or U2.shape[1] != psi.shape[0]:
        raise ValueError("dimension mismatch")
    if len(i2) != len(i1) or len(out) != len(i1):
        raise ValueError("length mismatch")
    x = U1[i1]
    y = U2[i2]
    diff = x - y
    terms = c + m * (2.0 * x * y - psi * diff * diff)
    out[:] = 0.5 * terms.sum(axis=1)


def dot_pairs(X1, X2, i1, i2, out):
    if X1.shape[1] != X2.shape[1]:
        raise ValueError("dimension mismatch")
    if len(i2) != len(i1) or len(out) != len(i1):
        raise ValueError("length mismatch")
    out[:] = np.einsum("ij,ij->i", X1[i1], X2[i2])
