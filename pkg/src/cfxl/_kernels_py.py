"""Numpy implementation of the Monte-Carlo moment reductions."""
import numpy as np


def mr_moment_sums(H, D, pbar):
    """Per-UE sums over samples needed by the MR achievable-SE estimator.

    ``H`` has shape ``(n, M, K, N_r, N_s)``. Returns ``(gram, psi)`` with
    ``gram[k] = sum_n sum_{m in A_k} H_mk^H H_mk`` and
    ``psi[k] = sum_n sum_l G_kl Pbar_l G_kl^H`` where
    ``G_kl = sum_{m in A_l} H_mk^H H_ml``.
    """
    H = np.asarray(H, dtype=np.complex128)
    Df = np.asarray(D, dtype=np.float64)
    P = np.asarray(pbar, dtype=np.complex128)
    C = np.einsum("nmkri,nmlrj->nmklij", H.conj(), H, optimize=True)
    G = np.einsum("ml,nmklij->nklij", Df, C, optimize=True)
    psi = np.einsum("nklij,ljp,nklqp->kiq", G, P, G.conj(), optimize=True)
    diag = np.einsum("nmkkij->nmkij", C)
    gram = np.einsum("mk,nmkij->kij", Df, diag, optimize=True)
    return gram, psi


def fourth_moment_sum(A, B, C, E, P):
    """``sum_n A_n^H B_n P C_n^H E_n`` over stacked ``(n, N_r, N_s)`` inputs."""
    X = np.einsum("nri,nrj->nij", A.conj(), B)
    Y = np.einsum("nri,nrj->nij", C.conj(), E)
    return np.einsum("nij,jp,npq->iq", X, P, Y, optimize=True)
