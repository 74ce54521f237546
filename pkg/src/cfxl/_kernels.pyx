# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte-Carlo moment reductions with compensated summation."""
import numpy as np

ctypedef double complex cplx


cdef inline void _kahan_add(double[:, :, ::1] s, double[:, :, ::1] c,
                            Py_ssize_t a, Py_ssize_t i, Py_ssize_t j, double x) noexcept nogil:
    # Neumaier variant: exact when |x| > |s|
    cdef double t = s[a, i, j] + x
    if abs(s[a, i, j]) >= abs(x):
        c[a, i, j] += (s[a, i, j] - t) + x
    else:
        c[a, i, j] += (x - t) + s[a, i, j]
    s[a, i, j] = t


def mr_moment_sums(const cplx[:, :, :, :, ::1] H, const unsigned char[:, ::1] D,
                   const cplx[:, :, ::1] pbar):
    cdef Py_ssize_t n = H.shape[0], M = H.shape[1], K = H.shape[2]
    cdef Py_ssize_t Nr = H.shape[3], Ns = H.shape[4]
    cdef Py_ssize_t s, m, k, l, r, i, j, p, q
    cdef cplx acc, x
    G_arr = np.zeros((K, K, Ns, Ns), dtype=np.complex128)
    GP_arr = np.zeros((Ns, Ns), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] G = G_arr
    cdef cplx[:, ::1] GP = GP_arr
    sums = np.zeros((4, K, Ns, Ns))
    comps = np.zeros((4, K, Ns, Ns))
    cdef double[:, :, :, ::1] S = sums
    cdef double[:, :, :, ::1] Cc = comps

    with nogil:
        for s in range(n):
            G[:, :, :, :] = 0
            for m in range(M):
                for k in range(K):
                    for l in range(K):
                        if not D[m, l] and not (l == k and D[m, k]):
                            continue
                        for i in range(Ns):
                            for j in range(Ns):
                                acc = 0
                                for r in range(Nr):
                                    acc = acc + H[s, m, k, r, i].conjugate() * H[s, m, l, r, j]
                                if D[m, l]:
                                    G[k, l, i, j] = G[k, l, i, j] + acc
                                if l == k and D[m, k]:
                                    _kahan_add(S[0], Cc[0], k, i, j, acc.real)
                                    _kahan_add(S[1], Cc[1], k, i, j, acc.imag)
            for k in range(K):
                for l in range(K):
                    for i in range(Ns):
                        for p in range(Ns):
                            acc = 0
                            for j in range(Ns):
                                acc = acc + G[k, l, i, j] * pbar[l, j, p]
                            GP[i, p] = acc
                    for i in range(Ns):
                        for q in range(Ns):
                            acc = 0
                            for p in range(Ns):
                                acc = acc + GP[i, p] * G[k, l, q, p].conjugate()
                            _kahan_add(S[2], Cc[2], k, i, q, acc.real)
                            _kahan_add(S[3], Cc[3], k, i, q, acc.imag)
    total = sums + comps
    gram = total[0] + 1j * total[1]
    psi = total[2] + 1j * total[3]
    return gram, psi


def fourth_moment_sum(const cplx[:, :, ::1] A, const cplx[:, :, ::1] B,
                      const cplx[:, :, ::1] C, const cplx[:, :, ::1] E,
                      const cplx[:, ::1] P):
    cdef Py_ssize_t n = A.shape[0], Nr = A.shape[1], Ns = A.shape[2]
    cdef Py_ssize_t s, r, i, j, p, q
    cdef cplx acc
    X_arr = np.zeros((Ns, Ns), dtype=np.complex128)
    Y_arr = np.zeros((Ns, Ns), dtype=np.complex128)
    XP_arr = np.zeros((Ns, Ns), dtype=np.complex128)
    cdef cplx[:, ::1] X = X_arr
    cdef cplx[:, ::1] Y = Y_arr
    cdef cplx[:, ::1] XP = XP_arr
    sums = np.zeros((2, 1, Ns, Ns))
    comps = np.zeros((2, 1, Ns, Ns))
    cdef double[:, :, :, ::1] S = sums
    cdef double[:, :, :, ::1] Cc = comps

    with nogil:
        for s in range(n):
            for i in range(Ns):
                for j in range(Ns):
                    acc = 0
                    for r in range(Nr):
                        acc = acc + A[s, r, i].conjugate() * B[s, r, j]
                    X[i, j] = acc
                    acc = 0
                    for r in range(Nr):
                        acc = acc + C[s, r, i].conjugate() * E[s, r, j]
                    Y[i, j] = acc
            for i in range(Ns):
                for p in range(Ns):
                    acc = 0
                    for j in range(Ns):
                        acc = acc + X[i, j] * P[j, p]
                    XP[i, p] = acc
            for i in range(Ns):
                for q in range(Ns):
                    acc = 0
                    for p in range(Ns):
                        acc = acc + XP[i, p] * Y[p, q]
                    _kahan_add(S[0], Cc[0], 0, i, q, acc.real)
                    _kahan_add(S[1], Cc[1], 0, i, q, acc.imag)
    total = sums + comps
    return total[0, 0] + 1j * total[1, 0]
