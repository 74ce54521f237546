"""Uplink SE with MR combining, power consumption and energy efficiency.

Two SE evaluators are provided. ``se_theorem1_mc`` estimates every
expectation of the achievable-SE bound by sample averages over channel
draws. ``se_closed_mr`` assembles the same bound from the second-order
moments ``Z_mk = E{H_mk^H H_mk}`` and the fourth-order moments
``T_kl^{mm'} = E{H_mk^H H_ml Pbar_l H_m'l^H H_m'k}``, which are available
either by sampling (``moments_T_mc``) or exactly for the Gaussian
wavenumber-domain model (``moments_T_closed``).

The interference sum runs over ``m in A_l`` (the interferer's cluster) and
the combiner ``V_mk = H_mk`` is evaluated for whatever AP index is asked
for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import complexity, kernels
from .channel import SeedLike, as_generator
from .clustering import ApAssignment, CoopGraph
from .config import PowerParams
from .errors import NumericalError

REG_EPS = 1e-12
MC_CHUNK = 2000


@dataclass(frozen=True, eq=False)
class TxPower:
    """Per-UE transmit powers spread uniformly over the ``n_tx`` antennas."""

    p: np.ndarray
    n_tx: int

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("transmit powers must be finite and >= 0")
        object.__setattr__(self, "p", p)

    @property
    def n_ues(self) -> int:
        return len(self.p)

    def matrix(self, k: int) -> np.ndarray:
        return math.sqrt(self.p[k] / self.n_tx) * np.eye(self.n_tx)

    def pbar(self) -> np.ndarray:
        """(K, N_s, N_s) stack of ``P_k P_k^H``."""
        return (self.p / self.n_tx)[:, None, None] * np.eye(self.n_tx)[None]

    def trace(self) -> np.ndarray:
        return np.array([np.trace(self.matrix(k) @ self.matrix(k).conj().T).real
                         for k in range(self.n_ues)])


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("noise power must be > 0")


@dataclass(frozen=True, eq=False)
class SeResult:
    se: np.ndarray
    method: str

    @property
    def total(self) -> float:
        return float(np.sum(self.se))


@dataclass(frozen=True, eq=False)
class PowerBreakdown:
    p_ap: np.ndarray
    p_ue: np.ndarray
    p_con: np.ndarray
    p_cpu: float
    c_con: float
    c_cpu: float
    n_rx: int
    params: PowerParams

    @property
    def p_total(self) -> float:
        return float(np.sum(self.p_ap) + np.sum(self.p_ue) + np.sum(self.p_con) + self.p_cpu)

    @property
    def comm_power(self) -> float:
        return float(np.sum(self.p_con))


def mr_combiner(H):
    return H


def _hermitize(A):
    return 0.5 * (A + np.swapaxes(A.conj(), -1, -2))


def log2det_sinr(E: np.ndarray, Psi: np.ndarray) -> float:
    """``log2 |I + E^H Psi^{-1} E|`` with a trace-scaled ridge on ``Psi``."""
    n = Psi.shape[0]
    if not np.any(E):
        return 0.0
    Psi = _hermitize(Psi)
    tr = float(np.trace(Psi).real)
    if not math.isfinite(tr) or tr <= 0:
        raise NumericalError(f"interference-plus-noise matrix has trace {tr!r}")
    Psi = Psi + (REG_EPS * tr / n) * np.eye(n)
    try:
        X = np.linalg.solve(Psi, E)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Psi (trace {tr:.3e})") from exc
    M = np.eye(E.shape[1]) + E.conj().T @ X
    sign, logdet = np.linalg.slogdet(_hermitize(M))
    if not np.isfinite(logdet) or sign.real <= 0:
        raise NumericalError(f"non-positive determinant (sign {sign}, Psi trace {tr:.3e})")
    return max(float(logdet) / math.log(2.0), 0.0)


# --- channel sampling -------------------------------------------------------

def _stacked_bases(scenario):
    Ur = np.stack([scenario.ap_basis(m).U for m in range(scenario.n_aps)])
    Us = np.stack([scenario.ue_basis(k).U for k in range(scenario.n_ues)])
    return Ur, Us


def sample_channels(scenario, n: int, rng: np.random.Generator, aps=None, ues=None) -> np.ndarray:
    """Draw ``n`` i.i.d. channel sets, shape ``(n, |aps|, |ues|, N_r, N_s)``."""
    aps = np.arange(scenario.n_aps) if aps is None else np.asarray(aps)
    ues = np.arange(scenario.n_ues) if ues is None else np.asarray(ues)
    Ur, Us = _stacked_bases(scenario)
    Ur, Us = Ur[aps], Us[ues]
    sigma = scenario.profile.sigma
    shape = (n, len(aps), len(ues)) + sigma.shape
    W = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    X = sigma * W
    scale = math.sqrt(scenario.n_rx * scenario.n_tx)
    beta = scenario.beta[np.ix_(aps, ues)]
    tmp = np.einsum("mri,nmkij->nmkrj", Ur, X, optimize=True)
    H = np.einsum("nmkrj,ksj->nmkrs", tmp, Us.conj(), optimize=True)
    return H * (scale * beta)[None, :, :, None, None]


# --- Monte-Carlo evaluator --------------------------------------------------

def se_theorem1_mc(scenario, assign: ApAssignment, powers: TxPower, noise: NoiseModel,
                   n_samples: int = 10_000, seed: SeedLike = None, backend=None,
                   chunk: int = MC_CHUNK) -> SeResult:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = as_generator(seed)
    D = assign.D
    K, Ns = scenario.n_ues, scenario.n_tx
    pbar = powers.pbar()
    gram = np.zeros((K, Ns, Ns), complex)
    psi = np.zeros((K, Ns, Ns), complex)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        H = sample_channels(scenario, n, rng)
        g, p = kernels.mr_moment_sums(H, D, pbar, backend=backend)
        gram += g
        psi += p
        done += n
    gram /= n_samples
    psi /= n_samples
    se = np.zeros(K)
    for k in range(K):
        E = gram[k] @ powers.matrix(k)
        Psi = psi[k] - E @ E.conj().T + noise.sigma2 * gram[k]
        se[k] = log2det_sinr(E, Psi)
    return SeResult(se, "monte-carlo")


# --- moments ----------------------------------------------------------------

def moments_Z(beta: float, profile, basis_s, n_rx: int) -> np.ndarray:
    U = basis_s.U
    col = profile.sigma2.sum(axis=0)
    return beta ** 2 * n_rx * U.shape[0] * (U * col) @ U.conj().T


def moments_T_mc(scenario, k: int, l: int, m: int, mp: int, powers: TxPower,
                 n_samples: int = 10_000, seed: SeedLike = None, backend=None) -> np.ndarray:
    """Sample mean of ``H_mk^H H_ml Pbar_l H_m'l^H H_m'k``."""
    rng = as_generator(seed)
    pairs = []
    for pair in ((m, k), (m, l), (mp, l), (mp, k)):
        if pair not in pairs:
            pairs.append(pair)
    P = powers.pbar()[l]
    total = np.zeros((scenario.n_tx, scenario.n_tx), complex)
    done = 0
    while done < n_samples:
        n = min(MC_CHUNK, n_samples - done)
        draws = {}
        for a, u in pairs:
            draws[(a, u)] = sample_channels(scenario, n, rng, aps=[a], ues=[u])[:, 0, 0]
        total += kernels.fourth_moment_sum(draws[(m, k)], draws[(m, l)], draws[(mp, l)],
                                           draws[(mp, k)], P, backend=backend)
        done += n
    return total / n_samples


def _profile_terms(profile):
    s2 = profile.sigma2
    colsum = s2.sum(axis=0)
    return s2, colsum


def moments_T_closed(scenario, k: int, l: int, m: int, mp: int, powers: TxPower) -> np.ndarray:
    """Exact fourth-order moment under the Gaussian wavenumber model.

    Uses ``U_r^H U_r = I``, ``U_s^H U_s = I`` and the pairing rule for
    circular complex Gaussians.
    """
    Ns = scenario.n_tx
    if k != l and m != mp:
        return np.zeros((Ns, Ns), complex)
    s2, colsum = _profile_terms(scenario.profile)
    beta = scenario.beta
    NrNs = scenario.n_rx * Ns
    Uk = scenario.ue_basis(k).U
    Pbar = powers.pbar()
    if k == l and m != mp:
        Zm = moments_Z(beta[m, k], scenario.profile, scenario.ue_basis(k), scenario.n_rx)
        Zmp = moments_Z(beta[mp, k], scenario.profile, scenario.ue_basis(k), scenario.n_rx)
        return Zm @ Pbar[k] @ Zmp
    if k != l:
        Ul = scenario.ue_basis(l).U
        b = np.real(np.einsum("ri,rs,si->i", Ul.conj(), Pbar[l], Ul))
        g = s2.T @ (s2 @ b)
        c = (beta[m, k] * beta[m, l]) ** 2 * NrNs ** 2
        return c * (Uk * g) @ Uk.conj().T
    B = Uk.conj().T @ Pbar[k] @ Uk
    g = s2.T @ (s2 @ np.real(np.diag(B)))
    inner = colsum[:, None] * B * colsum[None, :] + np.diag(g)
    return beta[m, k] ** 4 * NrNs ** 2 * Uk @ inner @ Uk.conj().T


def closed_form_moments(scenario, powers: TxPower):
    """All ``Z`` (M, K, Ns, Ns) and ``T`` (K, K, M, M, Ns, Ns) in closed form."""
    M, K, Ns = scenario.n_aps, scenario.n_ues, scenario.n_tx
    Z = np.zeros((M, K, Ns, Ns), complex)
    for m in range(M):
        for k in range(K):
            Z[m, k] = moments_Z(scenario.beta[m, k], scenario.profile,
                                scenario.ue_basis(k), scenario.n_rx)
    T = np.zeros((K, K, M, M, Ns, Ns), complex)
    for k in range(K):
        for l in range(K):
            for m in range(M):
                for mp in range(M):
                    if k != l and m != mp:
                        continue
                    T[k, l, m, mp] = moments_T_closed(scenario, k, l, m, mp, powers)
    return Z, T


def se_closed_mr(Z: np.ndarray, T: np.ndarray, assign: ApAssignment, powers: TxPower,
                 noise: NoiseModel) -> SeResult:
    D = assign.D.astype(float)
    K = D.shape[1]
    se = np.zeros(K)
    for k in range(K):
        Zsum = np.einsum("m,mij->ij", D[:, k], Z[:, k])
        E = Zsum @ powers.matrix(k)
        Psi = np.einsum("ml,nl,lmnij->ij", D, D, T[k])
        Psi = Psi - E @ E.conj().T + noise.sigma2 * Zsum
        se[k] = log2det_sinr(E, Psi)
    return SeResult(se, "closed-form")


def se_closed_fast(scenario, assign: ApAssignment, powers: TxPower, noise: NoiseModel) -> SeResult:
    """Closed-form SE for uniform per-antenna power, diagonalized per stream.

    With ``P_k`` a scaled identity, the self-term cross products cancel the
    ``E E^H`` subtraction and every matrix shares the eigenbasis ``U_s,k``,
    so the log-determinant splits into ``n_s`` scalar SINRs.
    """
    D = assign.D.astype(float)
    s2, colsum = _profile_terms(scenario.profile)
    Ns = scenario.n_tx
    NrNs = scenario.n_rx * Ns
    beta2 = scenario.beta ** 2
    q = powers.p / Ns
    a = NrNs * np.einsum("mk,mk->k", D, beta2)            # (K,)
    w = np.einsum("ml,mk,ml->kl", D, beta2, beta2)         # (K, K)
    g_unit = s2.T @ s2.sum(axis=1)                         # (n_s,)
    interf = NrNs ** 2 * (w @ q)[:, None] * g_unit[None, :]
    noise_t = noise.sigma2 * a[:, None] * colsum[None, :]
    signal = q[:, None] * (a[:, None] * colsum[None, :]) ** 2
    denom = interf + noise_t
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(signal > 0, signal / denom, 0.0)
    if not np.all(np.isfinite(sinr)):
        raise NumericalError("non-finite SINR in closed-form SE")
    return SeResult(np.log2(1.0 + sinr).sum(axis=1), "closed-form")


# --- power and EE -----------------------------------------------------------

def power_breakdown(scenario, assign: ApAssignment, coop: CoopGraph, powers: TxPower,
                    se: SeResult, params: PowerParams, arch: str = "proposed") -> PowerBreakdown:
    n_rx, n_tx = scenario.n_rx, scenario.n_tx
    D = assign.D.astype(float)
    M, K = D.shape
    sizes = D.sum(axis=0)
    degrees = coop.O.sum(axis=1).astype(float)
    if params.c_con is not None:
        c_con = params.c_con
    else:
        c_con = complexity.clustering_ops(arch, M, K, float(sizes.mean()), float(degrees.mean())) / K
    if params.c_cpu is not None:
        c_cpu = params.c_cpu
    else:
        # MR combining: one complex MAC per antenna pair and served link
        c_cpu = 8.0 * n_rx * n_tx * float(sizes.sum())
    p_ap = n_rx * params.p_c_ap + D.sum(axis=1) * params.p_p_ap + params.p_fh_ap
    p_ue = n_tx * params.p_c_ue + powers.trace()
    p_con = n_tx * degrees * params.p_con_ue + params.bandwidth * c_con / params.l_sys
    p_cpu = (params.p_cpu_fix + float(np.sum(se.se)) * (params.p_en + params.p_de)
             + params.bandwidth * c_cpu / params.l_sys)
    return PowerBreakdown(p_ap, p_ue, p_con, float(p_cpu), float(c_con), float(c_cpu), n_rx, params)


def energy_efficiency(se: SeResult, p_total: float) -> float:
    if not p_total > 0:
        raise ValueError("total power must be > 0")
    return float(np.sum(se.se)) / p_total


def attributed_power(breakdown: PowerBreakdown, assign: ApAssignment) -> np.ndarray:
    """Per-UE share of the total power; sums to ``p_total``.

    Local terms go to their UE, serving-AP processing to the served UE and
    the remaining AP and CPU terms are split equally.
    """
    prm = breakdown.params
    K = assign.D.shape[1]
    M = assign.D.shape[0]
    shared = breakdown.p_cpu + M * (breakdown.n_rx * prm.p_c_ap + prm.p_fh_ap)
    return (breakdown.p_ue + breakdown.p_con + assign.cluster_sizes * prm.p_p_ap + shared / K)


def per_ue_ee(k: int, se: SeResult, breakdown: PowerBreakdown, assign: ApAssignment) -> float:
    return float(se.se[k] / attributed_power(breakdown, assign)[k])
