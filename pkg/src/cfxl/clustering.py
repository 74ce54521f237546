"""User-centric AP clustering and the UE-UE cooperation graph."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True, eq=False)
class ApAssignment:
    D: np.ndarray  # (M, K) bool, AP m serves UE k

    @property
    def clusters(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.D[:, k]) for k in range(self.D.shape[1])]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self.D.sum(axis=0)


@dataclass(frozen=True, eq=False)
class CoopGraph:
    O: np.ndarray  # (K, K) bool

    @property
    def degrees(self) -> np.ndarray:
        return self.O.sum(axis=1)

    @property
    def density(self) -> float:
        return float(self.O.mean())


def threshold_cluster(beta, thresholds) -> ApAssignment:
    """Serve UE k by every AP with ``beta[m, k] >= thresholds[k]``.

    Two deterministic repairs follow: a UE left without APs gets its best
    AP, and an AP left without UEs serves its best UE. Ties go to the
    lower index.
    """
    beta = np.asarray(beta, dtype=float)
    M, K = beta.shape
    thr = np.broadcast_to(np.asarray(thresholds, dtype=float), (K,))
    D = beta >= thr[None, :]
    empty = ~D.any(axis=0)
    if empty.any():
        ks = np.flatnonzero(empty)
        D[np.argmax(beta[:, ks], axis=0), ks] = True
    idle = ~D.any(axis=1)
    if idle.any():
        ms = np.flatnonzero(idle)
        D[ms, np.argmax(beta[ms, :], axis=1)] = True
    return ApAssignment(D)


def coop_indicator(assign: ApAssignment) -> CoopGraph:
    D = assign.D.astype(np.int64)
    O = (D.T @ D) >= 1
    np.fill_diagonal(O, True)
    return CoopGraph(O)


@dataclass(frozen=True)
class ConstraintReport:
    cluster_ok: np.ndarray      # sum_m D[m,k] == |A_k|
    sharing_ok: np.ndarray      # sum_k' O[k,k'] <= 1 + sum_k' sum_m D[m,k] D[m,k']
    consistency_ok: np.ndarray  # O agrees with the shared-AP indicator

    @property
    def per_ue(self) -> np.ndarray:
        return self.cluster_ok & self.sharing_ok & self.consistency_ok

    @property
    def all_pass(self) -> bool:
        return bool(self.per_ue.all())


def validate_constraints(assign: ApAssignment, coop: CoopGraph) -> ConstraintReport:
    D = assign.D.astype(np.int64)
    O = coop.O.astype(np.int64)
    sizes = np.array([len(c) for c in assign.clusters])
    cluster_ok = (D.sum(axis=0) == sizes) & (sizes >= 1)
    shared = D.T @ D
    sharing_ok = O.sum(axis=1) <= 1 + shared.sum(axis=1)
    expected = (shared >= 1) | np.eye(len(O), dtype=bool)
    consistency_ok = np.all((O == 1) == expected, axis=1)
    return ConstraintReport(cluster_ok, sharing_ok, consistency_ok)
