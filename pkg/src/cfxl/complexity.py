"""Operation-count formulas for the compared learning architectures."""
from __future__ import annotations

from typing import Sequence

ARCHITECTURES = ("proposed", "decentralized", "ctde", "centralized",
                 "kmeans", "r_variable", "q_variable")

FORMULAS = {
    "decentralized": ("N_B*K",
                      "N_B*K^2*d_a*SQa + (N_B*K^2 + K*d_a)*SQc"),
    "ctde": ("M*K^2",
             "M*K^2*d_a*SQa + (M*K^3 + K^2*d_a)*SQc"),
    "centralized": ("M*K^2",
                    "M*K^3*d_a*SQa + (M*K^3 + K^2*d_a)*SQc"),
    "kmeans": ("N_K*K^2 + N_K*N_B*K",
               "N_B*K^2*d_a*SQa + (N_K*N_B*K^2 + N_K*K*d_a)*SQc"),
    "r_variable": ("K^2 + N_R*N_B*K",
                   "N_B*K^2*d_a*SQa + (N_R*N_B*K^2 + N_R*K*d_a)*SQc"),
    "q_variable": ("N_Q^2*K^2 + N_Q*N_B*K",
                   "N_B*K^2*d_a*SQa + (N_Q*N_B*K^2 + N_Q*K*d_a)*SQc"),
    "proposed": ("N_P*K^2 + N_P*N_B*K",
                 "(K^3*d_a1 + N_B*K^2*d_a2)*SQa + (K^4 + K^2*d_a1 + N_P*N_B*K^2 + N_P*K*d_a2)*SQc"),
}


def _check(arch: str) -> None:
    if arch not in FORMULAS:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def sum_sq(widths: Sequence[int]) -> int:
    return int(sum(int(q) ** 2 for q in widths))


def clustering_ops(arch: str, M: int, K: int, n_b: float, n_share: float) -> float:
    """Cooperative-clustering operation count.

    ``n_b`` is the mean number of serving APs per UE and ``n_share`` the
    mean number of UEs each UE exchanges information with.
    """
    _check(arch)
    if arch == "decentralized":
        return n_b * K
    if arch in ("ctde", "centralized"):
        return M * K ** 2
    if arch == "r_variable":
        return K ** 2 + n_share * n_b * K
    if arch == "q_variable":
        return n_share ** 2 * K ** 2 + n_share * n_b * K
    # kmeans and proposed share the form
    return n_share * K ** 2 + n_share * n_b * K


def network_ops(arch: str, M: int, K: int, n_b: float, n_share: float,
                actor_widths=(128, 64), critic_widths=(128, 64),
                d_a: int = 3, d_a1: int = 1, d_a2: int = 3) -> float:
    _check(arch)
    sqa, sqc = sum_sq(actor_widths), sum_sq(critic_widths)
    if arch == "decentralized":
        return n_b * K ** 2 * d_a * sqa + (n_b * K ** 2 + K * d_a) * sqc
    if arch == "ctde":
        return M * K ** 2 * d_a * sqa + (M * K ** 3 + K ** 2 * d_a) * sqc
    if arch == "centralized":
        return M * K ** 3 * d_a * sqa + (M * K ** 3 + K ** 2 * d_a) * sqc
    if arch == "proposed":
        return ((K ** 3 * d_a1 + n_b * K ** 2 * d_a2) * sqa
                + (K ** 4 + K ** 2 * d_a1 + n_share * n_b * K ** 2 + n_share * K * d_a2) * sqc)
    return n_b * K ** 2 * d_a * sqa + (n_share * n_b * K ** 2 + n_share * K * d_a) * sqc
