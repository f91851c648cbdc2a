"""Amplitude-damping loss channel and lossy photon-number-resolving detection.

Dark counts are not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .fock import DensityOperator, ModeOperator

__all__ = [
    "LossParam",
    "DetectorModel",
    "kraus_operator",
    "apply_loss",
    "loss_probability",
    "detection_matrix",
    "pnr_povm",
]


@dataclass(frozen=True)
class LossParam:
    """Loss ``gamma`` (attenuation coefficient times length) and Kraus cutoff.

    ``k_max=None`` keeps every Kraus operator supported by the truncation.
    """

    gamma: float
    k_max: int | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.k_max is not None and self.k_max < 0:
            raise ValueError(f"k_max must be non-negative, got {self.k_max}")

    @property
    def transmissivity(self) -> float:
        return float(np.exp(-self.gamma))


@dataclass(frozen=True)
class DetectorModel:
    eta: float
    n_max: int

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"detector efficiency must be in [0, 1], got {self.eta}")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")


def kraus_operator(loss: LossParam, k: int, dim: int | None = None) -> ModeOperator:
    """``E_k = sqrt((1-e^-g)^k / k!) e^{-g n/2} a^k`` on ``dim`` Fock levels."""
    if k < 0:
        raise ValueError(f"Kraus index must be non-negative, got {k}")
    if dim is None:
        if loss.k_max is None:
            raise ValueError("need dim when k_max is unset")
        dim = loss.k_max + 1
    if loss.k_max is not None and k > loss.k_max:
        raise ValueError(f"k={k} exceeds k_max={loss.k_max}")
    m = np.zeros((dim, dim))
    if k < dim:
        n = np.arange(k, dim)
        if loss.gamma == 0.0:
            vals = np.ones(n.size) if k == 0 else np.zeros(n.size)
        else:
            # <n-k| E_k |n> = sqrt(C(n,k) (1-T)^k T^(n-k)), T = e^-gamma
            log_v = 0.5 * (gammaln(n + 1) - gammaln(n - k + 1) - gammaln(k + 1)
                           + xlogy(k, -np.expm1(-loss.gamma)) - loss.gamma * (n - k))
            vals = np.exp(log_v)
        m[n - k, n] = vals
    return ModeOperator(m, (dim,))


def _kraus_set(loss: LossParam, dim: int) -> list[np.ndarray]:
    k_top = dim - 1 if loss.k_max is None else min(loss.k_max, dim - 1)
    return [kraus_operator(LossParam(loss.gamma), k, dim).matrix for k in range(k_top + 1)]


def apply_loss(rho: DensityOperator, loss: LossParam) -> DensityOperator:
    if len(rho.mode_dims) != 1:
        raise ValueError("apply_loss acts on a single mode")
    out = np.zeros_like(rho.matrix)
    for e in _kraus_set(loss, rho.dim):
        out += e @ rho.matrix @ e.conj().T
    return DensityOperator(0.5 * (out + out.conj().T), rho.mode_dims)


def loss_probability(rho: DensityOperator, loss: LossParam, k: int) -> float:
    e = kraus_operator(LossParam(loss.gamma), k, rho.dim).matrix
    return float(np.trace(e.conj().T @ e @ rho.matrix).real)


def detection_matrix(eta: float, dim: int) -> np.ndarray:
    """``P[n, m] = p(n|m)``, the probability of registering n of m incident photons."""
    n = np.arange(dim)[:, None]
    m = np.arange(dim)[None, :]
    k = np.clip(m - n, 0, None)
    log_p = (gammaln(m + 1) - gammaln(n + 1) - gammaln(k + 1) + xlogy(n, eta) + xlog1py(k, -eta))
    return np.where(n <= m, np.exp(log_p), 0.0)


def pnr_povm(det: DetectorModel, n: int) -> ModeOperator:
    """``Pi_n = sum_{m>=n} C(m,n) eta^n (1-eta)^(m-n) |m><m|`` up to ``det.n_max``."""
    if not 0 <= n <= det.n_max:
        raise ValueError(f"outcome {n} outside 0..{det.n_max}")
    p = detection_matrix(det.eta, det.n_max + 1)[n]
    return ModeOperator(np.diag(p), (det.n_max + 1,), number_conserving=True)
