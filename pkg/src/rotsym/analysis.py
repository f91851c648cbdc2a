"""State metrics: Wigner function, negativity, fidelity, parity and rotation symmetry.

Phase-space convention: hbar = 1, ``a = (q + i p) / sqrt(2)``, vacuum
variance 1/2 and ``W`` normalized so that its integral over ``dq dp`` is 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre, gammaln

from .fock import DensityOperator, PureState

__all__ = [
    "WignerGrid",
    "GridCoverageError",
    "as_density",
    "default_grid",
    "wigner",
    "wigner_negativity",
    "wln",
    "fidelity",
    "mean_photon",
    "parity",
    "symmetry_order",
    "super_parity_expectation",
]


class GridCoverageError(ValueError):
    """The grid misses a noticeable part of the Wigner function."""


def as_density(state) -> np.ndarray:
    if isinstance(state, DensityOperator):
        return state.matrix
    if isinstance(state, PureState):
        v = state.amplitudes
        return np.outer(v, v.conj())
    a = np.asarray(state, dtype=complex)
    if a.ndim == 1:
        return np.outer(a, a.conj())
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        return a
    raise ValueError(f"cannot interpret array of shape {a.shape} as a state")


def _populations(state) -> np.ndarray:
    if isinstance(state, PureState):
        return np.abs(state.amplitudes) ** 2
    a = np.asarray(state.matrix if isinstance(state, DensityOperator) else state)
    if a.ndim == 1:
        return np.abs(a) ** 2
    return np.real(np.diag(a))


def mean_photon(state) -> float:
    p = _populations(state)
    return float(np.dot(np.arange(p.size), p) / p.sum())


def parity(state, tol: float = 1e-10) -> int | None:
    """+1 (even) or -1 (odd) when the population has definite parity, else ``None``."""
    p = _populations(state)
    even, odd = p[0::2].sum(), p[1::2].sum()
    total = even + odd
    if total <= 0:
        return None
    if odd <= tol * total:
        return 1
    if even <= tol * total:
        return -1
    return None


def super_parity_expectation(state, k: int) -> complex:
    """``<exp(2 pi i n / K)>``."""
    rho = as_density(state)
    phases = np.exp(2j * np.pi * np.arange(rho.shape[0]) / k)
    return complex(np.dot(phases, np.diag(rho)) / np.trace(rho))


def symmetry_order(state, max_order: int = 8, tol: float = 1e-9) -> int | None:
    """Largest K <= ``max_order`` such that the state is invariant under rotation by ``2 pi / K``.

    Invariance holds when every coherence ``rho[m, n]`` above ``tol`` has
    ``m - n`` divisible by K, equivalently when the Fock support of a pure
    state repeats every K levels from its minimum. States without coherences
    (single Fock levels, Fock mixtures) have continuous symmetry and report
    ``None``, as do states with no symmetry beyond K = 1.
    """
    rho = as_density(state)
    scale = np.max(np.abs(rho))
    if scale == 0:
        return None
    m, n = np.nonzero(np.abs(rho) > tol * scale)
    diffs = np.abs(m - n)
    diffs = diffs[diffs > 0]
    if diffs.size == 0:
        return None
    g = int(np.gcd.reduce(diffs))
    for k in range(min(max_order, g), 1, -1):
        if g % k == 0:
            return k
    return None


def fidelity(rho, sigma, tol: float = 1e-9) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`` for unit-trace states."""
    pure_r = isinstance(rho, PureState) or np.ndim(getattr(rho, "matrix", rho)) == 1
    pure_s = isinstance(sigma, PureState) or np.ndim(getattr(sigma, "matrix", sigma)) == 1
    if pure_r or pure_s:
        vec, other = (rho, sigma) if pure_r else (sigma, rho)
        v = vec.amplitudes if isinstance(vec, PureState) else np.asarray(vec, complex)
        m = as_density(other)
        if m.shape[0] != v.size:
            raise ValueError("state dimensions differ")
        return float(np.clip(np.real(np.vdot(v, m @ v)), 0.0, 1.0))
    a, b = as_density(rho), as_density(sigma)
    if a.shape != b.shape:
        raise ValueError("state dimensions differ")
    # F = ||sqrt(rho) sqrt(sigma)||_1^2, stable for rank-deficient inputs
    roots = []
    for m in (a, b):
        w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
        if w.min() < -tol:
            raise ValueError("input is not positive semidefinite")
        roots.append((u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T)
    sv = np.linalg.svd(roots[0] @ roots[1], compute_uv=False)
    return float(np.clip(np.sum(sv) ** 2, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``values[i, j] = W(q[i], p[j])``."""

    q: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @property
    def q_range(self) -> tuple[float, float]:
        return float(self.q[0]), float(self.q[-1])

    @property
    def p_range(self) -> tuple[float, float]:
        return float(self.p[0]), float(self.p[-1])

    @property
    def resolution(self) -> int:
        return self.q.size

    def integral(self, absolute: bool = False) -> float:
        f = np.abs(self.values) if absolute else self.values
        return float(trapezoid(trapezoid(f, self.p, axis=1), self.q))

    def moment(self, func) -> float:
        qq, pp = np.meshgrid(self.q, self.p, indexing="ij")
        return float(trapezoid(trapezoid(self.values * func(qq, pp), self.p, axis=1), self.q))

    def to_csv(self, path) -> None:
        qq, pp = np.meshgrid(self.q, self.p, indexing="ij")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "p", "W"])
            for q, p, w in zip(qq.ravel(), pp.ravel(), self.values.ravel()):
                writer.writerow([f"{q:.12g}", f"{p:.12g}", f"{w:.12g}"])

    def to_record(self) -> dict:
        return {
            "convention": {"hbar": 1, "normalization": "integral W dq dp = 1"},
            "q_range": list(self.q_range),
            "p_range": list(self.p_range),
            "resolution": self.resolution,
            "min": float(self.values.min()),
            "values": self.values.tolist(),
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record()))


def default_grid(state=None, half_width: float = 6.0, points: int = 241) -> tuple[np.ndarray, np.ndarray]:
    """Square grid; widened at constant spacing when the mean photon number exceeds 8."""
    if state is not None and mean_photon(state) > 8:
        pops = _populations(state)
        top = int(np.nonzero(pops > 1e-12 * pops.max())[0].max())
        spacing = 2 * half_width / (points - 1)
        half_width = float(math.ceil(math.sqrt(2 * top + 1) + 3))
        points = int(round(2 * half_width / spacing)) + 1
    axis = np.linspace(-half_width, half_width, points)
    return axis, axis.copy()


def wigner(state, q: np.ndarray | None = None, p: np.ndarray | None = None, tol: float = 1e-14) -> WignerGrid:
    """Wigner function from the Fock-basis Laguerre kernel.

    ``W = (1/pi) sum_{m,n} rho[n, m] <m| D(2 alpha) (-1)^N |n>`` with
    ``alpha = (q + i p) / sqrt(2)``.
    """
    rho = as_density(state)
    if q is None or p is None:
        dq, dp = default_grid(rho)
        q = dq if q is None else q
        p = dp if p is None else p
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    qq, pp = np.meshgrid(q, p, indexing="ij")
    alpha2 = (qq + 1j * pp) * math.sqrt(2.0)  # 2 alpha
    r2 = np.abs(alpha2) ** 2  # 4 |alpha|^2
    log_r = 0.5 * np.log(np.where(r2 > 0, r2, 1.0))
    phase = np.exp(1j * np.angle(alpha2))
    gauss = -0.5 * r2
    w = np.zeros(qq.shape)
    scale = np.max(np.abs(rho))
    dim = rho.shape[0]
    for n in range(dim):
        if abs(rho[n, n]) > tol * scale:
            w += (-1) ** n * rho[n, n].real * np.exp(gauss) * eval_genlaguerre(n, 0, r2)
        for m in range(n + 1, dim):
            c = rho[n, m]
            if abs(c) <= tol * scale:
                continue
            d = m - n
            # sqrt(n!/m!) |2 alpha|^d exp(-2|alpha|^2), assembled in log space
            mag = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)) + d * log_r + gauss)
            if d and np.any(r2 == 0):
                mag = np.where(r2 > 0, mag, 0.0)
            kern = (-1) ** n * mag * phase ** d * eval_genlaguerre(n, d, r2)
            w += 2.0 * np.real(c * kern)
    return WignerGrid(q, p, w / (math.pi * np.real(np.trace(rho))))


def _check_coverage(grid: WignerGrid, tol: float = 1e-3) -> None:
    total = grid.integral()
    if abs(total - 1.0) > tol:
        raise GridCoverageError(f"Wigner integral {total:.6f} deviates from 1; widen the grid")


def wigner_negativity(grid: WignerGrid) -> float:
    """Minimum of W over the grid."""
    _check_coverage(grid)
    return float(grid.values.min())


def wln(grid: WignerGrid) -> float:
    """Wigner log-negativity ``ln(integral |W|)``."""
    _check_coverage(grid)
    return math.log(grid.integral(absolute=True))
