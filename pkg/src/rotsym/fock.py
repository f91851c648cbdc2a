"""Truncated Fock-space states and operators.

Amplitudes are stored as flat row-major vectors indexed by mixed radix over
``mode_dims``. Two-mode number-conserving unitaries are stored as blocks of
fixed total photon number and applied block by block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

__all__ = [
    "TruncationConfig",
    "TruncationError",
    "PureState",
    "DensityOperator",
    "ModeOperator",
    "annihilator",
    "creator",
    "number_operator",
    "identity",
    "fock_state",
    "tensor",
    "beamsplitter",
    "apply_two_mode_unitary",
    "partial_trace",
    "truncation_health",
]


class TruncationError(ValueError):
    """Raised when a state does not fit its Fock cutoff."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TruncationConfig:
    n_max: int
    tail_tolerance: float = 1e-8

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @classmethod
    def for_squeezing(cls, r: float, tail_tolerance: float = 1e-8, minimum: int = 1) -> "TruncationConfig":
        """Smallest cutoff whose thermal tail ``tanh(r)**(2(n_max+1))`` is below tolerance."""
        x2 = np.tanh(r) ** 2
        if x2 == 0.0:
            return cls(max(minimum, 1), tail_tolerance)
        n = int(np.ceil(np.log(tail_tolerance) / np.log(x2))) - 1
        return cls(max(n, minimum, 1), tail_tolerance)


@dataclass(frozen=True, eq=False)
class PureState:
    """Amplitude vector over one or more truncated modes.

    ``norm_probability`` carries the squared norm of a subnormalized branch;
    for freshly constructed states it is the squared norm of ``amplitudes``.
    """

    mode_dims: tuple[int, ...]
    amplitudes: np.ndarray
    norm_probability: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if any(d < 1 for d in dims):
            raise ValueError("mode dimensions must be positive")
        if int(np.prod(dims)) != amps.size:
            raise ValueError(f"mode_dims {dims} do not match {amps.size} amplitudes")
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "amplitudes", _readonly(amps))
        if self.norm_probability is None:
            object.__setattr__(self, "norm_probability", float(np.vdot(amps, amps).real))
        if not (0.0 <= self.norm_probability <= 1.0 + 1e-12):
            raise ValueError(f"norm_probability {self.norm_probability} outside [0, 1]")

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.mode_dims)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm() ** 2 - 1.0) < tol

    def normalized(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.mode_dims, self.amplitudes / n, 1.0)

    def to_record(self) -> dict:
        return {
            "mode_dims": list(self.mode_dims),
            "amplitudes_re": self.amplitudes.real.tolist(),
            "amplitudes_im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "PureState":
        amps = np.asarray(record["amplitudes_re"], float) + 1j * np.asarray(record["amplitudes_im"], float)
        return cls(tuple(record["mode_dims"]), amps)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    mode_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if not np.allclose(m, m.conj().T, atol=1e-10 * scale, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        dims = (m.shape[0],) if self.mode_dims is None else tuple(int(d) for d in self.mode_dims)
        if int(np.prod(dims)) != m.shape[0]:
            raise ValueError(f"mode_dims {dims} do not match dimension {m.shape[0]}")
        object.__setattr__(self, "matrix", _readonly(m))
        object.__setattr__(self, "mode_dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityOperator":
        tr = self.trace()
        if tr <= 0:
            raise ValueError("cannot normalize an operator with non-positive trace")
        return DensityOperator(self.matrix / tr, self.mode_dims)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return abs(self.trace() - 1.0) < 1e-10 and self.eigenvalues().min() >= -tol

    def expectation(self, op: "ModeOperator | np.ndarray") -> complex:
        mat = op.matrix if isinstance(op, ModeOperator) else np.asarray(op)
        return complex(np.trace(mat @ self.matrix))

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityOperator":
        v = state.amplitudes
        return cls(np.outer(v, v.conj()), state.mode_dims)


def _total_photon_labels(mode_dims: Sequence[int]) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(d) for d in mode_dims], indexing="ij")
    return np.sum(grids, axis=0).reshape(-1)


class ModeOperator:
    """Operator on one or more truncated modes.

    Number-conserving two-mode operators keep a ``blocks`` mapping from total
    photon number ``s`` to ``(first_mode_counts, block_matrix)`` and are
    applied blockwise. The dense ``matrix`` is materialized on demand.
    """

    def __init__(self, matrix=None, mode_dims=None, number_conserving: bool = False, *, blocks=None):
        if matrix is None and blocks is None:
            raise ValueError("need a matrix or blocks")
        if matrix is not None:
            matrix = np.array(matrix, dtype=complex)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError("operator matrix must be square")
            mode_dims = (matrix.shape[0],) if mode_dims is None else tuple(int(d) for d in mode_dims)
            if int(np.prod(mode_dims)) != matrix.shape[0]:
                raise ValueError(f"mode_dims {mode_dims} do not match dimension {matrix.shape[0]}")
            self.__dict__["matrix"] = _readonly(matrix)
        elif mode_dims is None:
            raise ValueError("blocks require mode_dims")
        self.mode_dims = tuple(int(d) for d in mode_dims)
        self.number_conserving = bool(number_conserving)
        self._blocks = blocks
        if self.number_conserving and matrix is not None:
            labels = _total_photon_labels(self.mode_dims)
            off = labels[:, None] != labels[None, :]
            if np.any(np.abs(matrix[off]) > 1e-12):
                raise ValueError("matrix is not block diagonal in total photon number")

    @property
    def dim(self) -> int:
        return int(np.prod(self.mode_dims))

    @cached_property
    def matrix(self) -> np.ndarray:
        # only reached when constructed from blocks
        di, dj = self.mode_dims
        m = np.zeros((di * dj, di * dj), dtype=complex)
        for s, (ni, block) in self._blocks.items():
            idx = ni * dj + (s - ni)
            m[np.ix_(idx, idx)] = block
        return _readonly(m)

    @property
    def blocks(self) -> dict:
        if self._blocks is None:
            if not self.number_conserving or len(self.mode_dims) != 2:
                raise ValueError("blocks are defined for number-conserving two-mode operators")
            di, dj = self.mode_dims
            blocks = {}
            for s in range(di + dj - 1):
                ni = np.arange(max(0, s - dj + 1), min(s, di - 1) + 1)
                idx = ni * dj + (s - ni)
                blocks[s] = (ni, self.matrix[np.ix_(idx, idx)])
            self._blocks = blocks
        return self._blocks

    def dag(self) -> "ModeOperator":
        return ModeOperator(self.matrix.conj().T, self.mode_dims, self.number_conserving)

    def __matmul__(self, other):
        if isinstance(other, ModeOperator):
            if other.mode_dims != self.mode_dims:
                raise ValueError("operator dimensions differ")
            return ModeOperator(self.matrix @ other.matrix, self.mode_dims,
                                self.number_conserving and other.number_conserving)
        if isinstance(other, PureState):
            # images such as a|n> are not states in general, so return raw amplitudes
            if other.dim != self.dim:
                raise ValueError("operator and state dimensions differ")
            return self.matrix @ other.amplitudes
        return self.matrix @ np.asarray(other)

    def __repr__(self):
        return f"ModeOperator(mode_dims={self.mode_dims}, number_conserving={self.number_conserving})"


def _dim(cfg_or_dim) -> int:
    return cfg_or_dim.dim if isinstance(cfg_or_dim, TruncationConfig) else int(cfg_or_dim)


def annihilator(cfg: TruncationConfig | int) -> ModeOperator:
    d = _dim(cfg)
    return ModeOperator(np.diag(np.sqrt(np.arange(1, d)), k=1), (d,))


def creator(cfg: TruncationConfig | int) -> ModeOperator:
    return annihilator(cfg).dag()


def number_operator(cfg: TruncationConfig | int) -> ModeOperator:
    d = _dim(cfg)
    return ModeOperator(np.diag(np.arange(d, dtype=float)), (d,), number_conserving=True)


def identity(cfg: TruncationConfig | int) -> ModeOperator:
    d = _dim(cfg)
    return ModeOperator(np.eye(d), (d,), number_conserving=True)


def fock_state(n: int, cfg: TruncationConfig | int) -> PureState:
    d = _dim(cfg)
    if not 0 <= n < d:
        raise ValueError(f"Fock level {n} outside cutoff {d - 1}")
    v = np.zeros(d, dtype=complex)
    v[n] = 1.0
    return PureState((d,), v)


def tensor(items: Iterable):
    """Kronecker product with mode order preserved left to right."""
    items = list(items)
    if not items:
        raise ValueError("nothing to tensor")
    if all(isinstance(x, PureState) for x in items):
        amps = items[0].amplitudes
        dims = items[0].mode_dims
        for x in items[1:]:
            amps = np.kron(amps, x.amplitudes)
            dims = dims + x.mode_dims
        return PureState(dims, amps)
    if all(isinstance(x, ModeOperator) for x in items):
        mat = items[0].matrix
        dims = items[0].mode_dims
        for x in items[1:]:
            mat = np.kron(mat, x.matrix)
            dims = dims + x.mode_dims
        return ModeOperator(mat, dims, all(x.number_conserving for x in items))
    raise TypeError("tensor needs all states or all operators, not a mixture")


def _bs_generator_block(s: int) -> np.ndarray:
    # basis |j, s-j>, j = 0..s; generator a^dag b - a b^dag
    g = np.zeros((s + 1, s + 1))
    for j in range(s):
        v = np.sqrt((j + 1) * (s - j))
        g[j + 1, j] += v
        g[j, j + 1] -= v
    return g


@lru_cache(maxsize=64)
def _bs_blocks(theta: float, di: int, dj: int) -> tuple:
    out = []
    for s in range(di + dj - 1):
        full = expm(theta * _bs_generator_block(s))
        ni = np.arange(max(0, s - dj + 1), min(s, di - 1) + 1)
        block = full[np.ix_(ni, ni)].astype(complex)
        out.append((s, _readonly(ni), _readonly(block)))
    return tuple(out)


def beamsplitter(theta: float, cfg_i: TruncationConfig | int, cfg_j: TruncationConfig | int | None = None) -> ModeOperator:
    """``exp[theta (a^dag b - a b^dag)]`` built block by block in total photon number.

    Blocks whose total exceeds a cutoff are the exact propagator restricted to
    the retained levels, so they are slightly subunitary.
    """
    di = _dim(cfg_i)
    dj = di if cfg_j is None else _dim(cfg_j)
    blocks = {s: (ni, b) for s, ni, b in _bs_blocks(float(theta), di, dj)}
    return ModeOperator(None, (di, dj), number_conserving=True, blocks=blocks)


def apply_two_mode_unitary(state: PureState, u: ModeOperator, mode_pair: tuple[int, int]) -> PureState:
    i, j = mode_pair
    n = state.n_modes
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexError(f"invalid mode pair {mode_pair} for a {n}-mode state")
    di, dj = state.mode_dims[i], state.mode_dims[j]
    if u.mode_dims != (di, dj):
        raise ValueError(f"operator dims {u.mode_dims} do not match modes ({di}, {dj})")
    t = np.moveaxis(state.tensor, (i, j), (0, 1))
    rest_shape = t.shape[2:]
    t = t.reshape(di, dj, -1)
    if u.number_conserving:
        out = np.zeros_like(t)
        for s, (ni, block) in u.blocks.items():
            nj = s - ni
            out[ni, nj] = block @ t[ni, nj]
    else:
        out = (u.matrix @ t.reshape(di * dj, -1)).reshape(di, dj, -1)
    out = np.moveaxis(out.reshape((di, dj) + rest_shape), (0, 1), (i, j))
    return PureState(state.mode_dims, out.reshape(-1))


def partial_trace(state_or_rho: PureState | DensityOperator, keep_modes: Sequence[int]) -> DensityOperator:
    keep = sorted(set(int(k) for k in keep_modes))
    if not keep:
        raise ValueError("keep_modes must not be empty")
    dims = state_or_rho.mode_dims
    if any(k < 0 or k >= len(dims) for k in keep):
        raise IndexError(f"keep_modes {keep_modes} out of range for {len(dims)} modes")
    drop = [k for k in range(len(dims)) if k not in keep]
    kdims = tuple(dims[k] for k in keep)
    dk = int(np.prod(kdims))
    if isinstance(state_or_rho, PureState):
        t = np.moveaxis(state_or_rho.tensor, keep, list(range(len(keep)))).reshape(dk, -1)
        return DensityOperator(t @ t.conj().T, kdims)
    n = len(dims)
    t = state_or_rho.matrix.reshape(dims + dims)
    for pos, k in enumerate(sorted(drop, reverse=True)):
        m = n - pos
        t = np.trace(t, axis1=k, axis2=k + m)
    return DensityOperator(t.reshape(dk, dk), kdims)


def truncation_health(state: PureState, levels: int = 2) -> float:
    """Largest per-mode population on the top ``levels`` Fock levels, relative to the state norm."""
    p = np.abs(state.tensor) ** 2
    total = p.sum()
    if total == 0:
        return 0.0
    worst = 0.0
    for axis, d in enumerate(state.mode_dims):
        marginal = p.sum(axis=tuple(a for a in range(state.n_modes) if a != axis))
        worst = max(worst, float(marginal[max(0, d - levels):].sum() / total))
    return worst
