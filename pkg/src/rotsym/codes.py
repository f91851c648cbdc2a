"""Target code states, squeezing conditions, Knill-Laflamme checks and imperfect code words."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .analytic import effective_squeezing
from .fock import DensityOperator, ModeOperator, PureState, annihilator, number_operator
from .params import OutcomePattern, SqueezeParam

__all__ = [
    "CodePair",
    "TwoComponentTarget",
    "ImperfectCodeword",
    "NoJumpDecomposition",
    "binomial_codewords",
    "error_words",
    "squeezing_condition",
    "target_outcome",
    "cat_like_pair",
    "cat_mean_photons",
    "balance_cat_pair",
    "cat_code_pair",
    "kl_check",
    "kl_violations",
    "error_set",
    "imperfect_codeword",
    "incorrect_diagnosis_probability",
    "no_jump_transform",
]


def _fock_vector(components: dict[int, complex], dim: int | None) -> PureState:
    top = max(components) + 1
    dim = top if dim is None else dim
    if dim < top:
        raise ValueError(f"dimension {dim} too small for support up to {top - 1}")
    v = np.zeros(dim, dtype=complex)
    for n, c in components.items():
        v[n] = c
    v /= np.linalg.norm(v)
    return PureState((dim,), v)


@dataclass(frozen=True, eq=False)
class CodePair:
    zero_word: PureState
    one_word: PureState
    symmetry: int
    label: str = ""

    def __post_init__(self):
        if self.zero_word.mode_dims != self.one_word.mode_dims:
            raise ValueError("code words live in different spaces")
        for w in (self.zero_word, self.one_word):
            if not w.is_normalized():
                raise ValueError("code words must be normalized")
        if abs(np.vdot(self.zero_word.amplitudes, self.one_word.amplitudes)) > 1e-10:
            raise ValueError("code words are not orthogonal")

    @property
    def dim(self) -> int:
        return self.zero_word.dim

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "symmetry": self.symmetry,
            "zero_word": self.zero_word.to_record(),
            "one_word": self.one_word.to_record(),
        }


def binomial_codewords(dim: int | None = None) -> CodePair:
    """``(|0> + sqrt3 |4>)/2`` and ``(sqrt3 |2> + |6>)/2``."""
    dim = 7 if dim is None else dim
    zero = _fock_vector({0: 0.5, 4: math.sqrt(3) / 2}, dim)
    one = _fock_vector({2: math.sqrt(3) / 2, 6: 0.5}, dim)
    return CodePair(zero, one, 4, "binomial")


def error_words(dim: int | None = None) -> CodePair:
    """Normalized images of the binomial words under one photon loss."""
    dim = 7 if dim is None else dim
    return CodePair(_fock_vector({3: 1.0}, dim), _fock_vector({1: 1.0, 5: 1.0}, dim), 4, "binomial-error")


@dataclass(frozen=True)
class TwoComponentTarget:
    """``|m-1> + alpha |m+1>`` (symmetry 2) or ``|m-2> + beta |m+2>`` (symmetry 4)."""

    m: int
    coefficient: complex
    symmetry: int

    def __post_init__(self):
        if self.symmetry not in (2, 4):
            raise ValueError("symmetry must be 2 or 4")
        if self.m < self.symmetry // 2:
            raise ValueError(f"m must be at least {self.symmetry // 2}")

    @property
    def bound(self) -> float:
        m = self.m
        if self.symmetry == 2:
            return math.sqrt((m + 1) / m)
        if m == 1:
            return math.inf
        return math.sqrt((m + 1) * (m + 2) / (m * (m - 1)))

    def state(self, dim: int | None = None) -> PureState:
        h = self.symmetry // 2
        return _fock_vector({self.m - h: 1.0, self.m + h: complex(self.coefficient)}, dim)


def target_outcome(target: TwoComponentTarget) -> OutcomePattern:
    return OutcomePattern(0, 1, target.m) if target.symmetry == 2 else OutcomePattern(1, 1, target.m)


def squeezing_condition(target: TwoComponentTarget) -> SqueezeParam:
    """Effective squeezing whose ideal output for :func:`target_outcome` is ``target``.

    The principal square root of ``-beta`` is used; ``phi`` carries its
    phase, and the output coefficient is ``beta`` itself.
    """
    m = target.m
    c = complex(target.coefficient)
    if target.symmetry == 2:
        x = -c * math.sqrt(m / (m + 1))
    else:
        x = cmath.sqrt(-c) * (m * (m - 1) / ((m + 1) * (m + 2))) ** 0.25
    if abs(x) >= 1:
        raise ValueError(f"|coefficient| {abs(c):.4g} is beyond the bound {target.bound:.4g}; no real squeezing exists")
    return SqueezeParam.from_amplitude(x)


def cat_like_pair(m: int, squeeze: SqueezeParam, dim: int | None = None) -> tuple[PureState, PureState]:
    """Outputs of ``[0, 1, m]`` and ``[0, 2, m]`` at effective squeezing ``squeeze``.

    Supports ``{m-1, m+1}`` and ``{m-2, m, m+2}``; opposite parities.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    s = math.tanh(squeeze.r)
    if s == 0:
        raise ValueError("the pair is undefined without squeezing")
    e = cmath.exp(1j * squeeze.phi / 2)
    dim = m + 3 if dim is None else dim
    psi01 = _fock_vector({
        m - 1: math.sqrt(m / s) / e,
        m + 1: -math.sqrt(s * (m + 1)) * e,
    }, dim)
    psi02 = _fock_vector({
        m - 2: math.sqrt(m / (m + 1)) / (s * e * e),
        m: -2 * math.sqrt((m + 1) / (m - 1)),
        m + 2: s * e * e * math.sqrt((m + 2) / (m - 1)),
    }, dim)
    return psi01, psi02


def cat_mean_photons(m: int, r_eff: float) -> tuple[float, float]:
    s = math.tanh(r_eff)
    w01 = np.array([m / s, s * (m + 1)])
    n01 = float(np.dot([m - 1, m + 1], w01) / w01.sum())
    w02 = np.array([m / ((m + 1) * s * s), 4 * (m + 1) / (m - 1), s * s * (m + 2) / (m - 1)])
    n02 = float(np.dot([m - 2, m, m + 2], w02) / w02.sum())
    return n01, n02


def balance_cat_pair(m: int, theta: float, bracket: tuple[float, float] = (0.05, 1.6), xtol: float = 1e-12) -> SqueezeParam:
    """Initial squeezing at which the ``[0,1,m]`` and ``[0,2,m]`` outputs share a mean photon number."""
    if m < 2:
        raise ValueError("m must be at least 2")
    t = math.cos(theta)

    def gap(r: float) -> float:
        n01, n02 = cat_mean_photons(m, effective_squeezing(r, t))
        return n01 - n02

    lo, hi = bracket
    for _ in range(8):
        if gap(lo) * gap(hi) < 0:
            return SqueezeParam(brentq(gap, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))
        lo, hi = lo / 2, hi + 0.5
    raise ValueError(f"no balanced squeezing found for m={m}")


def cat_code_pair(m: int, theta: float, dim: int | None = None) -> tuple[CodePair, SqueezeParam]:
    sq = balance_cat_pair(m, theta)
    eff = SqueezeParam(effective_squeezing(sq.r, math.cos(theta)), sq.phi)
    psi01, psi02 = cat_like_pair(m, eff, dim)
    return CodePair(psi02, psi01, 2, f"cat-m{m}"), sq


def error_set(names: Sequence[str], dim: int) -> list[ModeOperator]:
    """Operators from names ``I``, ``a``, ``n``."""
    table = {
        "I": lambda: ModeOperator(np.eye(dim), (dim,)),
        "a": lambda: annihilator(dim),
        "n": lambda: number_operator(dim),
    }
    return [table[name]() for name in names]


def kl_check(pair: CodePair, errors: Sequence, tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Knill-Laflamme blocks ``M[l, m, i, j] = <i_L| E_l^dag E_m |j_L>``.

    Passes when every 2x2 block is proportional to the identity within ``tol``.
    """
    words = np.stack([pair.zero_word.amplitudes, pair.one_word.amplitudes])
    mats = []
    for e in errors:
        mat = e.matrix if isinstance(e, ModeOperator) else np.asarray(e, complex)
        if mat.shape != (pair.dim, pair.dim):
            raise ValueError(f"error operator of shape {mat.shape} does not act on dimension {pair.dim}")
        mats.append(mat)
    images = np.stack([words @ mat.T for mat in mats])  # images[l, i] = E_l |i_L>
    blocks = np.einsum("lia,mja->lmij", images.conj(), images)
    return blocks, not kl_violations(blocks, tol)


def kl_violations(blocks: np.ndarray, tol: float = 1e-8) -> list[tuple[int, int, str, float]]:
    bad = []
    n = blocks.shape[0]
    for l in range(n):
        for m in range(n):
            b = blocks[l, m]
            off = max(abs(b[0, 1]), abs(b[1, 0]))
            if off > tol:
                bad.append((l, m, "off-diagonal", float(off)))
            diff = abs(b[0, 0] - b[1, 1])
            if diff > tol:
                bad.append((l, m, "diagonal", float(diff)))
    return bad


# closed-form first-order error components and delta/(1-delta) slopes
_IMPERFECT = {
    "0L": {
        "slope": 3 * math.sqrt(2),
        "error": {1: math.sqrt(3), 5: math.sqrt(5)},
        "p_inc": Fraction(7, 6),
    },
    "1L": {
        "slope": 8 * math.sqrt(2) / math.sqrt(15),
        "error": {3: 5.0, 7: math.sqrt(7)},
        "p_inc": Fraction(31, 24),
    },
}


@dataclass(frozen=True, eq=False)
class ImperfectCodeword:
    """``(1 - delta) |ideal><ideal| + delta * error_state`` from a detector of efficiency ``eta``."""

    ideal: PureState
    error_state: DensityOperator
    delta: float
    eta: float
    word: str = "0L"

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must be in [0, 1)")
        v = self.ideal.amplitudes
        if abs(np.vdot(v, self.error_state.matrix @ v)) > 1e-10:
            raise ValueError("error component overlaps the ideal word")

    @property
    def odds(self) -> float:
        return self.delta / (1.0 - self.delta)

    def density(self) -> DensityOperator:
        v = self.ideal.amplitudes
        return DensityOperator((1 - self.delta) * np.outer(v, v.conj()) + self.delta * self.error_state.matrix)


def imperfect_codeword(which: str, eta: float, dim: int = 8) -> ImperfectCodeword:
    """First-order mixture left by an ``n3`` detector of efficiency ``eta``."""
    if which not in _IMPERFECT:
        raise ValueError(f"which must be '0L' or '1L', got {which!r}")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    data = _IMPERFECT[which]
    pair = binomial_codewords(dim)
    ideal = pair.zero_word if which == "0L" else pair.one_word
    err = _fock_vector(data["error"], dim).amplitudes
    odds = data["slope"] * (1.0 - eta)
    return ImperfectCodeword(ideal, DensityOperator(np.outer(err, err.conj())), odds / (1.0 + odds), eta, which)


def incorrect_diagnosis_probability(delta: float, which: str = "0L") -> float:
    """Odds that a parity check after one loss mistakes the generation error for no loss.

    Equals ``Tr[delta a rho_E a^dag] / Tr[(1 - delta) a |w><w| a^dag]``, that is
    ``(7/6) delta / (1 - delta)`` for the zero word and ``(31/24) delta / (1 - delta)``
    for the one word.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must be in [0, 1)")
    return float(_IMPERFECT[which]["p_inc"]) * delta / (1.0 - delta)


@dataclass(frozen=True, eq=False)
class NoJumpDecomposition:
    ideal_term: np.ndarray
    error_term: np.ndarray
    coupled_term: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.ideal_term + self.error_term + self.coupled_term

    @property
    def coupled_weight(self) -> float:
        return float(np.trace(self.coupled_term).real)


def no_jump_transform(state: ImperfectCodeword, gamma: float) -> NoJumpDecomposition:
    """``E0 rho E0^dag`` with ``E0 = 1 - gamma n / 2``, kept to first order in ``gamma``."""
    dim = state.ideal.dim
    n = np.diag(np.arange(dim, dtype=float))
    v = state.ideal.amplitudes
    rho_w = np.outer(v, v.conj())
    rho_e = state.error_state.matrix
    ideal = (1 - state.delta) * (rho_w - 0.5 * gamma * (n @ rho_w + rho_w @ n))
    coupled = -0.5 * state.delta * gamma * (n @ rho_e + rho_e @ n)
    return NoJumpDecomposition(ideal, state.delta * rho_e, coupled)
