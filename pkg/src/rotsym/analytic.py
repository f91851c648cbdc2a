"""Closed-form coherent photon subtraction from a two-mode squeezed vacuum.

Detecting ``n1`` and ``n2`` subtracted photons leaves modes a, b in
``sum_k A_k a^(N-k) b^k |TMSV(R_eff)>`` with ``N = n1 + n2``; a further
count of ``n3`` on mode b projects mode a onto a parity state supported on
``2k - N - n3``. Finite reflectivity only lowers the squeezing to
``R_eff = atanh(t^2 tanh R)``.

Coefficients are summed in exact rational arithmetic. Large Fock indices
are handled in log space so the amplitudes never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .fock import DensityOperator, PureState
from .params import OutcomePattern, SqueezeParam, db_to_r, r_to_db

__all__ = [
    "coefficient_A",
    "signed_coefficient",
    "SubtractionCoefficients",
    "subtraction_coefficients",
    "FinalStateSpec",
    "final_state",
    "success_probability",
    "protocol_state",
    "protocol_probability",
    "effective_squeezing",
    "effective_squeeze",
    "simple_subtracted_state",
    "component_bound",
    "LossyOutput",
    "lossy_final_state",
    "db_to_r",
    "r_to_db",
]


@lru_cache(maxsize=None)
def coefficient_A(n1: int, n2: int, k: int) -> Fraction:
    """Rational part of the subtraction coefficient; the full value is this times ``sqrt(n1! n2!)``.

    Symmetric in ``n1, n2``. It is the amplitude for the orientation
    ``n1 >= n2``; see :func:`signed_coefficient` for the mirrored outcome.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("photon counts must be non-negative")
    big = max(n1, n2)
    total = n1 + n2
    if not 0 <= k <= total:
        raise ValueError(f"k={k} outside 0..{total}")
    acc = Fraction(0)
    for i in range(max(0, big - k), min(big, total - k) + 1):
        j = i + k - big
        denom = math.factorial(i) * math.factorial(j) * math.factorial(big - i) * math.factorial(total - i - k)
        acc += Fraction((-1) ** j, denom)
    return acc


def signed_coefficient(n1: int, n2: int, k: int) -> Fraction:
    """Rational coefficient with the port orientation of the dense simulator.

    Swapping which output port sees the larger count flips the sign of the
    ``b^k`` term for odd ``k``.
    """
    a = coefficient_A(n1, n2, k)
    return -a if (n2 > n1 and k % 2) else a


@dataclass(frozen=True)
class SubtractionCoefficients:
    n1: int
    n2: int
    rationals: tuple[Fraction, ...]

    @property
    def total(self) -> int:
        return self.n1 + self.n2

    @property
    def values(self) -> np.ndarray:
        scale = math.sqrt(math.factorial(self.n1) * math.factorial(self.n2))
        return np.array([float(r) * scale for r in self.rationals])


@lru_cache(maxsize=None)
def subtraction_coefficients(n1: int, n2: int) -> SubtractionCoefficients:
    return SubtractionCoefficients(n1, n2, tuple(signed_coefficient(n1, n2, k) for k in range(n1 + n2 + 1)))


def component_bound(total: int, n3: int) -> int:
    """Largest number of Fock components an ``[n1, n2, n3]`` output can carry."""
    if n3 >= total:
        return total + 1
    return (total + n3) // 2 + 1


@dataclass(frozen=True, eq=False)
class FinalStateSpec:
    """Single-mode output of the ideal protocol.

    ``amplitudes`` are normalized and aligned with ``support``. The raw
    coefficients are ``exp(log_norm) * amplitudes``; ``log_norm`` is the log of
    the root-sum-square of the unnormalized coefficients.
    """

    outcome: OutcomePattern
    squeeze: SqueezeParam
    k_min: int
    support: tuple[int, ...]
    amplitudes: np.ndarray
    log_norm: float

    @property
    def is_empty(self) -> bool:
        return len(self.support) == 0

    @property
    def n_components(self) -> int:
        return len(self.support)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def mean_photon(self) -> float:
        if self.is_empty:
            return float("nan")
        return float(np.dot(self.support, self.probabilities))

    @property
    def spacing(self) -> int | None:
        """gcd of support differences, ``None`` for a single component."""
        if len(self.support) < 2:
            return None
        g = 0
        for s in self.support[1:]:
            g = math.gcd(g, s - self.support[0])
        return g

    def vector(self, dim: int | None = None) -> np.ndarray:
        if dim is None:
            dim = (max(self.support) + 1) if self.support else 1
        if self.support and max(self.support) >= dim:
            raise ValueError(f"support reaches {max(self.support)}, beyond dimension {dim}")
        v = np.zeros(dim, dtype=complex)
        v[list(self.support)] = self.amplitudes
        return v

    def to_pure_state(self, dim: int | None = None) -> PureState:
        v = self.vector(dim)
        return PureState((v.size,), v)

    def to_record(self) -> dict:
        return {
            "outcome": list(self.outcome.as_tuple()),
            "r_eff": self.squeeze.r,
            "phi": self.squeeze.phi,
            "support": list(self.support),
            "amplitudes_re": self.amplitudes.real.tolist(),
            "amplitudes_im": self.amplitudes.imag.tolist(),
        }


def final_state(outcome, squeeze_eff: SqueezeParam) -> FinalStateSpec:
    out = OutcomePattern.of(outcome)
    total, n3 = out.total, out.n3
    k_min = max(n3, -((-(total + n3)) // 2))
    tanh_r = math.tanh(squeeze_eff.r)
    coeffs = subtraction_coefficients(out.n1, out.n2)
    half_log_fact = 0.5 * (math.lgamma(out.n1 + 1) + math.lgamma(out.n2 + 1))
    support, logs, phases = [], [], []
    for k in range(k_min, total + n3 + 1):
        a = coeffs.rationals[k - n3]
        if a == 0:
            continue
        if tanh_r == 0.0 and k > 0:
            continue
        fock = 2 * k - total - n3
        log_mag = (math.log(abs(a)) + half_log_fact + math.lgamma(k + 1) - 0.5 * math.lgamma(fock + 1)
                   + (k * math.log(tanh_r) if k else 0.0))
        support.append(fock)
        logs.append(log_mag)
        phases.append((1 if a > 0 else -1) * np.exp(1j * squeeze_eff.phi * k))
    if not support:
        return FinalStateSpec(out, squeeze_eff, k_min, (), np.zeros(0, complex), -math.inf)
    logs = np.array(logs)
    top = logs.max()
    raw = np.exp(logs - top) * np.array(phases)
    norm = float(np.linalg.norm(raw))
    return FinalStateSpec(out, squeeze_eff, k_min, tuple(support), raw / norm, float(top + math.log(norm)))


def effective_squeezing(r: float, t: float) -> float:
    """``atanh(t^2 tanh r)`` for subtraction beamsplitters of amplitude transmission ``t``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if not 0 < t <= 1:
        raise ValueError(f"transmission must be in (0, 1], got {t}")
    return math.atanh(t * t * math.tanh(r))


def effective_squeeze(squeeze: SqueezeParam, theta: float) -> SqueezeParam:
    return SqueezeParam(effective_squeezing(squeeze.r, math.cos(theta)), squeeze.phi)


def success_probability(outcome, squeeze_eff: SqueezeParam, theta: float, *, exact: bool = True,
                        state: FinalStateSpec | None = None) -> float:
    """Probability of detecting ``outcome`` given the effective squeezing and subtraction angle.

    ``exact=True`` uses the finite-reflectivity prefactor
    ``(tan^2 theta / 2)^N / (n3! cosh^2 R)`` with ``R`` the initial squeezing
    recovered from ``R_eff``; this agrees with the dense simulator at any
    angle. ``exact=False`` gives the weak-reflectivity form
    ``(theta^2 / 2)^N / (n3! cosh^2 R_eff)``.
    """
    out = OutcomePattern.of(outcome)
    if out.total > 0 and theta == 0.0:
        return 0.0
    spec = state if state is not None else final_state(out, squeeze_eff)
    if spec.is_empty:
        return 0.0
    tanh_eff = math.tanh(squeeze_eff.r)
    if exact:
        t2 = math.cos(theta) ** 2
        tanh_init = tanh_eff / t2
        if tanh_init >= 1.0:
            raise ValueError("no initial squeezing maps to this effective squeezing at this angle")
        log_pref = out.total * math.log(math.tan(theta) ** 2 / 2) if out.total else 0.0
        log_pref += math.log1p(-tanh_init ** 2)
    else:
        log_pref = out.total * math.log(theta ** 2 / 2) if out.total else 0.0
        log_pref += math.log1p(-tanh_eff ** 2)
    return math.exp(log_pref - math.lgamma(out.n3 + 1) + 2 * spec.log_norm)


def protocol_state(outcome, squeeze: SqueezeParam, theta: float) -> FinalStateSpec:
    return final_state(outcome, effective_squeeze(squeeze, theta))


def protocol_probability(outcome, squeeze: SqueezeParam, theta: float) -> float:
    """Exact outcome probability from the initial squeezing and subtraction angle."""
    return success_probability(outcome, effective_squeeze(squeeze, theta), theta)


def simple_subtracted_state(n3: int, squeeze: SqueezeParam, sign: int = 1) -> FinalStateSpec:
    """Two-component state left by one subtracted photon and ``n3`` counts on mode b.

    ``sign=+1`` is the ``[1, 0, n3]`` outcome and ``sign=-1`` is ``[0, 1, n3]``.
    """
    if n3 < 1:
        raise ValueError("n3 must be at least 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    tanh_r = math.tanh(squeeze.r)
    cosh_r = math.cosh(squeeze.r)
    # sqrt(c_{n,n}) taken as exp(i phi n) tanh^n R / cosh R
    lo = math.sqrt(n3) * np.exp(1j * squeeze.phi * n3) * tanh_r ** n3 / cosh_r
    hi = sign * math.sqrt(n3 + 1) * np.exp(1j * squeeze.phi * (n3 + 1)) * tanh_r ** (n3 + 1) / cosh_r
    raw = np.array([lo, hi])
    norm = float(np.linalg.norm(raw))
    outcome = OutcomePattern(1, 0, n3) if sign == 1 else OutcomePattern(0, 1, n3)
    return FinalStateSpec(outcome, squeeze, n3, (n3 - 1, n3 + 1), raw / norm, math.log(norm))


@dataclass(frozen=True, eq=False)
class LossyOutput:
    """Output when the ``n3`` detector has efficiency ``eta3 < 1``.

    The POVM is diagonal in Fock space, so the state is a mixture of ideal
    outputs for every true count ``m >= n3`` with weights ``weights``.
    """

    outcome: OutcomePattern
    eta3: float
    probability: float
    components: tuple[FinalStateSpec, ...]
    weights: np.ndarray

    @property
    def mean_photon(self) -> float:
        return float(np.dot(self.weights, [c.mean_photon for c in self.components]))

    def density(self, dim: int | None = None) -> DensityOperator:
        top = max(max(c.support) for c in self.components) + 1
        dim = top if dim is None else dim
        rho = np.zeros((dim, dim), dtype=complex)
        for w, c in zip(self.weights, self.components):
            v = c.vector(dim)
            rho += w * np.outer(v, v.conj())
        return DensityOperator(rho)


def lossy_final_state(outcome, squeeze_eff: SqueezeParam, theta: float, eta3: float,
                      rel_tol: float = 1e-14, max_extra: int = 4000) -> LossyOutput:
    """Mixture produced by an ``n3`` detector of efficiency ``eta3``; other detectors ideal.

    ``theta`` only enters the probability; at ``theta = 0`` the mixture is
    the weak-reflectivity limit and the probability is zero.
    """
    out = OutcomePattern.of(outcome)
    if not 0.0 < eta3 <= 1.0:
        raise ValueError("eta3 must be in (0, 1]")
    comps, logw = [], []
    best = -math.inf
    for m in range(out.n3, out.n3 + max_extra + 1):
        spec = final_state((out.n1, out.n2, m), squeeze_eff)
        if spec.is_empty:
            continue
        k = m - out.n3
        if eta3 == 1.0 and k:
            break
        lb = (math.lgamma(m + 1) - math.lgamma(out.n3 + 1) - math.lgamma(k + 1)
              + out.n3 * math.log(eta3) + (k * math.log1p(-eta3) if k else 0.0))
        lw = lb + 2 * spec.log_norm - math.lgamma(m + 1)
        comps.append(spec)
        logw.append(lw)
        best = max(best, lw)
        if k > out.total + 4 and lw - best < math.log(rel_tol):
            break
    if not comps:
        return LossyOutput(out, eta3, 0.0, (), np.zeros(0))
    logw = np.array(logw)
    w = np.exp(logw - best)
    total = w.sum()
    prob = 0.0
    if theta != 0.0 or out.total == 0:
        t2 = math.cos(theta) ** 2
        tanh_init = math.tanh(squeeze_eff.r) / t2
        if tanh_init >= 1.0:
            raise ValueError("no initial squeezing maps to this effective squeezing at this angle")
        log_pref = out.total * math.log(math.tan(theta) ** 2 / 2) if out.total else 0.0
        prob = math.exp(log_pref + math.log1p(-tanh_init ** 2) + best + math.log(total))
    return LossyOutput(out, eta3, prob, tuple(comps), w / total)
