"""Brute-force simulation of the coherent-subtraction protocol on four truncated modes.

Mode order is (a, b, c, d). The two-mode squeezed vacuum lives in a and b,
subtraction beamsplitters couple a-c and b-d, and a balanced beamsplitter
mixes the subtracted light with d as its first port. Detectors read
``n1`` on d, ``n2`` on c and ``n3`` on b; mode a is the output.

Lossy detection never forms the four-mode density operator: the conditional
mode-a operator is accumulated from amplitude slices weighted by the
detectors' ``p(n|m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .channels import detection_matrix
from .fock import (
    DensityOperator,
    PureState,
    TruncationConfig,
    TruncationError,
    apply_two_mode_unitary,
    beamsplitter,
    truncation_health,
)
from .params import OutcomePattern, SqueezeParam

__all__ = [
    "MODE_A",
    "MODE_B",
    "MODE_C",
    "MODE_D",
    "ProtocolConfig",
    "ProtocolResult",
    "tmsv",
    "run_protocol_pure_until_measurement",
    "run_protocol",
    "conditional_operator",
    "measure",
    "run_outcomes",
    "sector_truncation",
]

MODE_A, MODE_B, MODE_C, MODE_D = 0, 1, 2, 3
DEFAULT_NMAX = 30
ZERO_PROBABILITY = 1e-300


def tmsv(squeeze: SqueezeParam, trunc: TruncationConfig, strict: bool = True) -> PureState:
    """Truncated ``(1/cosh R) sum_n exp(i n phi) tanh^n R |n, n>``.

    Amplitudes keep their exact values, so the state is short of unit norm
    by the discarded tail ``tanh^(2(n_max+1)) R``. With ``strict`` a tail
    above ``trunc.tail_tolerance`` raises :class:`TruncationError`.
    """
    d = trunc.dim
    x = squeeze.amplitude
    tail = abs(x) ** (2 * d)
    if strict and tail > trunc.tail_tolerance:
        raise TruncationError(
            f"two-mode squeezed vacuum at R={squeeze.r:.4f} leaves tail {tail:.2e} beyond n_max={trunc.n_max}"
        )
    amps = np.zeros((d, d), dtype=complex)
    n = np.arange(d)
    amps[n, n] = x ** n / math.cosh(squeeze.r)
    return PureState((d, d), amps)


@dataclass(frozen=True)
class ProtocolConfig:
    squeeze: SqueezeParam
    theta: float
    outcome: OutcomePattern
    eta1: float = 1.0
    eta2: float = 1.0
    eta3: float = 1.0
    trunc: TruncationConfig = field(default_factory=lambda: TruncationConfig(DEFAULT_NMAX))
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "outcome", OutcomePattern.of(self.outcome))
        if not 0.0 <= self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2), got {self.theta}")
        for name in ("eta1", "eta2", "eta3"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if max(self.outcome.as_tuple()) > self.trunc.n_max:
            raise ValueError("detected photon number exceeds the truncation")

    @property
    def reflectivity(self) -> float:
        return math.sin(self.theta) ** 2


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    state: DensityOperator | None
    probability: float
    parity: int | None
    symmetry_order: int | None
    mean_photon: float
    truncation_health: float

    @property
    def is_zero_probability(self) -> bool:
        return self.state is None

    def to_record(self, include_matrix: bool = False) -> dict:
        rec = {
            "probability": self.probability,
            "parity": {1: "even", -1: "odd"}.get(self.parity),
            "symmetry_order": self.symmetry_order,
            "mean_photon": None if math.isnan(self.mean_photon) else self.mean_photon,
            "truncation_health": self.truncation_health,
            "state_diag": [] if self.state is None else np.real(np.diag(self.state.matrix)).tolist(),
        }
        if include_matrix and self.state is not None:
            rec["state_matrix_re"] = self.state.matrix.real.tolist()
            rec["state_matrix_im"] = self.state.matrix.imag.tolist()
        return rec


def run_protocol_pure_until_measurement(cfg: ProtocolConfig) -> PureState:
    d = cfg.trunc.dim
    ab = tmsv(cfg.squeeze, cfg.trunc, strict=cfg.strict)
    amps = np.zeros((d, d, d, d), dtype=complex)
    amps[:, :, 0, 0] = ab.tensor
    state = PureState((d,) * 4, amps.reshape(-1), ab.norm_probability)
    if cfg.theta != 0.0:
        sub = beamsplitter(cfg.theta, d, d)
        state = apply_two_mode_unitary(state, sub, (MODE_A, MODE_C))
        state = apply_two_mode_unitary(state, sub, (MODE_B, MODE_D))
    return apply_two_mode_unitary(state, beamsplitter(math.pi / 4, d, d), (MODE_D, MODE_C))


def _weights(eta: float, n: int, d: int) -> tuple[slice, np.ndarray]:
    if eta == 1.0:
        return slice(n, n + 1), np.ones(1)
    p = detection_matrix(eta, d)[n, n:]
    return slice(n, d), np.sqrt(p)


def conditional_operator(state: PureState, cfg: ProtocolConfig) -> np.ndarray:
    """Unnormalized mode-a operator ``Tr_bcd[(Pi_n3 x Pi_n2 x Pi_n1) |psi><psi|]``."""
    d = cfg.trunc.dim
    out = cfg.outcome
    sb, wb = _weights(cfg.eta3, out.n3, d)
    sc, wc = _weights(cfg.eta2, out.n2, d)
    sd, wd = _weights(cfg.eta1, out.n1, d)
    t = state.tensor[:, sb, sc, sd]
    t = t * wb[None, :, None, None] * wc[None, None, :, None] * wd[None, None, None, :]
    m = t.reshape(d, -1)
    return m @ m.conj().T


def sector_truncation(outcome, margin: int = 1) -> TruncationConfig:
    """Smallest cutoff that is exact for an ideal detection of ``outcome``.

    With unit efficiencies only TMSV terms with ``n <= n3 + N`` reach the
    detected sector, so dropping the rest changes no retained amplitude.
    Use together with ``strict=False``.
    """
    out = OutcomePattern.of(outcome)
    return TruncationConfig(out.n3 + out.total + margin)


def measure(psi: PureState, cfg: ProtocolConfig, health: float | None = None) -> ProtocolResult:
    """Condition an already propagated four-mode state on ``cfg.outcome``."""
    health = truncation_health(psi) if health is None else health
    rho = conditional_operator(psi, cfg)
    prob = float(np.trace(rho).real)
    if prob < ZERO_PROBABILITY:
        return ProtocolResult(None, 0.0, None, None, float("nan"), health)
    rho = 0.5 * (rho + rho.conj().T) / prob
    state = DensityOperator(rho)
    return ProtocolResult(
        state=state,
        probability=min(prob, 1.0),
        parity=analysis.parity(state),
        symmetry_order=analysis.symmetry_order(state),
        mean_photon=analysis.mean_photon(state),
        truncation_health=health,
    )


def run_protocol(cfg: ProtocolConfig) -> ProtocolResult:
    return measure(run_protocol_pure_until_measurement(cfg), cfg)


def run_outcomes(cfg: ProtocolConfig, outcomes) -> list[ProtocolResult]:
    """One propagation, several detection patterns; ``cfg.outcome`` is ignored."""
    psi = run_protocol_pure_until_measurement(cfg)
    health = truncation_health(psi)
    return [measure(psi, replace(cfg, outcome=OutcomePattern.of(o)), health) for o in outcomes]
