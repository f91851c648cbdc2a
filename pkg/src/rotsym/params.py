"""Squeezing, reflectivity and outcome parameters shared by both engines."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

__all__ = [
    "SqueezeParam",
    "OutcomePattern",
    "db_to_r",
    "r_to_db",
    "theta_from_reflectivity",
    "reflectivity_from_theta",
]

_DB_PER_NEPER = 20.0 / math.log(10.0)


def db_to_r(s_db: float) -> float:
    """Squeezing in dB to the squeezing parameter, ``s_dB = 10 log10(exp(2R))``."""
    if s_db < 0:
        raise ValueError(f"squeezing in dB must be non-negative, got {s_db}")
    return s_db / _DB_PER_NEPER


def r_to_db(r: float) -> float:
    return r * _DB_PER_NEPER


def theta_from_reflectivity(r2: float) -> float:
    if not 0.0 <= r2 < 1.0:
        raise ValueError(f"reflectivity r^2 must be in [0, 1), got {r2}")
    return math.asin(math.sqrt(r2))


def reflectivity_from_theta(theta: float) -> float:
    return math.sin(theta) ** 2


@dataclass(frozen=True)
class SqueezeParam:
    r: float
    phi: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeezing magnitude must be non-negative, got {self.r}")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    @classmethod
    def from_db(cls, s_db: float, phi: float = 0.0) -> "SqueezeParam":
        return cls(db_to_r(s_db), phi)

    @classmethod
    def from_amplitude(cls, x: complex) -> "SqueezeParam":
        """Inverse of :attr:`amplitude`: the pair with ``exp(i phi) tanh R == x``."""
        if abs(x) >= 1:
            raise ValueError(f"|exp(i phi) tanh R| must be < 1, got {abs(x)}")
        phi = cmath.phase(x) if x != 0 else 0.0
        return cls(math.atanh(abs(x)), phi)

    @property
    def db(self) -> float:
        return r_to_db(self.r)

    @property
    def z(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)

    @property
    def amplitude(self) -> complex:
        """Schmidt ratio ``exp(i phi) tanh R`` of the two-mode squeezed vacuum."""
        return cmath.exp(1j * self.phi) * math.tanh(self.r)

    @property
    def mean_photon(self) -> float:
        return math.sinh(self.r) ** 2


@dataclass(frozen=True)
class OutcomePattern:
    """Detector counts: ``n1`` on mode d, ``n2`` on mode c, ``n3`` on mode b."""

    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))

    @classmethod
    def of(cls, outcome) -> "OutcomePattern":
        return outcome if isinstance(outcome, OutcomePattern) else cls(*outcome)

    @property
    def total(self) -> int:
        return self.n1 + self.n2

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    def mirrored(self) -> "OutcomePattern":
        return OutcomePattern(self.n2, self.n1, self.n3)
