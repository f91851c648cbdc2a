"""Outcome enumeration, symmetry-filtered sweeps, multiplexing and the cat-pair table.

Sweeps use the closed-form engine. Outcomes are visited in increasing
``N = n1 + n2``, then ``n1``, then ``n3``; enumeration stops once the
probability mass of every unvisited branch is below the cutoff.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from . import dense
from .analytic import effective_squeezing, subtraction_coefficients
from .channels import detection_matrix
from .codes import balance_cat_pair, cat_mean_photons
from .fock import TruncationConfig
from .params import OutcomePattern, SqueezeParam, db_to_r, theta_from_reflectivity

__all__ = [
    "OutcomeFilter",
    "SweepSpec",
    "SweepRow",
    "MuxPlan",
    "OutcomeRecord",
    "enumeration_limits",
    "enumerate_outcomes",
    "sweep",
    "aggregate_probability",
    "expected_mean_photon",
    "spot_check",
    "mux",
    "table1",
    "Table1Row",
]

FILTERS = ("all", "any-2fold", "any-4fold", "k-components", "exact")


@dataclass(frozen=True)
class OutcomeFilter:
    """Which outputs count toward an aggregate.

    ``all`` keeps every outcome, single Fock states included. The other
    kinds keep genuine superpositions only: ``any-2fold`` (every parity
    superposition), ``any-4fold``, ``k-components`` with ``k`` Fock
    components, and ``exact`` for one triple.
    """

    kind: str = "any-2fold"
    k: int | None = None
    triple: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.kind not in FILTERS:
            raise ValueError(f"unknown filter {self.kind!r}; choose from {FILTERS}")
        if self.kind == "k-components" and (self.k is None or self.k < 2):
            raise ValueError("k-components needs k >= 2")
        if self.kind == "exact":
            if self.triple is None:
                raise ValueError("exact filter needs a triple")
            object.__setattr__(self, "triple", OutcomePattern.of(self.triple).as_tuple())

    @classmethod
    def parse(cls, text: str) -> "OutcomeFilter":
        """``any-2fold``, ``any-4fold``, ``all``, ``k-components:3`` or ``exact:1,1,2``."""
        kind, _, arg = text.partition(":")
        if kind == "k-components":
            return cls(kind, k=int(arg) if arg else None)
        if kind == "exact":
            return cls(kind, triple=tuple(int(x) for x in arg.split(",")) if arg else None)
        if arg:
            raise ValueError(f"filter {kind!r} takes no argument")
        return cls(kind)

    def label(self) -> str:
        if self.kind == "k-components":
            return f"k-components:{self.k}"
        if self.kind == "exact":
            return "exact:" + ",".join(map(str, self.triple))
        return self.kind

    def accepts(self, outcome: tuple[int, int, int], spacings: Sequence[int | None], n_components: int) -> bool:
        """``spacings`` holds one entry per mixture component (``None`` for single Fock states)."""
        if self.kind == "all":
            return True
        if self.kind == "exact" and outcome != self.triple:
            return False
        real = [s for s in spacings if s is not None]
        if not real:
            return False
        if self.kind == "any-4fold":
            return all(s % 4 == 0 for s in real)
        if self.kind == "k-components":
            return n_components == self.k
        return True


@dataclass(frozen=True)
class SweepSpec:
    squeeze_db: tuple[float, ...]
    reflectivity: tuple[float, ...]
    filter: OutcomeFilter = field(default_factory=OutcomeFilter)
    eta: tuple[float, ...] = (1.0,)
    cutoff: float = 1e-8
    phi: float = 0.0

    def __post_init__(self):
        for name in ("squeeze_db", "reflectivity", "eta"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} grid is empty")
            object.__setattr__(self, name, vals)
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if any(not 0.0 <= r < 1.0 for r in self.reflectivity):
            raise ValueError("reflectivities must be in [0, 1)")
        if any(not 0.0 < e <= 1.0 for e in self.eta):
            raise ValueError("efficiencies must be in (0, 1]")
        if any(s < 0 for s in self.squeeze_db):
            raise ValueError("squeezing must be non-negative")
        if isinstance(self.filter, str):
            object.__setattr__(self, "filter", OutcomeFilter.parse(self.filter))

    def points(self) -> list[tuple[float, float, float]]:
        return [(s, r, e) for s in self.squeeze_db for r in self.reflectivity for e in self.eta]

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["filter"] = self.filter.label()
        return rec


@dataclass(frozen=True)
class OutcomeRecord:
    outcome: tuple[int, int, int]
    probability: float
    mean_photon: float
    n_components: int
    spacings: tuple[int | None, ...]
    # (probability, mean photon, components, spacing) per true n3 count
    parts: tuple[tuple[float, float, int, int | None], ...] = ()

    def components(self):
        if self.parts:
            return self.parts
        return ((self.probability, self.mean_photon, self.n_components, self.spacings[0] if self.spacings else None),)


def enumeration_limits(r: float, reflectivity: float, cutoff: float) -> tuple[int, int]:
    """``(N_max, n3_max)`` leaving at most ``cutoff`` probability unvisited.

    Modes c and d each carry a thermal marginal of mean ``r^2 sinh^2 R``, so
    ``P(N > N_max) <= 2 q^ceil((N_max + 1) / 2)``; mode b is thermal with
    mean ``t^2 sinh^2 R`` and bounds the ``n3`` tail the same way.
    """
    sh2 = math.sinh(r) ** 2
    mu = reflectivity * sh2
    nu = (1.0 - reflectivity) * sh2
    half = cutoff / 2
    if mu == 0:
        n_max = 0
    else:
        q = mu / (1 + mu)
        n_max = max(0, 2 * math.ceil(math.log(half / 2) / math.log(q)) - 1)
    if nu == 0:
        k_max = 0
    else:
        k_max = max(0, math.ceil(math.log(half) / math.log(nu / (1 + nu))) - 1)
    return n_max, k_max


def _ideal_records(sq: SqueezeParam, theta: float, n1: int, n2: int, k_max: int):
    """``(n3, probability, mean photon, components, spacing)`` for ``n3 = 0..k_max``.

    Vectorized form of :func:`final_state` and :func:`success_probability`.
    """
    total = n1 + n2
    if total and theta == 0.0:
        for n3 in range(k_max + 1):
            yield n3, 0.0, math.nan, 0, None
        return
    t2 = math.cos(theta) ** 2
    tanh_eff = t2 * math.tanh(sq.r)
    rationals = np.array([float(a) for a in subtraction_coefficients(n1, n2).rationals])
    nonzero = rationals != 0
    n3 = np.arange(k_max + 1)[:, None]
    j = np.arange(total + 1)[None, :]
    k = n3 + j
    fock = 2 * k - total - n3
    valid = (fock >= 0) & nonzero[None, :]
    if tanh_eff == 0.0:
        valid &= k == 0
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(rationals))[None, :]
        log_t = math.log(tanh_eff) if tanh_eff > 0 else 0.0
    logmag = (log_abs + 0.5 * (gammaln(n1 + 1) + gammaln(n2 + 1)) + gammaln(k + 1)
              - 0.5 * gammaln(np.maximum(fock, 0) + 1) + k * log_t)
    logmag = np.where(valid, 2 * logmag, -np.inf)
    log_sq = logsumexp(logmag, axis=1)
    log_pref = total * math.log(math.tan(theta) ** 2 / 2) if total else 0.0
    log_pref += math.log1p(-math.tanh(sq.r) ** 2)
    weights = np.exp(logmag - np.where(np.isfinite(log_sq), log_sq, 0.0)[:, None])
    means = (weights * fock).sum(axis=1)
    counts = valid.sum(axis=1)
    for row in range(k_max + 1):
        c = int(counts[row])
        if c == 0:
            yield row, 0.0, math.nan, 0, None
            continue
        ks = np.nonzero(valid[row])[0]
        spacing = 2 * int(np.gcd.reduce(ks - ks[0])) if c > 1 else None
        p = math.exp(log_pref - math.lgamma(row + 1) + log_sq[row])
        yield row, p, float(means[row]), c, spacing


def enumerate_outcomes(sq: SqueezeParam, reflectivity: float, eta3: float = 1.0,
                       cutoff: float = 1e-8) -> Iterator[OutcomeRecord]:
    """Every detection pattern with its probability, in ``(N, n1, n3)`` order."""
    n_max, k_max = enumeration_limits(sq.r, reflectivity, cutoff)
    theta = theta_from_reflectivity(reflectivity)
    if theta == 0.0:
        n_max = 0
    if eta3 < 1.0:
        # detected counts are thinned; the true count runs further
        k_true = k_max + math.ceil(math.log(cutoff) / math.log(max(1 - eta3, 1e-300)))
    else:
        k_true = k_max
    for total in range(n_max + 1):
        for n1 in range(total, -1, -1):
            n2 = total - n1
            rows = list(_ideal_records(sq, theta, n1, n2, k_true))
            if eta3 == 1.0:
                for n3, p, mean, ncomp, sp in rows[: k_max + 1]:
                    yield OutcomeRecord((n1, n2, n3), p, mean, ncomp, (sp,))
                continue
            probs = np.array([r[1] for r in rows])
            det = detection_matrix(eta3, len(rows))
            for n3 in range(k_max + 1):
                w = det[n3] * probs
                p = float(w.sum())
                live = [i for i in range(len(rows)) if w[i] > 0 and rows[i][3] > 0]
                if p <= 0 or not live:
                    yield OutcomeRecord((n1, n2, n3), 0.0, math.nan, 0, ())
                    continue
                mean = float(sum(w[i] * rows[i][2] for i in live) / p)
                ncomp = max(rows[i][3] for i in live)
                parts = tuple((float(w[i]), rows[i][2], rows[i][3], rows[i][4]) for i in live)
                yield OutcomeRecord((n1, n2, n3), p, mean, ncomp, tuple(rows[i][4] for i in live), parts)


@dataclass(frozen=True)
class SweepRow:
    squeeze_db: float
    reflectivity: float
    eta: float
    filter: str
    probability: float
    mean_photon: float
    input_mean_photon: float
    n_outcomes: int
    enumerated_probability: float

    CSV_FIELDS = ("squeeze_db", "reflectivity", "eta", "filter", "probability", "mean_photon",
                  "input_mean_photon", "n_outcomes", "enumerated_probability")

    def as_row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


def _sweep_point(args) -> SweepRow:
    db, r2, eta, flt, cutoff, phi = args
    sq = SqueezeParam(db_to_r(db), phi)
    total = weighted = seen = 0.0
    count = 0
    for rec in enumerate_outcomes(sq, r2, eta, cutoff):
        seen += rec.probability
        if rec.probability <= 0:
            continue
        # lossy heralds mix several true counts; each contributes only if it passes on its own
        hit = False
        for p, mean, ncomp, spacing in rec.components():
            if p > 0 and flt.accepts(rec.outcome, (spacing,), ncomp):
                total += p
                weighted += p * mean
                hit = True
        count += hit
    mean = weighted / total if total > 0 else math.nan
    return SweepRow(db, r2, eta, flt.label(), total, mean, math.sinh(sq.r) ** 2, count, seen)


def sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """One row per grid point, in grid order whatever the number of workers."""
    tasks = [(db, r2, eta, spec.filter, spec.cutoff, spec.phi) for db, r2, eta in spec.points()]
    if jobs <= 1 or len(tasks) == 1:
        return [_sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, tasks))


def aggregate_probability(spec: SweepSpec, jobs: int = 1) -> list[tuple[float, float, float, float]]:
    return [(r.squeeze_db, r.reflectivity, r.eta, r.probability) for r in sweep(spec, jobs)]


def expected_mean_photon(spec: SweepSpec, jobs: int = 1) -> list[tuple[float, float, float, float]]:
    """Probability-weighted mean photon number; NaN where nothing passes the filter."""
    return [(r.squeeze_db, r.reflectivity, r.eta, r.mean_photon) for r in sweep(spec, jobs)]


def spot_check(spec: SweepSpec, fraction: float = 0.05, seed: int = 0, max_level: int = 8,
               min_probability: float = 1e-12) -> dict:
    """Compare a random subsample of analytic probabilities with the dense simulator.

    Only ideal-detector points with ``n3 + N <= max_level`` are eligible, so
    the dense cutoff stays small and exact.
    """
    rng = random.Random(seed)
    candidates = []
    for db, r2, eta in spec.points():
        if eta != 1.0 or r2 == 0.0:
            continue
        sq = SqueezeParam(db_to_r(db), spec.phi)
        for rec in enumerate_outcomes(sq, r2, 1.0, spec.cutoff):
            out = OutcomePattern.of(rec.outcome)
            if out.total + out.n3 <= max_level and rec.probability > min_probability:
                candidates.append((db, r2, rec))
    if not candidates:
        return {"checked": 0, "max_relative_deviation": 0.0}
    chosen = rng.sample(candidates, max(1, round(fraction * len(candidates))))
    worst = 0.0
    for db, r2, rec in chosen:
        cfg = dense.ProtocolConfig(SqueezeParam(db_to_r(db), spec.phi), theta_from_reflectivity(r2), rec.outcome,
                                   trunc=dense.sector_truncation(rec.outcome), strict=False)
        p = dense.run_protocol(cfg).probability
        worst = max(worst, abs(p - rec.probability) / rec.probability)
    return {"checked": len(chosen), "seed": seed, "max_relative_deviation": worst}


@dataclass(frozen=True)
class MuxPlan:
    p_single: float
    n_mux: int
    p_mux: float
    tolerance: float | None = None


def _check_p(p_single: float) -> None:
    if not 0.0 < p_single < 1.0:
        raise ValueError(f"p_single must be in (0, 1), got {p_single}")


def mux(p_single: float, n: int | None = None, tolerance: float | None = None) -> MuxPlan:
    """Success of ``n`` parallel sources, or the ``n`` needed to fail with odds at most ``tolerance``."""
    _check_p(p_single)
    if (n is None) == (tolerance is None):
        raise ValueError("give exactly one of n and tolerance")
    if n is None:
        if not 0.0 < tolerance < 1.0:
            raise ValueError("tolerance must be in (0, 1)")
        n = math.ceil(math.log(tolerance) / math.log1p(-p_single))
    elif n < 1:
        raise ValueError("n must be at least 1")
    return MuxPlan(p_single, int(n), -math.expm1(n * math.log1p(-p_single)), tolerance)


@dataclass(frozen=True)
class Table1Row:
    m: int
    mean_photon: float
    squeeze_db: float
    p01: float
    p02: float

    CSV_FIELDS = ("m", "mean_photon", "squeeze_db", "p01", "p02")

    def as_row(self) -> list:
        return [self.m, self.mean_photon, self.squeeze_db, self.p01, self.p02]


def table1(reflectivity: float = 0.1, ms: Sequence[int] = range(2, 9), n_max: int = 40) -> list[Table1Row]:
    """Balanced cat pairs at fixed subtraction reflectivity.

    Probabilities come from the dense simulator at the initial squeezing and
    count both mirror images of each outcome, ``[0,1,m]`` with ``[1,0,m]``
    and ``[0,2,m]`` with ``[2,0,m]``.
    """
    theta = theta_from_reflectivity(reflectivity)
    rows = []
    for m in ms:
        sq = balance_cat_pair(m, theta)
        n01, _ = cat_mean_photons(m, effective_squeezing(sq.r, math.cos(theta)))
        cfg = dense.ProtocolConfig(sq, theta, (0, 1, m), trunc=TruncationConfig(n_max))
        res = dense.run_outcomes(cfg, [(0, 1, m), (1, 0, m), (0, 2, m), (2, 0, m)])
        p = [r.probability for r in res]
        rows.append(Table1Row(m, n01, sq.db, p[0] + p[1], p[2] + p[3]))
    return rows
