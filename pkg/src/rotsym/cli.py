"""Batch command line: every command writes CSV or JSON plus a run manifest.

Failures print a one-line JSON diagnostic on stderr. Exit code 2 means bad
flags or configuration, 3 a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, codes, dense, planner
from .analytic import effective_squeezing, lossy_final_state
from .fock import TruncationConfig, TruncationError
from .params import OutcomePattern, SqueezeParam, db_to_r, theta_from_reflectivity

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

NMAX_ENV = "ROTSYM_NMAX"
MANIFEST_SUFFIX = ".manifest.json"


class UsageError(Exception):
    """Bad flags or configuration (exit 2)."""


class NumericalError(Exception):
    """A computation could not be completed reliably (exit 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def config_hash(command: str, config: dict) -> str:
    canon = json.dumps(_jsonable({"command": command, "config": config}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_manifest(command: str, config: dict, wall_time: float, truncation=None, outputs=()) -> dict:
    return {
        "command": command,
        "config": config,
        "config_hash": config_hash(command, config),
        "truncation": truncation,
        "deterministic": True,
        "version": __version__,
        "wall_time_s": round(wall_time, 3),
        "outputs": list(outputs),
    }


def _write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _emit(args, command: str, config: dict, payload: dict, t0: float, truncation=None, csv_out=None) -> None:
    """JSON payload to stdout or ``--out``; CSV and manifest files beside it."""
    outputs = []
    if csv_out is not None:
        path, fields, rows = csv_out
        _write_csv(path, fields, rows)
        outputs.append(str(path))
    if args.out:
        outputs.append(str(args.out))
    manifest = build_manifest(command, config, time.perf_counter() - t0, truncation, outputs)
    payload = dict(payload, manifest_hash=manifest["config_hash"])
    text = _dumps(payload)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    anchor = args.out or (csv_out[0] if csv_out else None)
    if anchor:
        Path(str(anchor) + MANIFEST_SUFFIX).write_text(_dumps(manifest) + "\n")


def _load_config(path: str | None) -> dict:
    """TOML or JSON; a manifest file is accepted and its ``config`` block reused."""
    if not path:
        return {}
    try:
        raw = Path(path).read_bytes()
        if path.endswith(".toml"):
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a table/object")
    if "config" in data and "command" in data:
        data = data["config"]
    return data


def _merge(args, config: dict, keys) -> dict:
    """Config-file values fill flags left at their defaults."""
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        if v is None and k in config:
            v = config[k]
        out[k] = v
    unknown = set(config) - set(keys)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return out


def _env_nmax() -> int | None:
    v = os.environ.get(NMAX_ENV)
    if v is None:
        return None
    try:
        n = int(v)
    except ValueError:
        raise UsageError(f"{NMAX_ENV} must be an integer, got {v!r}") from None
    if n < 1:
        raise UsageError(f"{NMAX_ENV} must be positive")
    return n


def _squeeze(cfg: dict) -> SqueezeParam:
    if cfg.get("raw_r") is not None:
        r = float(cfg["raw_r"])
    else:
        r = db_to_r(float(cfg.get("squeeze_db") or 0.0))
    if r < 0:
        raise UsageError("squeezing must be non-negative")
    return SqueezeParam(r, float(cfg["phi"]))


def _word_fidelities(rho) -> dict:
    pair = codes.binomial_codewords()
    m = rho.matrix
    dim = max(m.shape[0], pair.dim)
    padded = np.zeros((dim, dim), complex)
    padded[: m.shape[0], : m.shape[0]] = m
    out = {}
    for name, word in (("0L", pair.zero_word), ("1L", pair.one_word)):
        v = np.zeros(dim, complex)
        v[: word.dim] = word.amplitudes
        out[name] = analysis.fidelity(v, padded)
    return out


# --- commands -----------------------------------------------------------------------------


RUN_KEYS = ("squeeze_db", "raw_r", "phi", "reflectivity", "n1", "n2", "n3", "eta3", "nmax", "include_matrix")


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), RUN_KEYS)
    defaults = {"phi": math.pi / 2, "reflectivity": 0.05, "n1": 0, "n2": 0, "n3": 0, "eta3": 1.0,
                "include_matrix": False}
    for k, v in defaults.items():
        if cfg[k] is None:
            cfg[k] = v
    sq = _squeeze(cfg)
    outcome = OutcomePattern(cfg["n1"], cfg["n2"], cfg["n3"])
    r2 = float(cfg["reflectivity"])
    theta = theta_from_reflectivity(r2)
    eta3 = float(cfg["eta3"])
    if not 0.0 < eta3 <= 1.0:
        raise UsageError("eta3 must be in (0, 1]")
    warning = None
    if theta == 0.0 and outcome.total > 0:
        # weak-subtraction limit: state at R_eff = R, probability vanishes
        lossy = lossy_final_state(outcome, sq, 0.0, eta3)
        if not lossy.components:
            raise NumericalError("outcome has no support")
        state = lossy.density()
        record = {
            "probability": 0.0,
            "parity": {1: "even", -1: "odd"}.get(analysis.parity(state)),
            "symmetry_order": analysis.symmetry_order(state),
            "mean_photon": analysis.mean_photon(state),
            "truncation_health": 0.0,
            "state_diag": np.real(np.diag(state.matrix)).tolist(),
        }
        warning = "reflectivity 0: state is the weak-subtraction limit and the success probability vanishes"
        truncation = {"n_max": None, "path": "analytic"}
    else:
        nmax = cfg["nmax"] or _env_nmax()
        if nmax is not None:
            trunc, strict = TruncationConfig(int(nmax)), eta3 < 1.0
        elif eta3 == 1.0:
            trunc, strict = dense.sector_truncation(outcome), False
        else:
            trunc, strict = TruncationConfig.for_squeezing(sq.r), True
        pc = dense.ProtocolConfig(sq, theta, outcome, eta3=eta3, trunc=trunc, strict=strict)
        res = dense.run_protocol(pc)
        record = res.to_record(include_matrix=bool(cfg["include_matrix"]))
        state = res.state
        truncation = {"n_max": trunc.n_max, "tail_tolerance": trunc.tail_tolerance, "path": "dense"}
        if res.is_zero_probability:
            warning = "outcome has zero probability"
    if state is not None:
        fids = _word_fidelities(state)
        record["fidelity_0L"] = fids["0L"]
        record["fidelity_1L"] = fids["1L"]
    record["outcome"] = list(outcome.as_tuple())
    record["effective_r"] = effective_squeezing(sq.r, math.cos(theta))
    record["warning"] = warning
    _emit(args, "run", cfg, record, t0, truncation)
    return 0


SWEEP_KEYS = ("squeeze_db", "reflectivity", "filter", "eta", "cutoff", "phi", "jobs", "validate", "seed", "csv")


def _floats(v, name):
    if v is None:
        return None
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    try:
        return [float(x) for x in (v if isinstance(v, (list, tuple)) else [v])]
    except ValueError:
        raise UsageError(f"{name} must be a list of numbers") from None


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), SWEEP_KEYS)
    sq = _floats(cfg["squeeze_db"], "squeeze-db")
    r2 = _floats(cfg["reflectivity"], "reflectivity")
    if not sq or not r2:
        raise UsageError("sweep needs --squeeze-db and --reflectivity grids")
    spec = planner.SweepSpec(
        tuple(sq), tuple(r2), planner.OutcomeFilter.parse(cfg["filter"] or "any-2fold"),
        tuple(_floats(cfg["eta"], "eta") or [1.0]), float(cfg["cutoff"] or 1e-8), float(cfg["phi"] or 0.0),
    )
    jobs = int(cfg["jobs"] or os.cpu_count() or 1)
    rows = planner.sweep(spec, jobs)
    csv_path = cfg["csv"] or "sweep.csv"
    payload = {"rows": len(rows), "csv": csv_path, "spec": spec.to_record()}
    if cfg["validate"]:
        payload["spot_check"] = planner.spot_check(spec, seed=int(cfg["seed"] or 0))
    snapshot = {k: v for k, v in cfg.items() if k != "jobs"}  # worker count does not change results
    _emit(args, "sweep", snapshot, payload, t0, {"cutoff": spec.cutoff},
          (csv_path, planner.SweepRow.CSV_FIELDS, [r.as_row() for r in rows]))
    return 0


WIGNER_KEYS = ("state", "eta", "half_width", "points", "csv")


def _wigner_state(name: str, eta: float):
    if name == "vacuum":
        return np.array([1.0 + 0j])
    if name.startswith("fock:"):
        n = int(name[5:])
        v = np.zeros(n + 1, complex)
        v[n] = 1
        return v
    if name in ("0L", "1L"):
        m, beta = (2, math.sqrt(3)) if name == "0L" else (4, 1 / math.sqrt(3))
        sq = codes.squeezing_condition(codes.TwoComponentTarget(m, beta, 4))
        return lossy_final_state((1, 1, m), sq, 0.0, eta).density().matrix
    raise UsageError(f"unknown state {name!r}; use vacuum, fock:N, 0L or 1L")


def cmd_wigner(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), WIGNER_KEYS)
    name = cfg["state"] or "0L"
    eta = float(cfg["eta"] if cfg["eta"] is not None else 1.0)
    if not 0.0 < eta <= 1.0:
        raise UsageError("eta must be in (0, 1]")
    rho = _wigner_state(name, eta)
    hw, pts = cfg["half_width"], cfg["points"]
    if hw is None and pts is None:
        q, p = analysis.default_grid(rho)
    else:
        axis = np.linspace(-float(hw or 6.0), float(hw or 6.0), int(pts or 241))
        q, p = axis, axis.copy()
    grid = analysis.wigner(rho, q, p)
    csv_path = cfg["csv"] or "wigner.csv"
    payload = {
        "state": name,
        "eta": eta,
        "min_w": analysis.wigner_negativity(grid),
        "wln": analysis.wln(grid),
        "integral": grid.integral(),
        "q_range": list(grid.q_range),
        "p_range": list(grid.p_range),
        "resolution": grid.resolution,
        "csv": csv_path,
    }
    qq, pp = np.meshgrid(grid.q, grid.p, indexing="ij")
    rows = zip(qq.ravel(), pp.ravel(), grid.values.ravel())
    _emit(args, "wigner", cfg, payload, t0, None, (csv_path, ("q", "p", "W"), rows))
    return 0


CODES_KEYS = ("code", "m", "reflectivity")


def _code_pair(cfg: dict) -> tuple[codes.CodePair, dict]:
    kind = cfg.get("code") or "binomial"
    if kind == "binomial":
        return codes.binomial_codewords(), {}
    if kind == "error":
        return codes.error_words(), {}
    if kind == "cat":
        m = int(cfg.get("m") or 5)
        theta = theta_from_reflectivity(float(cfg.get("reflectivity") if cfg.get("reflectivity") is not None else 0.1))
        shift = float(cfg.get("unbalance_db") or 0.0)
        sq = codes.balance_cat_pair(m, theta)
        if shift:
            sq = SqueezeParam.from_db(sq.db + shift)
        eff = SqueezeParam(effective_squeezing(sq.r, math.cos(theta)), sq.phi)
        psi01, psi02 = codes.cat_like_pair(m, eff, m + 4)
        info = {"squeeze_db": sq.db, "mean_photon": list(codes.cat_mean_photons(m, eff.r))}
        return codes.CodePair(psi02, psi01, 2, f"cat-m{m}"), info
    raise UsageError(f"unknown code {kind!r}; use binomial, error or cat")


def cmd_codes(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), CODES_KEYS)
    pair, info = _code_pair(cfg)
    _emit(args, "codes", cfg, dict(pair.to_record(), **info), t0)
    return 0


KL_KEYS = ("code", "m", "reflectivity", "errors", "tol", "unbalance_db")


def cmd_kl_check(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), KL_KEYS)
    pair, info = _code_pair(cfg)
    names = (cfg["errors"] or "I,a,n").split(",")
    if any(n not in ("I", "a", "n") for n in names):
        raise UsageError("errors are drawn from I, a, n")
    tol = float(cfg["tol"] or 1e-8)
    blocks, ok = codes.kl_check(pair, codes.error_set(names, pair.dim), tol)
    payload = dict(
        info,
        code=pair.label,
        errors=names,
        tol=tol,
        passed=ok,
        violations=[list(v) for v in codes.kl_violations(blocks, tol)],
        blocks_re=blocks.real.tolist(),
        blocks_im=blocks.imag.tolist(),
    )
    _emit(args, "kl-check", cfg, payload, t0)
    return 0


def cmd_mux(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), ("p", "n", "delta"))
    if cfg["p"] is None:
        raise UsageError("mux needs --p")
    plan = planner.mux(float(cfg["p"]), None if cfg["n"] is None else int(cfg["n"]),
                       None if cfg["delta"] is None else float(cfg["delta"]))
    _emit(args, "mux", cfg, {"p_single": plan.p_single, "n_mux": plan.n_mux, "p_mux": plan.p_mux,
                             "tolerance": plan.tolerance}, t0)
    return 0


def cmd_table1(args) -> int:
    t0 = time.perf_counter()
    cfg = _merge(args, _load_config(args.config), ("reflectivity", "nmax", "csv"))
    r2 = float(cfg["reflectivity"] if cfg["reflectivity"] is not None else 0.1)
    nmax = int(cfg["nmax"] or _env_nmax() or 40)
    rows = planner.table1(r2, n_max=nmax)
    csv_path = cfg["csv"] or "table1.csv"
    payload = {"csv": csv_path, "rows": [dict(zip(planner.Table1Row.CSV_FIELDS, r.as_row())) for r in rows]}
    _emit(args, "table1", cfg, payload, t0, {"n_max": nmax},
          (csv_path, planner.Table1Row.CSV_FIELDS, [r.as_row() for r in rows]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotsym", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="TOML or JSON config, or a manifest to re-run")
        p.add_argument("--out", help="write the JSON result here instead of stdout")

    p = sub.add_parser("run", help="simulate one detection pattern")
    common(p)
    p.add_argument("--squeeze-db", type=float)
    p.add_argument("--raw-r", type=float, help="squeezing parameter R instead of dB")
    p.add_argument("--phi", type=float, help="squeezing phase (default pi/2)")
    p.add_argument("--reflectivity", type=float, help="subtraction beamsplitter r^2 (default 0.05)")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--n3", type=int)
    p.add_argument("--eta3", type=float)
    p.add_argument("--nmax", type=int)
    p.add_argument("--include-matrix", action="store_const", const=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="symmetry-filtered aggregate probabilities")
    common(p)
    p.add_argument("--squeeze-db", help="comma-separated dB grid")
    p.add_argument("--reflectivity", help="comma-separated r^2 grid")
    p.add_argument("--filter", help="any-2fold, any-4fold, all, k-components:K or exact:n1,n2,n3")
    p.add_argument("--eta", help="comma-separated n3 detector efficiencies")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--validate", action="store_const", const=True, help="dense spot check of 5%% of outcomes")
    p.add_argument("--seed", type=int)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wigner", help="Wigner function on a grid")
    common(p)
    p.add_argument("--state", help="vacuum, fock:N, 0L or 1L")
    p.add_argument("--eta", type=float, help="n3 detector efficiency for 0L/1L")
    p.add_argument("--half-width", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_wigner)

    for name, func, help_ in (("codes", cmd_codes, "export code words"), ("kl-check", cmd_kl_check, "Knill-Laflamme check")):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--code", help="binomial, error or cat")
        p.add_argument("--m", type=int)
        p.add_argument("--reflectivity", type=float)
        if name == "kl-check":
            p.add_argument("--errors", help="comma-separated subset of I,a,n")
            p.add_argument("--tol", type=float)
            p.add_argument("--unbalance-db", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("mux", help="multiplexed success probability")
    common(p)
    p.add_argument("--p", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=int)
    g.add_argument("--delta", type=float)
    p.set_defaults(func=cmd_mux)

    p = sub.add_parser("table1", help="balanced cat-pair table")
    common(p)
    p.add_argument("--reflectivity", type=float)
    p.add_argument("--nmax", type=int)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_table1)
    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(2, "usage", exc)
    except (TruncationError, analysis.GridCoverageError, ArithmeticError, np.linalg.LinAlgError, NumericalError) as exc:
        return _fail(3, "numerical", exc)
    except (ValueError, TypeError) as exc:
        return _fail(2, "config", exc)


if __name__ == "__main__":
    sys.exit(main())
