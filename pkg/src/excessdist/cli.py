"""Command-line front end.

Every command writes a CSV of curve points to ``--out`` and a summary JSON
next to it (``<out stem>.summary.json``).  The summary's ``config`` entry is
a complete run configuration: ``excessdist run --config summary.json``
reproduces the CSV byte for byte.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds_ach, bounds_conv, oracle, rd_solvers, simulate
from .curves import ESTIMATE, EXACT, LOWER, UPPER, BoundCurve, BoundPoint, _jsonable, emit_csv
from .errors import ConfigError, ExcessDistError
from .source_model import instance_from_dict, instance_to_dict

log = logging.getLogger("excessdist")

COMMANDS = ("rd", "ach", "conv", "oracle", "simulate", "example")
DEFAULTS = {
    "command": None,
    "instance": None,
    "instance_path": None,
    "m_codewords": [1],
    "gamma_grid": None,
    "eps_prime_grid": None,
    "trials": 10000,
    "seed": None,
    "budget": oracle.DEFAULT_BUDGET,
    "exact_lp": False,
    "refine_budget": 50,
    "scheme": None,
    "Q": None,
    "P_yhat": None,
    "eps_prime": 0.0,
    "gamma": 1.0,
    "example": {"m": 10, "n": 6, "p": 0.1, "d1": 6.0, "d2": 0.5},
    "compare_generic": False,
    "out": "out.csv",
}


# --------------------------------------------------------------------------
# parsing


def parse_m_range(text) -> list[int]:
    """``"A..B"`` (inclusive), ``"1,2,8"``, or a list of ints."""
    if isinstance(text, (list, tuple)):
        vals = list(text)
    else:
        text = str(text).strip()
        if ".." in text:
            a, _, b = text.partition("..")
            try:
                vals = list(range(int(a), int(b) + 1))
            except ValueError:
                raise ConfigError(f"bad M range {text!r}") from None
        else:
            try:
                vals = [int(t) for t in text.split(",") if t.strip()]
            except ValueError:
                raise ConfigError(f"bad M list {text!r}") from None
    if not vals:
        raise ConfigError("the M range is empty")
    if any(isinstance(v, bool) or int(v) != v or v < 1 for v in vals):
        raise ConfigError(f"M values must be positive integers, got {vals}")
    return [int(v) for v in vals]


def parse_grid(text, name: str):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(t) for t in str(text).split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"bad {name} {text!r}") from None
    if not vals:
        raise ConfigError(f"{name} is empty")
    return vals


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, ``--config`` and explicit flags into one config."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        loaded = _load_json(args.config)
        loaded = loaded.get("config", loaded)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    if args.command != "run":
        cfg["command"] = args.command
    flags = {
        "instance_path": args.instance, "m_codewords": args.m_codewords,
        "gamma_grid": args.gamma_grid, "eps_prime_grid": args.eps_prime_grid,
        "trials": args.trials, "seed": args.seed, "budget": args.budget,
        "scheme": getattr(args, "scheme", None), "eps_prime": getattr(args, "eps_prime", None),
        "gamma": getattr(args, "gamma", None), "out": args.out,
    }
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    if args.exact_lp:
        cfg["exact_lp"] = True
    if getattr(args, "compare_generic", False):
        cfg["compare_generic"] = True
    if args.command == "example":
        ex = dict(cfg["example"])
        for k in ("m", "n", "p", "d1", "d2"):
            v = getattr(args, f"ex_{k}")
            if v is not None:
                ex[k] = v
        cfg["example"] = ex
    return _validate(cfg)


def _validate(cfg: dict) -> dict:
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {cfg['command']!r}")
    cfg["m_codewords"] = parse_m_range(cfg["m_codewords"])
    cfg["gamma_grid"] = parse_grid(cfg["gamma_grid"], "gamma grid")
    cfg["eps_prime_grid"] = parse_grid(cfg["eps_prime_grid"], "epsilon' grid")
    if cfg["gamma_grid"] and min(cfg["gamma_grid"]) < 0:
        raise ConfigError("gamma grid values must be >= 0")
    if cfg["eps_prime_grid"] and not all(0 <= e <= 1 for e in cfg["eps_prime_grid"]):
        raise ConfigError("epsilon' grid values must lie in [0, 1]")
    if int(cfg["trials"]) < 1:
        raise ConfigError("trials must be >= 1")
    if int(cfg["budget"]) < 1:
        raise ConfigError("budget must be >= 1")
    if cfg["command"] == "simulate":
        if cfg["seed"] is None:
            raise ConfigError("simulate needs an explicit --seed")
        if cfg["scheme"] not in ("thm1", "thm4", "thm5"):
            raise ConfigError("simulate needs --scheme thm1, thm4 or thm5")
    if cfg["command"] != "example" and cfg["instance"] is None:
        if cfg["instance_path"] is None:
            raise ConfigError(f"{cfg['command']} needs an instance (--instance PATH)")
        cfg["instance"] = _load_json(cfg["instance_path"])
    if cfg["instance"] is not None:
        # normalize through the parser so the echo is canonical
        cfg["instance"] = instance_to_dict(instance_from_dict(cfg["instance"]))
    return cfg


# --------------------------------------------------------------------------
# commands


def _instance(cfg):
    return instance_from_dict(cfg["instance"])


def _cmd_rd(cfg):
    inst = _instance(cfg)
    out = {}
    if inst.d1.is_logloss:
        out["R1"] = rd_solvers.logloss_r1(inst.p_x, inst.D1).rate
        r2 = rd_solvers.solve_r2(inst.source, inst.d2, inst.D2)
        out["R2"] = r2.rate
        regime = rd_solvers.check_logloss_regime(inst.source, inst.d2, inst.D1, inst.D2, r2)
        out["regime"] = regime.__dict__
        if regime.applicable:
            ach = rd_solvers.construct_logloss_achiever(inst.source, inst.d2, r2, inst.D1, inst.D2)
            out["R"] = ach.rate
            out["distortions"] = list(ach.distortions)
    else:
        if math.isfinite(inst.D1):
            out["R1"] = rd_solvers.solve_r1(inst.p_x, inst.d1, inst.D1).rate
        out["R2"] = rd_solvers.solve_r2(inst.source, inst.d2, inst.D2).rate
        joint = rd_solvers.solve_joint(inst.source, inst.d1, inst.d2, inst.D1, inst.D2)
        out.update(R=joint.rate, lambda1=joint.lambda1, lambda2=joint.lambda2,
                   distortions=list(joint.distortions))
    return [], out


def _p_candidates(inst, cfg):
    if cfg["P_yhat"] is not None:
        return [np.asarray(cfg["P_yhat"], dtype=float)]
    k = inst.n_yhat
    cands = [np.full(k, 1.0 / k)]
    try:
        r2 = rd_solvers.solve_r2(inst.source, inst.d2, inst.D2)
        cands.append(np.clip(r2.output_marginal, 0, None) / r2.output_marginal.sum())
    except ExcessDistError:
        pass
    return cands


def _cmd_ach(cfg):
    base = _instance(cfg)
    curves: dict[str, list[BoundPoint]] = {}
    for M in cfg["m_codewords"]:
        inst = base.with_M(M)
        if inst.d1.is_logloss:
            pt = bounds_ach.thm5_optimize(inst, _p_candidates(inst, cfg),
                                          cfg["eps_prime_grid"], cfg["gamma_grid"])
            curves.setdefault("thm5", []).append(pt)
            continue
        if math.isinf(inst.D1):
            pt = bounds_ach.thm4_optimize(inst, _p_candidates(inst, cfg), cfg["eps_prime_grid"])
            curves.setdefault("thm4", []).append(pt)
        cands = None if cfg["Q"] is None else {"given": np.asarray(cfg["Q"], dtype=float)}
        _, pt = bounds_ach.thm1_optimize_q(inst, cands, budget=int(cfg["refine_budget"]))
        curves.setdefault("thm1", []).append(pt)
    return [BoundCurve(t, UPPER, tuple(p)) for t, p in curves.items()], {}


def _cmd_conv(cfg):
    base = _instance(cfg)
    pts, tag = [], None
    if base.d1.is_logloss:
        for M in cfg["m_codewords"]:
            pts.append(bounds_conv.cor1_bound(base.with_M(M), cfg["gamma_grid"], cfg["exact_lp"]))
        tag = "cor1"
    else:
        rd = rd_solvers.solve_joint(base.source, base.d1, base.d2, base.D1, base.D2)
        for M in cfg["m_codewords"]:
            pts.append(bounds_conv.thm2_bound(base.with_M(M), rd, cfg["gamma_grid"], cfg["exact_lp"]))
        tag = "thm2"
    return [BoundCurve(tag, LOWER, tuple(pts))], {}


def _cmd_oracle(cfg):
    base = _instance(cfg)
    pts, codes = [], {}
    for M in cfg["m_codewords"]:
        eps, code = oracle.oracle_eps_star(base.with_M(M), int(cfg["budget"]))
        pts.append(BoundPoint.make(M, eps, "oracle", EXACT, {}))
        codes[str(M)] = code.to_dict()
    value = pts[0].value if len(pts) == 1 else [p.value for p in pts]
    return [BoundCurve("oracle", EXACT, tuple(pts))], {"value": value, "codes": codes}


def _cmd_simulate(cfg):
    base = _instance(cfg)
    scheme, seed, trials = cfg["scheme"], int(cfg["seed"]), int(cfg["trials"])
    pts, reports = [], {}
    for M in cfg["m_codewords"]:
        inst = base.with_M(M)
        if scheme == "thm1":
            k = inst.n_xhat * inst.n_yhat
            Q = cfg["Q"] if cfg["Q"] is not None else np.full(k, 1.0 / k)
            rep = simulate.simulate_thm1_code(inst, Q, trials, seed)
        else:
            P = cfg["P_yhat"] if cfg["P_yhat"] is not None else np.full(inst.n_yhat, 1.0 / inst.n_yhat)
            if scheme == "thm4":
                rep = simulate.simulate_thm4_code(inst, P, float(cfg["eps_prime"]), trials, seed)
            else:
                rep = simulate.simulate_thm5_code(inst, P, float(cfg["eps_prime"]),
                                                  float(cfg["gamma"]), trials, seed)
        reports[str(M)] = rep.to_dict()
        pts.append(BoundPoint.make(M, rep.estimate, f"sim_{scheme}", ESTIMATE,
                                   {"std_error": rep.std_error, "trials": trials, "seed": seed}))
    return [BoundCurve(f"sim_{scheme}", ESTIMATE, tuple(pts))], {"reports": reports}


def _cmd_example(cfg):
    ex = cfg["example"]
    m, n, p, D1, D2 = int(ex["m"]), int(ex["n"]), float(ex["p"]), float(ex["d1"]), float(ex["d2"])
    Ms = cfg["m_codewords"]
    conv = bounds_conv.example_conv_curve(m, Ms)
    ach = bounds_ach.example_ach_curve(m, n, p, D1, Ms, D2=D2, gammas=cfg["gamma_grid"])
    extra = {}
    if cfg["compare_generic"]:
        inst = bounds_ach.example_instance(m, n, p, D1, D2)
        extra["generic_cor1"] = {str(M): bounds_conv.cor1_bound(inst.with_M(M), cfg["gamma_grid"]).value
                                 for M in Ms}
    return [conv, ach], extra


HANDLERS = {"rd": _cmd_rd, "ach": _cmd_ach, "conv": _cmd_conv, "oracle": _cmd_oracle,
            "simulate": _cmd_simulate, "example": _cmd_example}


def summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".summary.json")


def run(cfg: dict) -> dict:
    """Execute a validated config; writes the CSV and the summary JSON."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rd_solvers.DegenerateSlopeWarning)
        curves, results = HANDLERS[cfg["command"]](cfg)
    emit_csv(curves, cfg["out"])
    summary = {"config": cfg, "results": results,
               "curves": {c.tag: {"direction": c.direction, "M": c.Ms(), "value": c.values()}
                          for c in curves}}
    with open(summary_path(cfg["out"]), "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration (or a previous summary JSON)")
    p.add_argument("--instance", help="JSON instance file")
    p.add_argument("--out", help="CSV output path (summary JSON goes alongside)")
    p.add_argument("--m-codewords", help="codebook sizes: A..B or a comma list")
    p.add_argument("--gamma-grid", help="comma list of gamma values (bits)")
    p.add_argument("--eps-prime-grid", help="comma list of epsilon' thresholds")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int, help="oracle enumeration budget")
    p.add_argument("--exact-lp", action="store_true", help="converse via the inf-sup LP")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="excessdist",
                                     description="Single-shot excess-distortion bounds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name == "simulate":
            p.add_argument("--scheme", choices=("thm1", "thm4", "thm5"))
            p.add_argument("--eps-prime", type=float)
            p.add_argument("--gamma", type=float)
        if name == "example":
            p.add_argument("--m", dest="ex_m", type=int)
            p.add_argument("--n", dest="ex_n", type=int)
            p.add_argument("--p", dest="ex_p", type=float)
            p.add_argument("--d1", dest="ex_d1", type=float)
            p.add_argument("--d2", dest="ex_d2", type=float)
            p.add_argument("--compare-generic", action="store_true",
                           help="also report the generic log-loss converse")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        run(cfg)
    except ExcessDistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    log.info("wrote %s", cfg["out"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
