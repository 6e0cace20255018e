"""Command-line front door: config parsing, subcommand dispatch, and
deterministic CSV/JSON reporting.

Value precedence is flag > BLINDID_SEED environment variable (seed only) >
config file > default. Config files are flat key=value text; unknown keys
are rejected. Exit codes: 0 success, 2 validation error, 3 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import bounds, mc
from .ensembles import (COMPLEX_UNIFORM_BALL, ConstraintScenario,
                        ScenarioError, build_ensemble, mix_seed)
from .lifting import apply_G
from .mc import TrialPlan, _plant_factors
from .recovery import (certify_strong, certify_weak, is_recovered,
                       solve_fixed_support, solve_sparse_enumerate,
                       verify_counterexample)
from .spectral import dft

__all__ = ["RunConfig", "parse_config", "emit_report", "main"]

_SUBCOMMANDS = ("gen", "recover", "certify", "bounds", "smallball",
                "transition", "stability")

# option name -> (type, default); None defaults are filled per subcommand
_OPTION_SPECS = {
    "kind": (str, None),
    "n": (int, None),
    "m1": (int, None),
    "m2": (int, None),
    "s1": (int, None),
    "s2": (int, None),
    "tag": (str, COMPLEX_UNIFORM_BALL),
    "seed": (int, 0),
    "R": (float, None),
    "trials": (int, 100),
    "restarts": (int, 20),
    "noise_level": (float, 0.0),
    "sweep": (str, None),
    "mode": (str, "single_point"),
    "delta": (float, 0.1),
    "epsilon": (float, 0.5),
    "rho": (float, 0.1),
    "ell": (float, 1.0),
    "L": (float, 1.0),
    "level": (str, "weak"),
    "budget": (int, 100),
    "tol": (float, 1e-6),
    "starts": (int, 3),
    "cap": (int, 100_000),
    "workers": (int, 1),
    "out": (str, None),
}

_SCENARIO_KEYS = ("kind", "n", "m1", "m2", "s1", "s2")

_ALLOWED = {
    "gen": _SCENARIO_KEYS + ("tag", "seed", "R", "out"),
    "recover": _SCENARIO_KEYS + ("tag", "seed", "R", "restarts",
                                 "noise_level", "cap", "out"),
    "certify": _SCENARIO_KEYS + ("tag", "seed", "R", "level", "budget",
                                 "tol", "out"),
    "bounds": _SCENARIO_KEYS + ("delta", "epsilon", "R", "rho", "ell", "L",
                                "out"),
    "smallball": ("m1", "m2", "seed", "R", "rho", "trials", "out"),
    "transition": _SCENARIO_KEYS + ("tag", "seed", "R", "trials", "restarts",
                                    "noise_level", "sweep", "cap", "workers",
                                    "out"),
    "stability": _SCENARIO_KEYS + ("tag", "seed", "R", "trials", "sweep",
                                   "mode", "starts", "restarts", "workers",
                                   "out"),
}


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or failed invariant."""


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict


def _read_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _coerce(key: str, raw: str):
    typ, _ = _OPTION_SPECS[key]
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindid",
        description="Identifiability and stability laboratory for lifted "
                    "blind deconvolution.")
    sub = parser.add_subparsers(dest="subcommand")
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        for key in _ALLOWED[name]:
            typ, _ = _OPTION_SPECS[key]
            p.add_argument(f"--{key.replace('_', '-')}", dest=key,
                           type=typ, default=None)
    return parser


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Merge flags, the BLINDID_SEED environment variable, an optional flat
    key=value config file, and per-option defaults (in that precedence)."""
    parser = _build_parser()
    args = parser.parse_args(list(argv))
    if args.subcommand is None:
        raise ConfigError(f"a subcommand is required: one of {', '.join(_SUBCOMMANDS)}")
    allowed = _ALLOWED[args.subcommand]

    file_values = {}
    if args.config is not None:
        raw = _read_config_file(args.config)
        for key, value in raw.items():
            if key not in allowed:
                raise ConfigError(
                    f"unknown config key {key!r} for subcommand {args.subcommand!r}")
            file_values[key] = _coerce(key, value)

    values = {}
    for key in allowed:
        flag_value = getattr(args, key)
        if flag_value is not None:
            values[key] = flag_value
        elif key == "seed" and os.environ.get("BLINDID_SEED") is not None:
            values[key] = _coerce("seed", os.environ["BLINDID_SEED"])
        elif key in file_values:
            values[key] = file_values[key]
        else:
            values[key] = _OPTION_SPECS[key][1]
    return RunConfig(subcommand=args.subcommand, values=values)


def _scenario(v: dict) -> ConstraintScenario:
    missing = [k for k in ("kind", "n", "m1", "m2") if v.get(k) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m for m in missing)}")
    return ConstraintScenario(kind=v["kind"], n=v["n"], m1=v["m1"], m2=v["m2"],
                              s1=v.get("s1"), s2=v.get("s2"))


def _parse_sweep(raw: Optional[str], integral: bool) -> tuple:
    if raw is None:
        raise ConfigError("missing required option --sweep (comma-separated grid)")
    try:
        vals = [int(tok) if integral else float(tok)
                for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep grid {raw!r}") from exc
    if not vals and raw.strip():
        raise ConfigError(f"bad sweep grid {raw!r}")
    return tuple(vals)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def emit_report(result, fmt: str, path: Optional[str]) -> None:
    """Write a result as JSON (sorted keys) or CSV (pre-rendered string),
    always with a trailing newline, to the path or stdout."""
    if fmt == "json":
        text = json.dumps(result, sort_keys=True, default=_json_default) + "\n"
    elif fmt == "csv":
        text = result if result.endswith("\n") else result + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _build(sc: ConstraintScenario, v: dict):
    return build_ensemble(sc, v["tag"], v["seed"],
                          R=mc.ensemble_radius(v["tag"], sc, v["R"]))


def _cmd_gen(v: dict):
    sc = _scenario(v)
    return _build(sc, v).to_manifest(), "json"


def _cmd_recover(v: dict):
    sc = _scenario(v)
    ens = _build(sc, v)
    plant_rng = np.random.default_rng(mix_seed(v["seed"], 1))
    solver_rng = np.random.default_rng(mix_seed(v["seed"], 2))
    real = v["tag"].startswith("real")
    M0 = _plant_factors(sc, real, plant_rng)
    z = apply_G(ens, M0)
    if v["noise_level"] > 0:
        g = plant_rng.standard_normal(sc.n) + 1j * plant_rng.standard_normal(sc.n)
        z = z + v["noise_level"] * g / np.linalg.norm(g)
    z_tilde = dft(z) / np.sqrt(sc.n)
    if sc.kind == "subspace":
        res = solve_fixed_support(ens, z_tilde, range(sc.m1), range(sc.m2),
                                  restarts=v["restarts"], rng=solver_rng, truth=M0)
    else:
        res = solve_sparse_enumerate(ens, z_tilde, sc, restarts=v["restarts"],
                                     rng=solver_rng, cap=v["cap"], truth=M0)
    return {
        "residual": res.residual,
        "lifted_error": res.lifted_error,
        "success": is_recovered(res.M_hat, M0),
        "support": [list(res.support[0]), list(res.support[1])],
        "restarts_used": res.restarts_used,
    }, "json"


def _cmd_certify(v: dict):
    sc = _scenario(v)
    ens = _build(sc, v)
    rng = np.random.default_rng(mix_seed(v["seed"], 3))
    if v["level"] == "weak":
        M0 = _plant_factors(sc, v["tag"].startswith("real"),
                            np.random.default_rng(mix_seed(v["seed"], 1)))
        verdict = certify_weak(ens, M0, budget=v["budget"], tol=v["tol"], rng=rng)
    elif v["level"] == "strong":
        verdict = certify_strong(ens, budget=v["budget"], tol=v["tol"], rng=rng)
    else:
        raise ConfigError(f"level must be 'weak' or 'strong', got {v['level']!r}")
    out = {"status": verdict.status, "search_budget": verdict.search_budget,
           "tolerance": verdict.tolerance}
    if verdict.witness is not None:
        out["witness_verified"] = verify_counterexample(verdict, ens)
    return out, "json"


def _cmd_bounds(v: dict):
    sc = _scenario(v)
    q = bounds.BoundQuery(sc=sc, delta=v["delta"], epsilon=v["epsilon"],
                          R=v["R"] if v["R"] is not None else 1.0,
                          rho=v["rho"], ell=v["ell"], L=v["L"])
    return bounds.make_report(q).to_dict(), "json"


def _cmd_smallball(v: dict):
    if v.get("m1") is None or v.get("m2") is None:
        raise ConfigError("missing required option(s): --m1, --m2")
    rng = np.random.default_rng(v["seed"])
    M = rng.standard_normal((v["m1"], v["m2"])) + 1j * rng.standard_normal((v["m1"], v["m2"]))
    M /= np.linalg.norm(M)
    R = v["R"] if v["R"] is not None else 1.0
    p_hat, se = mc.estimate_small_ball_prob(M, R, v["rho"], v["trials"], rng)
    L = float(np.linalg.norm(M, 2))
    bound = bounds.small_ball_bound("complex", v["rho"], L, L, R, v["m1"], v["m2"])
    return {"p_hat": p_hat, "std_err": se, "bound": bound, "rho": v["rho"],
            "trials": v["trials"]}, "json"


def _transition_plan(v: dict) -> TrialPlan:
    sc = _scenario(v)
    sweep = _parse_sweep(v["sweep"], integral=True)
    return TrialPlan(sc=sc, ensemble_tag=v["tag"], trials=v["trials"],
                     sweep=sweep, master_seed=v["seed"], restarts=v["restarts"],
                     noise_level=v["noise_level"], R=v["R"], cap=v["cap"])


def _cmd_transition(v: dict):
    plan = _transition_plan(v)
    rows = mc.run_phase_transition(plan, workers=v["workers"])
    return mc.transition_csv(rows), "csv"


def _cmd_stability(v: dict):
    sc = _scenario(v)
    sweep = _parse_sweep(v["sweep"], integral=False)
    plan = TrialPlan(sc=sc, ensemble_tag=v["tag"], trials=v["trials"],
                     sweep=sweep, master_seed=v["seed"], restarts=v["restarts"],
                     R=v["R"], mode=v["mode"], starts=v["starts"])
    rows = mc.run_stability_sweep(plan, workers=v["workers"])
    return mc.stability_csv(rows), "csv"


_HANDLERS = {
    "gen": _cmd_gen,
    "recover": _cmd_recover,
    "certify": _cmd_certify,
    "bounds": _cmd_bounds,
    "smallball": _cmd_smallball,
    "transition": _cmd_transition,
    "stability": _cmd_stability,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        result, fmt = _HANDLERS[cfg.subcommand](cfg.values)
    except (ConfigError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    try:
        emit_report(result, fmt, cfg.values.get("out"))
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
