"""Command line front end.

Every subcommand reads an optional JSON config, applies flag overrides,
validates the merged parameters and writes its outputs under --out.
Exit codes: 0 success, 1 failed run or check, 2 schema error, 3 state
outside the relaxed set.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import quantities as Q
from . import scenarios
from .errors import MhdciError, SchemaError
from .laminates import HullParams, Laminate, decompose_full, goodify
from .phase_space import ConstraintParams, State15, State17
from .synthesis import CubeSpec, plateau_fractions, synthesize_laminate, synthesize_wave
from .synthesis.covering import Box, constant_field
from .synthesis.improve import improve_step

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}
_STATE = {"oneOf": [{"type": "string"},
                    {"type": "array", "items": _NUM, "minItems": 18, "maxItems": 18}]}

SCHEMAS = {
    "decompose": {"r": _POS, "s": _POS, "tau": _POS, "eps_tau": _POS, "state": _STATE},
    "goodify": {"r": _POS, "s": _POS, "tau": _POS, "eps_tau": _POS, "state": _STATE,
                "laminate": {"type": "string"}, "certify": {"type": "boolean"}},
    "synthesize": {"r": _POS, "s": _POS, "tau": _POS, "eps": _POS, "segment": {"enum": ["good2", "fluid"]},
                   "ells": {"type": "array", "items": _POS, "minItems": 1},
                   "samples": _INT, "grid": _INT, "t": _NUM, "z": _NUM},
    "improve": {"r": _POS, "s": _POS, "tau": _POS, "eps": _POS, "periods": _INT,
                "gamma": _POS, "samples": _INT, "state": _STATE, "grid": _INT},
    "verify": {"n": _INT, "dt": _POS, "T": _POS, "checks": {
        "type": "array", "items": {"enum": ["beltrami", "maxwell", "2d"]}}, "n2d": _INT},
    "evolve2d": {"n": _INT, "dt": _POS, "T": _POS, "psi0": {"type": "string"},
                 "phi": {"type": "string"}, "keep": _INT},
}

DEFAULTS = {
    "decompose": {"r": 2.0, "s": 1.0, "tau": 0.5, "state": "zero"},
    "goodify": {"r": 2.0, "s": 1.0, "tau": 0.5, "state": "zero", "certify": False},
    "synthesize": {"r": 2.0, "s": 1.0, "tau": 0.5, "eps": 0.05, "segment": "good2",
                   "ells": [8, 16, 32, 64], "samples": 100_000, "grid": 32, "t": 0.0, "z": 0.0},
    "improve": {"r": 2.0, "s": 1.0, "tau": 0.5, "eps": 0.9, "periods": 512, "samples": 1000,
                "state": "zero", "grid": 32},
    "verify": {"n": 64, "dt": 0.05, "T": 1.0, "checks": ["beltrami", "maxwell", "2d"], "n2d": 128},
    "evolve2d": {"n": 256, "dt": 0.01, "T": 1.0, "psi0": "default", "phi": "default", "keep": 10},
}


# --- configuration ----------------------------------------------------------------------

def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise SchemaError(f"cannot read config {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from err
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return cfg


def merge_config(command, cfg, overrides):
    merged = dict(DEFAULTS[command])
    merged.update(cfg)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    schema = {"type": "object", "properties": SCHEMAS[command], "additionalProperties": False}
    try:
        jsonschema.validate(merged, schema)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(f"config field {where}: {err.message}") from err
    return merged


def parse_state(value) -> State15:
    if isinstance(value, list):
        return State15.from_array(value)
    if value == "zero":
        return State15.zero()
    try:
        data = json.loads(Path(value).read_text()) if Path(value).exists() else json.loads(value)
    except (OSError, json.JSONDecodeError) as err:
        raise SchemaError(f"state must be 'zero', 18 numbers or a JSON file: {err}") from err
    if isinstance(data, dict):
        data = data.get("state")
    if not isinstance(data, list) or not all(isinstance(x, (int, float)) for x in data):
        raise SchemaError("state must be a list of 18 numbers [u, S row-major, B, E]")
    return State15.from_array(data)


def _params(cfg):
    return ConstraintParams(cfg["r"], cfg["s"])


def _hull(cfg):
    return HullParams(_params(cfg), cfg["tau"], cfg.get("eps_tau"))


# --- output -----------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


STATE_COLUMNS = ["u1", "u2", "u3", "S11", "S12", "S13", "S22", "S23", "S33",
                 "B1", "B2", "B3", "E1", "E2", "E3"]
_S_UPPER = [3, 4, 5, 7, 8, 11]


def state_columns(states):
    """(N, 18) states to the 15 independent columns."""
    return np.concatenate([states[:, :3], states[:, _S_UPPER], states[:, 12:]], axis=1)


def _slice_grid(cube: CubeSpec, m, z, t):
    """m x m points of the (x, y) slice of the cube at offsets z, t in [-1/2, 1/2]."""
    s = (np.arange(m) + 0.5) / m - 0.5
    X, Y = np.meshgrid(s, s, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.full(m * m, z), np.full(m * m, t)], 1)
    return cube.center + pts * cube.side


def _grid_rows(Y, states):
    cols = state_columns(states)
    return [list(y) + list(c) for y, c in zip(Y, cols)]


# --- subcommands ------------------------------------------------------------------------

def cmd_decompose(cfg, out, rng):
    v = parse_state(cfg["state"])
    hp = _hull(cfg)
    lam = decompose_full(v, hp)
    summary = lam.certify(hp.base)
    summary.update({"bad_splits": lam.bad_count(), "tau": hp.tau, "eps_tau": hp.eps_tau})
    write_json(out / "laminate.json", lam.to_dict())
    write_json(out / "summary.json", summary)
    return summary, 0 if summary["ok"] else 1


def cmd_goodify(cfg, out, rng):
    hp = _hull(cfg)
    if cfg.get("laminate"):
        try:
            lam = Laminate.from_dict(json.loads(Path(cfg["laminate"]).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as err:
            raise SchemaError(f"cannot load laminate: {err}") from err
        if cfg["certify"] and not lam.certify()["ok"]:
            return {"loaded": lam.certify()}, 1
    else:
        # atoms near K_{tau r, tau s}, strictly inside the open set goodify works in
        lam = decompose_full(parse_state(cfg["state"]), HullParams(hp.base.scaled(hp.tau), 0.5))
    before = lam.bad_count()
    good = goodify(lam, hp)
    summary = good.certify()
    summary.update({"bad_before": before, "bad_after": good.bad_count(),
                    "goodify": good.meta.get("goodify", {})})
    write_json(out / "laminate.json", good.to_dict())
    write_json(out / "summary.json", summary)
    return summary, 0 if summary["ok"] and summary["bad_after"] == 0 else 1


def cmd_synthesize(cfg, out, rng):
    params = _params(cfg)
    seg = (scenarios.good2_segment(params, cfg["tau"]) if cfg["segment"] == "good2"
           else scenarios.fluid_segment())
    W0 = State17.lift(seg.base)
    cube = CubeSpec(np.zeros(4), 1.0, cfg["eps"])
    Yc = cube.sample(rng, cfg["samples"])
    ells = [float(x) for x in cfg["ells"]]
    rows, errs = [], []
    wave = None
    for ell in ells:
        wave = synthesize_wave(W0, seg, cube, ell=ell, eps=cfg["eps"])
        err = float(wave.cancellation_error(Yc).max()) if hasattr(wave, "cancellation_error") else 0.0
        frac = plateau_fractions(wave, 2, rng, n=cfg["samples"])
        errs.append(err)
        rows.append([ell, err, frac[0], frac[1]])
    slope = float(np.polyfit(np.log(ells), np.log(errs), 1)[0]) if len(ells) > 1 and min(errs) > 0 else None
    write_csv(out / "sweep.csv", ["ell", "cancellation_error", "fraction_lower", "fraction_upper"], rows)
    Yg = _slice_grid(cube, cfg["grid"], cfg["z"], cfg["t"])
    write_csv(out / "grid.csv", ["x", "y", "z", "t"] + STATE_COLUMNS, _grid_rows(Yg, wave.evaluate(Yg).states()))
    report = {"segment": cfg["segment"], "lam": seg.lam, "ells": ells, "errors": errs, "slope": slope,
              "fractions_lower": [r[2] for r in rows], "fractions_upper": [r[3] for r in rows],
              "target_lower": seg.lam, "target_upper": 1.0 - seg.lam}
    write_json(out / "report.json", report)
    return report, 0


def cmd_improve(cfg, out, rng):
    params = _params(cfg)
    W = State17.lift(parse_state(cfg["state"]))
    field = constant_field(W)
    field, rep = improve_step(field, Box.unit(), params, tau=cfg["tau"], gamma=cfg.get("gamma"),
                              eps=cfg["eps"], periods=cfg["periods"], n_cert=cfg["samples"],
                              seed=int(rng.integers(2**31)))
    report = {k: v for k, v in rep.to_dict().items() if k != "seconds"}
    cube = CubeSpec(np.full(4, 0.5), 1.0)
    Yg = _slice_grid(cube, cfg["grid"], 0.0, 0.0)
    write_csv(out / "grid.csv", ["x", "y", "z", "t"] + STATE_COLUMNS, _grid_rows(Yg, field(Yg).states()))
    write_json(out / "report.json", report)
    return report, 0 if report["gain"] > 0 and report["certified"] == report["samples"] else 1


def cmd_verify(cfg, out, rng):
    result = {}
    n, dt, T = cfg["n"], cfg["dt"], cfg["T"]
    if "beltrami" in cfg["checks"]:
        B = scenarios.beltrami_field(n)
        u = Q.TorusField3(np.zeros_like(B.samples))
        I = Q.integrals(u, B)
        expected = (2 * np.pi) ** 3
        result["beltrami"] = {"energy": I.energy, "cross_helicity": I.cross_helicity,
                              "magnetic_helicity": I.magnetic_helicity, "expected": expected,
                              "ok": abs(I.magnetic_helicity - expected) <= 1e-6}
    if "maxwell" in cfg["checks"]:
        m = min(n, 32)
        B0, u = scenarios.abc_field(m), scenarios.shear_velocity(m)
        Bs, Es = Q.evolve_induction(B0, u, dt, T)
        rep = Q.helicity_drift(Bs, Es, dt)
        budget = 10 * (dt**2 + m**-2) * float(np.sqrt(np.mean(B0.samples**2)))
        rows = []
        for j, (Bj, Ej) in enumerate(zip(Bs, Es)):
            I = Q.integrals(Q.TorusField3(np.zeros_like(Bj.samples)), Bj)
            rows.append([j * dt, I.energy, I.cross_helicity, rep.helicity[j], "", rep.maxwell_residual])
        write_csv(out / "maxwell.csv", ["t", "energy", "crossHelicity", "magneticHelicity", "msmp",
                                        "residual"], rows)
        result["maxwell"] = {"drift_per_time": rep.drift_per_time, "budget": budget,
                             "max_discrepancy": rep.max_discrepancy,
                             "maxwell_residual": rep.maxwell_residual,
                             "ok": rep.drift_per_time <= budget}
    if "2d" in cfg["checks"]:
        m = cfg["n2d"]
        evo = Q.evolve_2d(scenarios.default_phi(m), scenarios.default_psi0(m), None, T)
        floor = Q.poincare_floor(evo)
        write_csv(out / "evolve2d.csv", ["t", "energy", "crossHelicity", "magneticHelicity", "msmp",
                                         "residual"],
                  [[t, 0.5 * e, "", "", s, ""] for t, e, s in zip(evo.times, evo.magnetic_energy, evo.msmp)])
        result["2d"] = {"msmp_drift": evo.msmp_drift, "dt": evo.dt, "floor_ok": floor.ok,
                        "min_magnetic_energy": floor.min_magnetic_energy, "ok": floor.ok}
    write_json(out / "verify.json", result)
    return result, 0 if all(v["ok"] for v in result.values()) else 1


def _load_scalar(source, n, kind):
    if source == "default":
        return scenarios.default_psi0(n) if kind == "psi0" else scenarios.default_phi(n)
    if source == "zero":
        return np.zeros((n, n))
    a, _ = Q.load_field(source)
    if a.shape != (n, n):
        raise SchemaError(f"{kind} grid has shape {a.shape}, expected ({n}, {n})")
    return a


def cmd_evolve2d(cfg, out, rng):
    n = cfg["n"]
    psi0 = _load_scalar(cfg["psi0"], n, "psi0")
    phi = psi0 if cfg["phi"] == "psi0" else _load_scalar(cfg["phi"], n, "phi")
    evo = Q.evolve_2d(phi, psi0, cfg["dt"], cfg["T"], keep=cfg["keep"])
    floor = Q.poincare_floor(evo)
    write_csv(out / "evolve2d.csv", ["t", "msmp", "magnetic_energy", "floor"],
              [[t, s, e, f] for t, s, e, f in zip(evo.times, evo.msmp, evo.magnetic_energy, floor.floor)])
    Q.save_field(out / "psi_final.f64", evo.psi[-1], kind="stream")
    report = {"dt": evo.dt, "cfl": evo.cfl, "msmp_drift": evo.msmp_drift,
              "msmp_initial": float(evo.msmp[0]), "min_magnetic_energy": floor.min_magnetic_energy,
              "floor_ok": floor.ok}
    write_json(out / "report.json", report)
    return report, 0 if floor.ok else 1


COMMANDS = {
    "decompose": (cmd_decompose, "hull decomposition of a state into a laminate"),
    "goodify": (cmd_goodify, "replace bad splits of a laminate by good ones"),
    "synthesize": (cmd_synthesize, "localized wave along a good segment with a frequency sweep"),
    "improve": (cmd_improve, "one convex-integration step from a constant subsolution"),
    "verify": (cmd_verify, "conserved-quantity checks on the torus"),
    "evolve2d": (cmd_evolve2d, "2D advection of the magnetic stream function"),
}

FLAGS = {
    "r": float, "s": float, "tau": float, "eps_tau": float, "eps": float, "state": str,
    "laminate": str, "periods": int, "gamma": float, "samples": int, "grid": int,
    "n": int, "n2d": int, "dt": float, "T": float, "psi0": str, "phi": str, "keep": int,
    "segment": str, "t": float, "z": float,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mhdci", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with parameters")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default="out")
        for key in SCHEMAS[name]:
            if key in FLAGS:
                p.add_argument("--" + key.replace("_", "-"), dest=key, type=FLAGS[key], default=None)
        if "ells" in SCHEMAS[name]:
            p.add_argument("--ells", type=float, nargs="+", default=None)
        if "checks" in SCHEMAS[name]:
            p.add_argument("--checks", nargs="+", default=None)
        if "certify" in SCHEMAS[name]:
            p.add_argument("--certify", action="store_true", default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    overrides = {k: getattr(args, k) for k in SCHEMAS[args.command] if hasattr(args, k)}
    try:
        cfg = merge_config(args.command, load_config(args.config) if args.config else {}, overrides)
        Q.set_workers(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary, code = fn(cfg, out, np.random.default_rng(args.seed))
    except MhdciError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err),
                          **({"inequality": err.inequality} if getattr(err, "inequality", None) else {})}),
              file=sys.stderr)
        return err.exit_code
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    return code


if __name__ == "__main__":
    sys.exit(main())
