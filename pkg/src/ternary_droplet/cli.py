"""ternary-droplet: command-line front end.

    ternary-droplet <constants|split|lens|energy|check|simulate> --config FILE [overrides]

The JSON config has one optional section per command plus a shared "green"
section and an "output" directory.  Flags override file values.  Exit codes:
0 success, 1 computation diagnostic, 2 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import lens_geometry as lg
from . import limit_energy as le
from . import phase_field as pf
from . import sharp_energy as se
from .torus_green import SingularityError, TorusGreen

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "output": "ternary_out",
    "green": {"fourier_cutoff": 8, "ewald_split": 1 / (4 * math.pi), "grid_n": 256},
    "constants": {"gammas": [0.0, 0.0, 1.0], "eta_ref": le.DEFAULT_ETA_REF, "grid": None, "c3": None},
    "split": {"M": 1.0, "gammas": [0.0, 0.0, 1.0], "eta_ref": le.DEFAULT_ETA_REF, "limit": False,
              "c1": None, "c2": None, "window": 3, "bruteforce": False, "mass_grid": None},
    "lens": {"mass": 1.0, "samples": 201, "oracle": False, "oracle_k": 256},
    "energy": {"sharp": None, "limit": None, "etas": [0.25, 0.125, 0.0625, 0.03125],
               "raster_n": 512, "gamma": [[0.0, 0.0], [0.0, 0.0]],
               "gammas": [0.0, 0.0, 1.0], "M": 1.0, "lamella": {"center": 0.0, "width": 0.5}},
    "check": {"gamma": [[0.0, 0.0], [0.0, 0.0]], "gammas": [0.0, 0.0, 0.0], "M": 1.0, "s": 0.5},
    "simulate": {"n": 128, "steps": 5000, "dt": 5e-5, "eps": 1 / 32, "eta": 0.2, "M": 1.0,
                 "gammas": [0.0, 0.0, 1.0], "gamma_major": [[0.0, 0.0], [0.0, 0.0]],
                 "mobilities": [1.0, 1.0, 1.0], "seed": 0, "noise": 1e-2,
                 "record_every": 50, "frames_every": 1000},
}


class ConfigError(Exception):
    pass


# -- config handling ------------------------------------------------------------

def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key, val in raw.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config section {key!r}")
        if key == "output":
            cfg["output"] = str(val)
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"section {key!r} must be an object")
        for k, v in val.items():
            if k not in DEFAULTS[key]:
                raise ConfigError(f"unknown key {key}.{k}")
            cfg[key][k] = v
    return cfg


def apply_overrides(cfg: dict, section: str, args: argparse.Namespace) -> dict:
    for k in DEFAULTS[section]:
        v = getattr(args, k, None)
        if v is not None:
            cfg[section][k] = v
    for k in DEFAULTS["green"]:
        v = getattr(args, k, None)
        if v is not None:
            cfg["green"][k] = v
    if args.out is not None:
        cfg["output"] = args.out
    return cfg


def _positive(name, v):
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {v!r}") from exc
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name} must be positive and finite, got {v}")
    return v


def _triple(name, v):
    if not (isinstance(v, (list, tuple)) and len(v) == 3):
        raise ConfigError(f"{name} must be three numbers (Gamma10, Gamma20, Gamma00)")
    out = [float(x) for x in v]
    if not all(math.isfinite(x) for x in out):
        raise ConfigError(f"{name} must be finite")
    return out


def _sym2(name, v):
    m = np.asarray(v, dtype=float)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} must be a finite 2x2 matrix")
    if m[0, 1] != m[1, 0]:
        raise ConfigError(f"{name} must be symmetric")
    return m.tolist()


def make_green(cfg: dict) -> TorusGreen:
    try:
        gc = cfg["green"]
        return TorusGreen(int(gc["fourier_cutoff"]), float(gc["ewald_split"]), int(gc["grid_n"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid green parameters: {exc}") from exc


def provenance(command: str, cfg: dict, **extra) -> dict:
    return {
        "command": command,
        "tool": "ternary-droplet",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "green": cfg["green"],
        "parameters": cfg[command],
        **extra,
    }


def _outdir(cfg) -> Path:
    p = Path(cfg["output"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dump(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


# -- commands -------------------------------------------------------------------

def _constants(cfg, g, sec):
    gam = _triple("gammas", sec["gammas"])
    try:
        return le.compute_constants(g, gam, eta_ref=float(sec["eta_ref"]),
                                    grid=None if sec.get("grid") is None else int(sec["grid"]),
                                    c3=sec.get("c3"))
    except le.ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_constants(cfg: dict) -> dict:
    sec = cfg["constants"]
    g = make_green(cfg)
    consts = _constants(cfg, g, sec)
    report = {"constants": consts.to_dict(), "limit": consts.limit().to_dict(),
              "c1_lt_2sqrtpi": consts.c1 < le.BALL_C1,
              "c3R": le.c3R(g), "c_isoper": le.C_ISOPER,
              "c_isoper_oracle": le.isoperimetric_constant_oracle()}
    for name, c in (("thresholds", consts), ("thresholds_limit", consts.limit())):
        try:
            report[name] = le.thresholds(c)._asdict()
        except le.ThresholdUndefinedError as exc:
            report[name] = {"undefined": str(exc)}
    out = _outdir(cfg)
    _dump(out / "constants.json", {**report, "provenance": provenance("constants", cfg)})
    return report


def cmd_split(cfg: dict) -> dict:
    sec = cfg["split"]
    M = _positive("M", sec["M"])
    if sec.get("c1") is not None or sec.get("c2") is not None:
        if sec.get("c1") is None or sec.get("c2") is None:
            raise ConfigError("give both c1 and c2, or neither")
        consts = le.LimitConstants.from_coefficients(float(sec["c1"]), float(sec["c2"]))
    else:
        g = make_green(cfg)
        consts = _constants(cfg, g, {"gammas": sec["gammas"], "eta_ref": sec["eta_ref"]})
        if sec.get("limit"):
            consts = consts.limit()
    res = le.optimal_split(M, consts)
    c1, c2 = consts.c1, consts.c2_lens
    w = int(sec["window"])
    table = [{"N": n, "E": le.split_energy(n, M, c1, c2, consts.c3)}
             for n in range(max(1, res.count - w), res.count + w + 1)]
    report = {"c1": c1, "c2": c2, "c3": consts.c3, **res.to_dict(), "table": table}
    if c2 > 0:
        report["thresholds"] = le.thresholds(consts)._asdict()
    if sec.get("bruteforce"):
        grid = float(sec["mass_grid"]) if sec.get("mass_grid") else M / 200
        try:
            bf = le.split_bruteforce(M, consts, grid, refine=True)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        report["bruteforce"] = {"value": bf.value, "masses": list(bf.splitting),
                                "grid_value": bf.grid_value, "grid_masses": list(bf.grid_splitting),
                                "abs_diff": abs(bf.value - res.energy)}
    out = _outdir(cfg)
    with open(out / "split.csv", "w") as fh:
        fh.write("N,E\n")
        for row in table:
            fh.write(f"{row['N']},{row['E']:.17g}\n")
    _dump(out / "split.json", {**report, "provenance": provenance("split", cfg)})
    return report


def cmd_lens(cfg: dict) -> dict:
    sec = cfg["lens"]
    m = _positive("mass", sec["mass"])
    lens = lg.Lens(m)
    L = lens.chord
    report = {"mass": m, "chord": L, "perimeter": lens.perimeter, "arc_radius": lg.arc_radius(L),
              "contact_angle_deg": lg.contact_angle_deg(L),
              "perimeter_minus_chord": lens.perimeter - L}
    if sec.get("oracle"):
        res = lg.shape_oracle(m, k=int(sec["oracle_k"]))
        exact = lg.lens_profile(np.clip(res.x * L / res.chord, 0, L), L)
        report["oracle"] = {"objective": res.objective, "chord": res.chord,
                            "endpoint_slope": res.endpoint_slope,
                            "max_profile_deviation": float(np.max(np.abs(res.profile - exact))),
                            "deviation_over_L": float(np.max(np.abs(res.profile - exact)) / L),
                            "iterations": res.iterations}
    out = _outdir(cfg)
    lens.to_csv(out / "lens_profile.csv", k=int(sec["samples"]))
    _dump(out / "lens.json", {**report, "provenance": provenance("lens", cfg)})
    return report


def cmd_energy(cfg: dict) -> dict:
    sec = cfg["energy"]
    g = make_green(cfg)
    gam = _triple("gammas", sec["gammas"])
    try:
        params = se.ModelParams(gamma=_sym2("gamma", sec["gamma"]), Gamma10=gam[0], Gamma20=gam[1],
                                Gamma00=gam[2], M=_positive("M", sec["M"]))
        etas = [float(e) for e in sec["etas"]]
        if not etas:
            raise ConfigError("etas must be a non-empty list")
        if sec.get("sharp") is not None:
            base = se.SharpConfig.from_dict(sec["sharp"])
            build = base.with_eta
            limit = None
        elif sec.get("limit") is not None:
            lim = sec["limit"]
            limit = le.DropletConfig.from_list(lim["droplets"], M=lim.get("M"))
            lam = se.Lamella(**sec["lamella"])
            n = int(sec["raster_n"])

            def build(eta):
                return se.recovery_first(limit, lam, eta, raster_n=n)
        else:
            raise ConfigError("energy needs either a 'sharp' configuration or a 'limit' droplet list")
        rows = []
        for eta in etas:
            c = build(eta)
            c.validate()
            E = se.sharp_E(c, params, g)
            EL = se.E_L(c, params, g)
            rows.append({"eta": eta, "E_eta": E, "E_L": EL, "first_order": (E - EL) / eta})
    except (se.ConfigurationError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid energy configuration: {exc}") from exc
    report = {"rows": rows}
    if limit is not None:
        consts = le.compute_constants(g, gam).limit()
        e0v = le.E0(limit, consts)
        report["E0"] = e0v if not isinstance(e0v, le.Inadmissible) else {"inadmissible": e0v.reason}
        if not isinstance(e0v, le.Inadmissible):
            for r in rows:
                r["gap"] = abs(r["first_order"] - e0v)
    out = _outdir(cfg)
    with open(out / "energy.csv", "w") as fh:
        cols = ["eta", "E_eta", "E_L", "first_order"] + (["gap"] if rows and "gap" in rows[0] else [])
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[k]:.17g}" for k in cols) + "\n")
    last = build(etas[-1])
    last.to_json(out / "configuration.json")
    last.to_pgm(out / "configuration.pgm")
    _dump(out / "energy.json", {**report, "provenance": provenance("energy", cfg)})
    return report


def cmd_check(cfg: dict) -> dict:
    sec = cfg["check"]
    g = make_green(cfg)
    gm = _sym2("gamma", sec["gamma"])
    gam = _triple("gammas", sec["gammas"])
    M = _positive("M", sec["M"])
    s = float(sec["s"])
    if not 0 < s < 1:
        raise ConfigError(f"s must lie in (0, 1), got {s}")
    z = le.check_negative_coefficients_zeroth(gm, g)
    f = le.check_negative_coefficients_first(gam, M, s, g)
    report = {"c3R": le.c3R(g), "c_isoper": le.C_ISOPER,
              "zeroth": z._asdict(), "first": f._asdict(), "all_pass": bool(z.ok and f.ok)}
    _dump(_outdir(cfg) / "check.json", {**report, "provenance": provenance("check", cfg)})
    return report


def cmd_simulate(cfg: dict) -> dict:
    sec = cfg["simulate"]
    n = int(sec["n"])
    if n < 16 or n & (n - 1):
        raise ConfigError(f"n must be a power of two >= 16, got {n}")
    eta = _positive("eta", sec["eta"])
    M = _positive("M", sec["M"])
    if eta**2 * M >= 1:
        raise ConfigError("minority fraction eta^2 M must be below 1")
    try:
        p = pf.FlowParams.droplet_regime(
            eta=eta, M=M, Gammas=_triple("gammas", sec["gammas"]),
            gamma_major=_sym2("gamma_major", sec["gamma_major"]),
            eps=_positive("eps", sec["eps"]), dt=_positive("dt", sec["dt"]),
            steps=int(sec["steps"]), mobilities=tuple(sec["mobilities"]),
            record_every=int(sec["record_every"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if p.eps * n < 4:
        raise ConfigError(f"interface unresolved: eps*n = {p.eps * n:.3g} < 4")
    seed = int(sec["seed"])
    init = pf.lamellar_init(n, eta**2 * M, noise=float(sec["noise"]), seed=seed)
    out = _outdir(cfg)
    fe = int(sec["frames_every"]) if sec.get("frames_every") else None
    meta = {"seed": seed, "params": p.to_dict(), "n": n, "dt_max": p.dt_max(n),
            "provenance": provenance("simulate", cfg)}
    try:
        final, trace, frames = pf.simulate(init, p, frames_every=fe)
    except pf.FlowDivergence as exc:
        if exc.last_state is not None:
            se.write_pgm(out / "last_stable.pgm", exc.last_state.labels())
        _dump(out / "simulate.json", {**meta, "error": str(exc), "step": exc.step})
        raise
    for k, s in frames:
        se.write_pgm(out / f"frame_{k:06d}.pgm", s.labels())
    se.write_pgm(out / "final.pgm", final.labels())
    pf.write_trace_csv(out / "trace.csv", trace)
    report = {"final_energy": trace[-1].energy, "localization": pf.localization(final, p.eps),
              "max_simplex_error": max(r.simplex_error for r in trace),
              "max_mass_drift": max(abs(r.mass0 - trace[0].mass0) for r in trace),
              "energy_monotone_after_10": bool(all(
                  trace[i + 1].energy <= trace[i].energy + 1e-10
                  for i in range(len(trace) - 1) if trace[i].step >= 10)),
              "u0_max": float(final.u0.max())}
    _dump(out / "simulate.json", {**meta, **report})
    return report


COMMANDS = {"constants": cmd_constants, "split": cmd_split, "lens": cmd_lens,
            "energy": cmd_energy, "check": cmd_check, "simulate": cmd_simulate}


def _floats(n):
    def parse(s):
        vals = [float(v) for v in s.replace(",", " ").split()]
        if n and len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
        return vals
    return parse


def _matrix2(s):
    v = _floats(4)(s)
    return [[v[0], v[1]], [v[2], v[3]]]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ternary-droplet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--grid-n", dest="grid_n", type=int, help="Green raster resolution")
        p.add_argument("--fourier-cutoff", dest="fourier_cutoff", type=int)
        p.add_argument("--ewald-split", dest="ewald_split", type=float)
        return p

    p = common(sub.add_parser("constants", help="limit constants and thresholds"))
    p.add_argument("--gammas", type=_floats(3), help="'G10 G20 G00'")
    p.add_argument("--eta-ref", dest="eta_ref", type=float)
    p.add_argument("--grid", type=int, help="raster size for the self interactions")
    p.add_argument("--c3", type=float, help="override the background constant")

    p = common(sub.add_parser("split", help="optimal mass splitting"))
    p.add_argument("--M", type=float)
    p.add_argument("--gammas", type=_floats(3))
    p.add_argument("--eta-ref", dest="eta_ref", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--limit", action="store_const", const=True, help="use eta -> 0 constants")
    p.add_argument("--window", type=int)
    p.add_argument("--bruteforce", action="store_const", const=True)
    p.add_argument("--mass-grid", dest="mass_grid", type=float)

    p = common(sub.add_parser("lens", help="optimal lens profile"))
    p.add_argument("--mass", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--oracle", action="store_const", const=True)
    p.add_argument("--oracle-k", dest="oracle_k", type=int)

    p = common(sub.add_parser("energy", help="sharp energy ladder over eta"))
    p.add_argument("--etas", type=_floats(0))
    p.add_argument("--raster-n", dest="raster_n", type=int)
    p.add_argument("--gammas", type=_floats(3))
    p.add_argument("--gamma", type=_matrix2, help="'g11 g12 g21 g22'")
    p.add_argument("--M", type=float)

    p = common(sub.add_parser("check", help="smallness conditions for negative coefficients"))
    p.add_argument("--gamma", type=_matrix2)
    p.add_argument("--gammas", type=_floats(3))
    p.add_argument("--M", type=float)
    p.add_argument("--s", type=float)

    p = common(sub.add_parser("simulate", help="phase-field gradient flow"))
    for name, typ in (("n", int), ("steps", int), ("dt", float), ("eps", float), ("eta", float),
                      ("M", float), ("seed", int), ("noise", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--gammas", type=_floats(3))
    p.add_argument("--gamma-major", dest="gamma_major", type=_matrix2)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--frames-every", dest="frames_every", type=int)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = apply_overrides(load_config(args.config), args.command, args)
        report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pf.FlowDivergence, lg.ConvergenceError, le.SearchBudgetError, SingularityError,
            FloatingPointError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (le.ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
