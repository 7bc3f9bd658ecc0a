"""Configuration-driven command-line front end.

``willmore4 run <config.json>`` executes the analysis verbs listed in the
configuration and writes one JSON report per verb (plus optional CSV field
dumps).  Exit status: 0 when every declared gate passes, 1 when a gate
fails, 2 on configuration errors, 3 on violated preconditions, 4 on numeric
errors.  Reports embed the resolved configuration and the library version
and are byte-identical across runs (sorted keys, floats as %.12e, no
timestamps).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ambient import gaussian_bump_lambda, constant_lambda, make_ambient
from .catalog import PREFERRED_AMBIENT, make_surface
from .errors import ConfigError, NumericError, PreconditionError, WillmoreError
from .invariants import (conformal_covariance_suite, isotropic_indices,
                         moebius_metric, superconformal_flags, willmore_energies)
from .secondvar import (VariationField, clifford_second_variation,
                        flat_torus_spectrum, hessian_spectrum,
                        jacobi_operator_spectrum, second_variation_general,
                        wminus_second_variation)
from .surface import build_frame, gauss_codazzi_ricci_residuals, invariant_fields
from .willmore import (el_residuals, first_variation, first_variation_fd,
                       holomorphic_differential_residuals)

KNOWN_TOP_KEYS = {"ambient", "surface", "analysis", "output"}
KNOWN_VERBS = ("analyze", "willmore-check", "covariance", "index",
               "stability", "spectrum")


# ---------------------------------------------------------------------------
# strict configuration parsing
# ---------------------------------------------------------------------------

def _require_keys(d: dict, allowed: set, path: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys at {path}: {sorted(unknown)}")


def load_config(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    _require_keys(cfg, KNOWN_TOP_KEYS, "$")
    surface = cfg.get("surface")
    if not isinstance(surface, dict) or "name" not in surface:
        raise ConfigError("config requires surface.name")
    _require_keys(surface, {"name", "grid", "params", "mode"}, "$.surface")
    grid = surface.get("grid", [64, 64])
    if (not isinstance(grid, list) or len(grid) != 2
            or any(not isinstance(g, int) or g < 16 for g in grid)):
        raise ConfigError("surface.grid must be two integers >= 16")
    ambient = cfg.get("ambient", {})
    if ambient:
        _require_keys(ambient, {"name", "params"}, "$.ambient")
    analysis = cfg.get("analysis", [])
    if not isinstance(analysis, list):
        raise ConfigError("analysis must be a list of verb objects")
    for i, verb in enumerate(analysis):
        if not isinstance(verb, dict) or "verb" not in verb:
            raise ConfigError(f"analysis[{i}] must be an object with 'verb'")
        if verb["verb"] not in KNOWN_VERBS:
            raise ConfigError(f"unknown verb {verb['verb']!r}; "
                              f"choose from {KNOWN_VERBS}")
        allowed = {"verb", "gates", "options"}
        _require_keys(verb, allowed, f"$.analysis[{i}]")
        gates = verb.get("gates", {})
        for key, tol in gates.items():
            if isinstance(tol, (int, float)) and key.endswith("_max") and tol <= 0:
                raise ConfigError(f"gate tolerance {key} must be positive")
    output = cfg.get("output", {})
    if output:
        _require_keys(output, {"directory", "formats"}, "$.output")
    return cfg


# ---------------------------------------------------------------------------
# deterministic report serialization
# ---------------------------------------------------------------------------

def _format(obj):
    if isinstance(obj, float):
        return f"%.12e" % obj
    if isinstance(obj, (np.floating,)):
        return f"%.12e" % float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _format(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_format(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_format(v) for v in obj.tolist()]
    return obj


def write_report(directory: Path, name: str, payload: dict, cfg: dict) -> Path:
    body = {"report": name, "version": __version__,
            "config": cfg, "data": payload}
    text = json.dumps(_format(body), indent=2, sort_keys=True)
    path = directory / f"{name}.json"
    path.write_text(text + "\n")
    return path


def write_csv(directory: Path, name: str, fields: dict) -> Path:
    path = directory / f"{name}.csv"
    keys = sorted(fields)
    arrays = [np.asarray(fields[k]) for k in keys]
    n, m = arrays[0].shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j"] + keys)
        for i in range(n):
            for j in range(m):
                row = [i, j]
                for arr in arrays:
                    val = arr[i, j]
                    if np.iscomplexobj(arr):
                        row.append("%.12e%+.12ej" % (val.real, val.imag))
                    else:
                        row.append("%.12e" % val)
                writer.writerow(row)
    return path


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _run_analyze(ctx, options):
    jet, ambient, frame, inv = ctx["jet"], ctx["ambient"], ctx["frame"], ctx["inv"]
    gauss, cphi, cpsi, ricci = gauss_codazzi_ricci_residuals(inv, ambient, frame)
    data = {
        "gcr_sup_norms": {
            "gauss": float(np.max(np.abs(gauss))),
            "codazzi_phi": float(np.max(np.abs(cphi))),
            "codazzi_psi": float(np.max(np.abs(cpsi))),
            "ricci": float(np.max(np.abs(ricci))),
        },
        "field_ranges": {
            "max_abs_H": float(np.max(np.abs(inv.H))),
            "max_abs_phi": float(np.max(np.abs(inv.phi))),
            "max_abs_psi": float(np.max(np.abs(inv.psi))),
        },
        "superconformal": superconformal_flags(inv),
    }
    if jet.domain.kind == "torus":
        data["energies"] = willmore_energies(inv).as_dict()
        try:
            _, g_area = moebius_metric(inv)
            data["moebius_area"] = g_area
        except WillmoreError:
            data["moebius_area"] = None
    fields = {"abs_phi": np.abs(inv.phi), "abs_psi": np.abs(inv.psi),
              "abs_H": np.abs(inv.H), "R1212": inv.R1212, "R1234": inv.R1234}
    return data, fields


def _run_willmore_check(ctx, options):
    ambient, inv, frame = ctx["ambient"], ctx["inv"], ctx["frame"]
    rep = el_residuals(inv, ambient, frame)
    data = {"el": rep.as_dict()}
    if ambient.symmetry_flag and frame.mode == "isothermal" \
            and float(np.max(np.abs(inv.H))) < 1e-8:
        data["holomorphic"] = holomorphic_differential_residuals(inv, ambient).as_dict()
    if options.get("fd_check"):
        rng = np.random.default_rng(int(options.get("seed", 1)))
        v = np.conj(rep.residual_local)
        if float(np.max(np.abs(v))) < 1e-10:
            v = np.exp(1j * ctx["jet"].u) * 0 + rng.standard_normal(ctx["jet"].shape)
        analytic = first_variation(inv, ambient, v)
        fd = first_variation_fd(ctx["jet"], ambient, frame, v)
        data["first_variation"] = {"analytic": analytic, "finite_difference": fd,
                                   "rel_error": abs(analytic - fd) /
                                   max(abs(fd), 1e-14)}
    fields = {"el_local_re": np.real(rep.residual_local),
              "el_local_im": np.imag(rep.residual_local)}
    return data, fields


def _run_covariance(ctx, options):
    jet, ambient = ctx["jet"], ctx["ambient"]
    height = float(options.get("bump_height", 0.1))
    width = float(options.get("bump_width", 1.0))
    center = options.get("bump_center")
    if center is None:
        center = [float(x) for x in jet.x.reshape(-1, 4)[0]]
    lam = gaussian_bump_lambda(height, center, width)
    drifts = conformal_covariance_suite(jet, ambient, lam)
    return {"drifts": drifts, "max_drift": max(drifts.values())}, {}


def _run_index(ctx, options):
    inv = ctx["inv"]
    which = options.get("which", "phi")
    rep = isotropic_indices(inv, which=which,
                            loop_radius=int(options.get("loop_radius", 4)))
    data = rep.as_dict()
    data["which"] = which
    data["matches_expected"] = (rep.expected is not None
                                and rep.index_sum == rep.expected)
    return data, {}


def _run_stability(ctx, options):
    inv = ctx["inv"]
    form = options.get("form", "W")
    n_max = int(options.get("nmax", 6))
    null_tol = options.get("null_tol")
    if form in ("W", "W-"):
        rep = hessian_spectrum(inv, form=form, n_max=n_max,
                               null_tol=None if null_tol is None else float(null_tol))
    elif form == "jacobi":
        rep = jacobi_operator_spectrum(inv, n_max=n_max)
    elif form == "W+":
        rep = jacobi_operator_spectrum(inv, n_max=n_max)
        rep.extras["note"] = ("W+ stability of a complex curve is the Jacobi "
                              "spectrum statement")
    else:
        raise ConfigError(f"unknown stability form {form!r}")
    data = rep.as_dict()
    fields = {}
    eig_table = {"eigenvalue_index": np.arange(len(rep.eigenvalues))[None, :],
                 "eigenvalue": np.asarray(rep.eigenvalues)[None, :]}
    return data, eig_table


def _run_spectrum(ctx, options):
    n_max = int(options.get("nmax", 6))
    pairs = flat_torus_spectrum(n_max, lattice=ctx["jet"].domain.lattice)
    return {"eigenvalues": [{"value": lam, "multiplicity": m} for lam, m in pairs]}, {}


VERB_RUNNERS = {
    "analyze": _run_analyze,
    "willmore-check": _run_willmore_check,
    "covariance": _run_covariance,
    "index": _run_index,
    "stability": _run_stability,
    "spectrum": _run_spectrum,
}


def _check_gates(gates: dict, data: dict) -> list:
    """Gate keys are dotted paths into the report with _max / _min suffixes."""
    failures = []
    for key, bound in gates.items():
        if key.endswith("_max"):
            path, kind = key[:-4], "max"
        elif key.endswith("_min"):
            path, kind = key[:-4], "min"
        else:
            raise ConfigError(f"gate {key!r} must end with _max or _min")
        node = data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"gate path {path!r} not found in report")
            node = node[part]
        value = float(node) if not isinstance(node, bool) else node
        ok = value <= bound if kind == "max" else value >= bound
        if not ok:
            failures.append({"gate": key, "bound": bound, "value": value})
    return failures


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def run(cfg: dict, out_dir: str | os.PathLike | None = None) -> int:
    surface_cfg = cfg["surface"]
    name = surface_cfg["name"]
    shape = tuple(surface_cfg.get("grid", [64, 64]))
    ambient_cfg = cfg.get("ambient") or {"name": PREFERRED_AMBIENT.get(name, "flat-r4")}
    ambient = make_ambient(ambient_cfg.get("name"), ambient_cfg.get("params"))
    jet = make_surface(name, shape, surface_cfg.get("params"))
    mode = surface_cfg.get("mode", "auto")
    frame = build_frame(jet, ambient, mode=mode)
    inv = invariant_fields(jet, ambient, frame)
    ctx = {"jet": jet, "ambient": ambient, "frame": frame, "inv": inv}

    output_cfg = cfg.get("output", {})
    directory = Path(out_dir or output_cfg.get("directory", "."))
    directory.mkdir(parents=True, exist_ok=True)
    formats = output_cfg.get("formats", ["json"])

    all_ok = True
    for i, verb_cfg in enumerate(cfg.get("analysis", [])):
        verb = verb_cfg["verb"]
        options = verb_cfg.get("options", {})
        data, fields = VERB_RUNNERS[verb](ctx, options)
        failures = _check_gates(verb_cfg.get("gates", {}), data)
        data["gate_failures"] = failures
        data["gates_passed"] = not failures
        if failures:
            all_ok = False
        write_report(directory, f"{i:02d}-{verb}", data, cfg)
        if "csv" in formats and fields:
            write_csv(directory, f"{i:02d}-{verb}", fields)
    return 0 if all_ok else 1


def _catalog_text() -> str:
    from .ambient import AMBIENT_CATALOG
    from .catalog import SURFACE_CATALOG
    lines = ["surfaces:"]
    for key in sorted(SURFACE_CATALOG) + ["custom"]:
        lines.append(f"  {key}")
    lines.append("ambients:")
    for key in sorted(AMBIENT_CATALOG) + ["custom"]:
        lines.append(f"  {key}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="willmore4",
                                     description="Willmore-surface analysis in "
                                     "4-manifolds")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a run configuration")
    runp.add_argument("config", nargs="?", help="path to a JSON run config")
    runp.add_argument("--verb", help="single verb for a config-free quick run")
    runp.add_argument("--surface", help="catalog surface for quick runs")
    runp.add_argument("--ambient", help="ambient model for quick runs")
    runp.add_argument("--grid", type=int, default=64)
    runp.add_argument("--form", default="W")
    runp.add_argument("--nmax", type=int, default=6)
    runp.add_argument("--null-tol", type=float, default=None)
    runp.add_argument("--fd-check", action="store_true")
    runp.add_argument("--out", default=None, help="output directory")
    sub.add_parser("catalog", help="list built-in surfaces and ambients")

    args = parser.parse_args(argv)
    threads = os.environ.get("W4_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)

    if args.command == "catalog":
        print(_catalog_text())
        return 0

    try:
        if args.config:
            cfg = load_config(Path(args.config).read_text())
        elif args.verb and args.surface:
            options = {}
            if args.verb == "stability":
                options = {"form": args.form, "nmax": args.nmax}
                if args.null_tol is not None:
                    options["null_tol"] = args.null_tol
            elif args.verb == "willmore-check" and args.fd_check:
                options = {"fd_check": True}
            cfg = {"surface": {"name": args.surface,
                               "grid": [args.grid, args.grid]},
                   "analysis": [{"verb": args.verb, "options": options}]}
            if args.ambient:
                cfg["ambient"] = {"name": args.ambient}
            cfg = load_config(json.dumps(cfg))
        else:
            raise ConfigError("provide a config path or --verb/--surface")
        return run(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"precondition error [{exc.__class__.__name__}]: {exc}",
              file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
