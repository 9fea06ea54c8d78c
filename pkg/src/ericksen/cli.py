"""Command-line harness: run presets or JSON configs, sweep parameters,
inspect meshes, and list presets.

Exit codes: 0 converged, 2 stopped at an iteration limit, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import flow as flowmod
from . import model as modelmod
from . import postio
from .mesh import MeshError, generate_cylinder, generate_unit_cube, generate_unit_square, shape_regularity

SWEEPABLE = ("mesh.n", "flow.tau_n", "flow.alpha")

_FLOW_DEFAULTS = {
    "tau_n": None, "tau_s": None, "metric": "l2", "alpha": 2.0,
    "tol_inner": 1e-6, "tol_outer": 1e-6, "eps": 0.1,
    "max_outer": 100000, "max_inner": 100000, "cg_tol": 1e-10,
    "tol_scale": None,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration handling


def preset_to_config(pr: modelmod.Preset) -> dict:
    """Expand a preset into the explicit effective-config dictionary."""
    mesh_sec = {"generator": pr.generator, "msh": None}
    mesh_sec.update(pr.mesh_params)
    cfg = {
        "preset": pr.name,
        "mesh": mesh_sec,
        "model": {
            "kappa": pr.kappa,
            "c_dw": pr.c_dw,
            "dirichlet_tags": list(pr.dirichlet_tags),
            "bc": pr.bc,
            "defect_center": list(pr.defect_center) if pr.defect_center else None,
            "initial": pr.initial,
            "blend_width": pr.blend_width,
            "particles": [list(map(_jsonable, p)) for p in pr.particles],
            "box": [list(b) for b in pr.box] if pr.box else None,
        },
        "flow": dict(_FLOW_DEFAULTS, tau_n=pr.tau_n, tau_s=pr.tau_s,
                     metric=pr.metric, alpha=pr.alpha,
                     tol_inner=pr.tol, tol_outer=pr.tol),
        "output": {"dir": "out", "vtk_every": 0},
    }
    return cfg


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def load_config(preset_name=None, config_path=None, overrides=()) -> dict:
    """Resolve preset/config file plus --set overrides into one dict."""
    if preset_name and config_path:
        raise ConfigError("give either --preset or --config, not both")
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if "preset" in raw and raw.get("preset"):
            extra = [k for k in ("mesh", "model", "flow") if k in raw]
            if extra:
                raise ConfigError("config must give exactly one of preset or "
                                  f"explicit sections (found preset plus {extra})")
            cfg = preset_to_config(modelmod.preset(raw["preset"]))
            for section in ("output",):
                if section in raw:
                    cfg[section].update(raw[section])
        else:
            cfg = _explicit_config(raw)
    elif preset_name:
        cfg = preset_to_config(modelmod.preset(preset_name))
    else:
        raise ConfigError("one of --preset or --config is required")
    for item in overrides:
        _apply_override(cfg, item)
    return cfg


def _explicit_config(raw: dict) -> dict:
    for section in ("mesh", "model", "flow"):
        if section not in raw:
            raise ConfigError(f"config missing section {section!r}")
    cfg = {
        "preset": None,
        "mesh": dict({"generator": None, "msh": None}, **raw["mesh"]),
        "model": dict({"c_dw": 0.0, "dirichlet_tags": [], "bc": None,
                       "defect_center": None, "initial": "point_defect",
                       "particles": [], "box": None}, **raw["model"]),
        "flow": dict(_FLOW_DEFAULTS, **raw["flow"]),
        "output": dict({"dir": "out", "vtk_every": 0}, **raw.get("output", {})),
    }
    return cfg


def _apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, _, value = item.partition("=")
    parts = key.strip().split(".")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown config section {p!r} in override {item!r}")
        node = node[p]
    if not isinstance(node, dict):
        raise ConfigError(f"cannot set {key!r}")
    node[parts[-1]] = parsed


def config_to_preset(cfg: dict) -> modelmod.Preset:
    """Reconstruct the internal experiment description from a config dict."""
    mesh_sec, model_sec, flow_sec = cfg["mesh"], cfg["model"], cfg["flow"]
    if model_sec.get("kappa") is None:
        raise ConfigError("model.kappa is required")
    if model_sec.get("bc") is None:
        raise ConfigError("model.bc is required")
    if flow_sec.get("tau_n") is None or flow_sec.get("tau_s") is None:
        raise ConfigError("flow.tau_n and flow.tau_s are required")
    params = {k: v for k, v in mesh_sec.items() if k not in ("generator", "msh")}
    defect = model_sec.get("defect_center")
    particles = tuple(tuple(_tupled(x) for x in p) for p in model_sec.get("particles") or ())
    box = model_sec.get("box")
    return modelmod.Preset(
        name=cfg.get("preset") or "custom",
        kappa=float(model_sec["kappa"]),
        c_dw=float(model_sec.get("c_dw", 0.0)),
        tau_n=float(flow_sec["tau_n"]),
        tau_s=float(flow_sec["tau_s"]),
        dirichlet_tags=tuple(int(t) for t in model_sec.get("dirichlet_tags") or ()),
        bc=model_sec["bc"],
        generator=mesh_sec.get("generator"),
        mesh_params=params,
        metric=flow_sec.get("metric", "l2"),
        alpha=float(flow_sec.get("alpha", 2.0)),
        tol=float(flow_sec.get("tol_outer", 1e-6)),
        defect_center=tuple(defect) if defect else None,
        initial=model_sec.get("initial", "point_defect"),
        particles=particles,
        box=tuple(tuple(b) for b in box) if box else None,
    )


def _tupled(v):
    return tuple(v) if isinstance(v, list) else v


def flow_config_from(cfg: dict) -> flowmod.FlowConfig:
    fs = cfg["flow"]
    tau_n = float(fs["tau_n"])
    tol_inner, tol_outer = float(fs["tol_inner"]), float(fs["tol_outer"])
    if fs.get("tol_scale") is not None:
        tol_inner = tol_outer = float(fs["tol_scale"]) * tau_n
    return flowmod.FlowConfig(
        kappa=float(cfg["model"]["kappa"]),
        tau_n=tau_n,
        tau_s=float(fs["tau_s"]),
        metric=fs.get("metric", "l2"),
        alpha=float(fs.get("alpha", 2.0)),
        tol_inner=tol_inner,
        tol_outer=tol_outer,
        eps_admissible=float(fs.get("eps", 0.1)),
        max_outer=int(fs.get("max_outer", 100000)),
        max_inner=int(fs.get("max_inner", 100000)),
        cg_tol=float(fs.get("cg_tol", 1e-10)),
        cg_maxit=fs.get("cg_maxit"),
    )


def build_problem(cfg: dict):
    """Materialize (mesh, double well, dirichlet, initial state, flow config)."""
    pr = config_to_preset(cfg)
    mesh = modelmod.build_mesh(pr, msh_path=cfg["mesh"].get("msh"))
    dw = modelmod.DoubleWell(pr.c_dw)
    dirichlet = modelmod.dirichlet_data(pr, mesh)
    state0 = modelmod.initial_state(pr, mesh, dirichlet)
    config = flow_config_from(cfg)
    return mesh, dw, dirichlet, state0, config


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.preset, args.config, args.set or ())
    if args.out:
        cfg["output"]["dir"] = args.out
    if args.vtk_every is not None:
        cfg["output"]["vtk_every"] = args.vtk_every
    print("# effective config")
    print(json.dumps(cfg, indent=2, sort_keys=True))

    mesh, dw, dirichlet, state0, config = build_problem(cfg)
    outdir = Path(cfg["output"]["dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    every = int(cfg["output"].get("vtk_every") or 0)

    def snapshot(record, state):
        if every > 0 and record.i % every == 0:
            postio.write_vtk(outdir / f"state_{record.i:06d}.vtk", mesh,
                             [("s", state.s), ("n", state.n)])

    run = flowmod.outer_loop(state0, config, dw, dirichlet, callback=snapshot)
    postio.write_runlog_csv(outdir / "runlog.csv", run.history)
    postio.write_vtk(outdir / "final.vtk", mesh,
                     [("s", run.state.s), ("n", run.state.n)])
    last = run.history[-1]
    print(f"N={run.outer_iters} E={last.energy:.6g} min_s={last.s_min:.6g} "
          f"err_n={last.err_n:.6g} converged={run.converged}")
    return 0 if run.converged else 2


def _sweep_value_config(cfg: dict, param: str, value):
    """Per-row config for a sweep, honoring the coupled-step conventions."""
    row = json.loads(json.dumps(cfg))  # deep copy
    section, key = param.split(".")
    row[section][key] = value
    # tau_n rows rescale tolerances through flow.tol_scale in flow_config_from
    if param == "mesh.n" and cfg["flow"].get("tau_cfl_ref") is not None:
        ref = float(cfg["flow"]["tau_cfl_ref"])
        scale = (ref / float(value)) ** 2
        row["flow"]["tau_n"] = cfg["flow"]["tau_n"] * scale
        row["flow"]["tau_s"] = cfg["flow"]["tau_s"] * scale
    return row


def cmd_sweep(args) -> int:
    cfg = load_config(args.preset, args.config, args.set or ())
    if args.out:
        cfg["output"]["dir"] = args.out
    if args.param not in SWEEPABLE:
        print(f"error: sweep parameter must be one of {', '.join(SWEEPABLE)}",
              file=sys.stderr)
        return 1
    values = [v for v in (args.values or "").split(",") if v.strip()]
    if not values:
        print("error: empty sweep value list", file=sys.stderr)
        return 1
    values = [json.loads(v) for v in values]

    outdir = Path(cfg["output"]["dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    any_error, any_unconverged = False, False
    for value in values:
        row_cfg = _sweep_value_config(cfg, args.param, value)
        row_cfg["output"]["dir"] = str(outdir / f"{args.param.replace('.', '_')}={value}")
        Path(row_cfg["output"]["dir"]).mkdir(parents=True, exist_ok=True)
        try:
            mesh, dw, dirichlet, state0, config = build_problem(row_cfg)
            run = flowmod.outer_loop(state0, config, dw, dirichlet)
            postio.write_runlog_csv(Path(row_cfg["output"]["dir"]) / "runlog.csv",
                                    run.history)
            last = run.history[-1]
            rows.append((value, run.outer_iters, last.energy, last.s_min,
                         last.err_n, run.converged, ""))
            any_unconverged |= not run.converged
            print(f"{args.param}={value}: N={run.outer_iters} E={last.energy:.6g} "
                  f"min_s={last.s_min:.6g} err_n={last.err_n:.6g}")
        except Exception as exc:  # a failing row is recorded, the sweep continues
            any_error = True
            rows.append((value, "", "", "", "", False, str(exc)))
            print(f"{args.param}={value}: error: {exc}", file=sys.stderr)

    csv_path = outdir / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(f"{args.param},N,E,min_s,err_n,converged,error\n")
        for value, n_it, energy, s_min, err_n, conv, err in rows:
            cells = [json.dumps(value), str(n_it),
                     format(energy, ".15g") if energy != "" else "",
                     format(s_min, ".15g") if s_min != "" else "",
                     format(err_n, ".15g") if err_n != "" else "",
                     str(conv).lower(), err.replace(",", ";")]
            fh.write(",".join(cells) + "\n")
    print(f"sweep results written to {csv_path}")
    if any_error:
        return 1
    return 2 if any_unconverged else 0


def _mesh_from_source(source: str):
    if source.endswith(".msh"):
        return postio.read_gmsh(source)
    kind, _, params = source.partition(":")
    kv = {}
    for part in params.split(","):
        if part.strip():
            k, _, v = part.partition("=")
            kv[k.strip()] = int(v)
    builders = {
        "square": lambda: generate_unit_square(kv.get("n", 1)),
        "cube": lambda: generate_unit_cube(kv.get("n", 1)),
        "cylinder": lambda: generate_cylinder(kv.get("n_r", 1), kv.get("n_theta", 3),
                                              kv.get("n_z", 1)),
    }
    if kind not in builders:
        raise ConfigError(f"unknown mesh source {source!r} "
                          "(use a .msh path or square:n=.., cube:n=.., cylinder:n_r=..)")
    return builders[kind]()


def cmd_mesh_info(args) -> int:
    if args.source:
        mesh = _mesh_from_source(args.source)
    else:
        cfg = load_config(args.preset, args.config, args.set or ())
        pr = config_to_preset(cfg)
        mesh = modelmod.build_mesh(pr, msh_path=cfg["mesh"].get("msh"))
    print(f"dim: {mesh.dim}")
    print(f"vertices: {mesh.num_vertices}")
    print(f"cells: {mesh.num_cells}")
    print(f"h_min: {mesh.h_min:.12g}")
    print(f"h_max: {mesh.h_max:.12g}")
    print(f"shape_regularity: {shape_regularity(mesh):.12g}")
    census = mesh.tag_census()
    print("boundary tags: " + ", ".join(f"{t}: {c}" for t, c in sorted(census.items())))
    return 0


def cmd_presets(_args) -> int:
    for name in modelmod.preset_names():
        pr = modelmod.preset(name)
        mesh_desc = (f"{pr.generator}:{pr.mesh_params}" if pr.generator
                     else "imported .msh required")
        print(f"{name}: kappa={pr.kappa} c_dw={pr.c_dw:.6g} tau_n={pr.tau_n} "
              f"tau_s={pr.tau_s} metric={pr.metric} mesh={mesh_desc}")
        if pr.notes:
            print(f"    {pr.notes}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ericksen",
        description="Gradient-flow solver for nematic liquid crystals with "
                    "variable degree of orientation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--preset", help="built-in experiment name")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (repeatable), e.g. flow.metric=h1")

    p_run = sub.add_parser("run", help="run one simulation")
    add_config_flags(p_run)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--vtk-every", type=int, default=None,
                       help="write an intermediate VTK every N outer steps (0: final only)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a one-parameter sweep")
    add_config_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_info = sub.add_parser("mesh-info", help="print mesh statistics")
    p_info.add_argument("source", nargs="?",
                        help=".msh path or generator spec like square:n=32")
    add_config_flags(p_info)
    p_info.set_defaults(func=cmd_mesh_info)

    p_presets = sub.add_parser("presets", help="list presets and their parameters")
    p_presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, MeshError, postio.GmshParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected: keep the traceback for debugging
        traceback.print_exc()
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
