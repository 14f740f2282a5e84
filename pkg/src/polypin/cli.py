"""Command-line entry point ``polypin``.

Subcommands
-----------
simulate      one trajectory of the lattice dynamics
heat          Dirichlet heat flow of a profile
stefan        free-boundary run with diagnostics
equilibrium   partition function and marginals
compare       one declarative experiment (``--config`` or ``--preset``)
sweep         several experiments in sequence (default: every preset)

The exit code is 0 iff every criterion evaluated by the command passes.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__

log = logging.getLogger("polypin")


def _config(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise SystemExit(f"{path}: expected a key-value mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _opt(args, cfg, name, default, cast=None):
    """CLI flag beats config file beats default."""
    v = getattr(args, name, None)
    if v is None:
        v = cfg.get(name, default)
    return cast(v) if (cast is not None and v is not None) else v


def _times(v) -> list:
    if v is None:
        return []
    if isinstance(v, str):
        return [float(t) for t in v.replace(",", " ").split()]
    if isinstance(v, (list, tuple)):
        return [float(t) for t in v]
    return [float(v)]


def _out(args, cfg) -> Path:
    out = Path(_opt(args, cfg, "out_dir", "results"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    from .dynamics import DynamicsConfig, simulate
    from .harness import named_profile
    from .lattice import LatticePath, discretize, eta_min, tent

    cfg = _config(args.config)
    L = _opt(args, cfg, "L", 64, int)
    start = _opt(args, cfg, "profile", "cosine")
    if start == "eta-min":
        eta0 = eta_min(L)
    elif start == "tent":
        eta0 = tent(L)
    elif start.endswith(".path"):
        eta0 = LatticePath.from_line(Path(start).read_text().strip())
    else:
        eta0 = discretize(named_profile(start), L)
    horizon = _opt(args, cfg, "horizon", 0.1, float)
    times = _times(_opt(args, cfg, "times", None)) or list(np.linspace(0, horizon, 11))
    config = DynamicsConfig(L=L, lam=_opt(args, cfg, "lam", 1.0), horizon=horizon, snapshot_times=times,
                            sample_times=times, seed=_opt(args, cfg, "seed", 0, int))
    rec = simulate(config, eta0)
    out = _out(args, cfg)
    (out / "observables.csv").write_text(rec.observables_csv())
    (out / "snapshots.txt").write_text(rec.snapshots_text())
    term = rec.rescaled_termination_time
    print(f"flips {rec.n_flips} rings {rec.n_rings} termination {term if term is not None else 'none'}")
    print(f"wrote {out / 'observables.csv'} and {out / 'snapshots.txt'}")
    return 0


def cmd_heat(args) -> int:
    from .harness import named_profile
    from .stefan import HeatSeries

    cfg = _config(args.config)
    f0 = named_profile(_opt(args, cfg, "profile", "cosine"))
    series = HeatSeries(f0, _opt(args, cfg, "modes", 2048, int))
    times = _times(_opt(args, cfg, "times", None)) or [0.0, 0.1, 0.2, 0.5]
    out = _out(args, cfg)
    for t in times:
        path = out / f"heat_t{t:g}.csv"
        path.write_text(series.profile(t, f0.n_cells).to_csv())
        print(f"t={t:g} tail bound {series.tail_bound(t):.2e} -> {path}")
    return 0


def cmd_stefan(args) -> int:
    from .harness import named_profile
    from .stefan import stefan_diagnostics, stefan_front_tracking

    cfg = _config(args.config)
    f0 = named_profile(_opt(args, cfg, "profile", "cosine"))
    run = stefan_front_tracking(f0, _opt(args, cfg, "slope", 1.0, float), dx=_opt(args, cfg, "dx", 1 / 512, float),
                                dt=_opt(args, cfg, "dt", 1e-4, float),
                                horizon=_opt(args, cfg, "horizon", float("inf"), float))
    out = _out(args, cfg)
    (out / "stefan.csv").write_text(run.to_csv())
    rep = stefan_diagnostics(run)
    (out / "stefan_diagnostics.txt").write_text(rep.summary())
    print(f"verdict {run.verdict} collision {run.collision_time} blowup {run.blowup_time} "
          f"confirmed {run.blowup_confirmed}")
    print(rep.summary(), end="")
    return 0


def cmd_equilibrium(args) -> int:
    from .equilibrium import midpoint_neighbors_probability, midpoint_pin_probability, partition_table

    cfg = _config(args.config)
    L = _opt(args, cfg, "L", 16, int)
    lam = float(_opt(args, cfg, "lam", 1.0))
    table = partition_table(L, lam)
    out = _out(args, cfg)
    (out / "equilibrium.csv").write_text(table.to_csv())
    print(f"log Z = {table.log_total:.12g}")
    print(f"expected contacts = {table.expected_contacts():.6g}")
    if L % 2 == 0:
        l = L // 2
        print(f"midpoint pin probability (l={l}) = {midpoint_pin_probability(l, lam):.6g}")
        print(f"midpoint neighbors probability (l={l}) = {midpoint_neighbors_probability(l, lam):.6g}")
    return 0


def _run_specs(specs, out_dir) -> int:
    from .harness import emit, run_experiment

    ok = True
    for spec in specs:
        table = run_experiment(spec)
        csv_path, sum_path = emit(table, out_dir)
        for c in table.criteria:
            print(f"[{spec.name or spec.kind}] {c.line()}")
        print(f"[{spec.name or spec.kind}] wrote {csv_path} and {sum_path}")
        ok &= table.passed
    return 0 if ok else 1


def _spec_from_args(args, name=None):
    from .harness import ExperimentSpec, load_spec, preset

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if name is not None:
        return preset(name, **overrides)
    if args.config is None:
        raise SystemExit("give --config or --preset")
    spec = load_spec(args.config)
    return spec.replace(**overrides) if overrides else spec


def cmd_compare(args) -> int:
    spec = _spec_from_args(args, args.preset)
    return _run_specs([spec], spec.out_dir)


def cmd_sweep(args) -> int:
    from .harness import PRESETS, load_spec

    specs = []
    if args.config is not None:
        specs.append(_spec_from_args(args))
    for path in args.configs:
        a = argparse.Namespace(**{**vars(args), "config": path})
        specs.append(_spec_from_args(a))
    names = args.preset or ([] if specs else list(PRESETS))
    specs.extend(_spec_from_args(args, n) for n in names)
    out = args.out_dir if args.out_dir is not None else specs[0].out_dir
    return _run_specs(specs, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polypin", description="Pinned polymer dynamics and free-boundary limits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key-value YAML file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--threads", type=int)
        return sp

    sp = common(sub.add_parser("simulate", help="simulate one trajectory"))
    sp.add_argument("--L", dest="L", type=int)
    sp.add_argument("--lam")
    sp.add_argument("--profile", help="named shape, CSV file, 'eta-min', 'tent' or a .path file")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--times")
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("heat", help="Dirichlet heat flow of a profile"))
    sp.add_argument("--profile")
    sp.add_argument("--times")
    sp.add_argument("--modes", type=int)
    sp.set_defaults(func=cmd_heat)

    sp = common(sub.add_parser("stefan", help="free-boundary run with diagnostics"))
    sp.add_argument("--profile")
    sp.add_argument("--dx", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--slope", type=float)
    sp.add_argument("--horizon", type=float)
    sp.set_defaults(func=cmd_stefan)

    sp = common(sub.add_parser("equilibrium", help="partition function and marginals"))
    sp.add_argument("--L", dest="L", type=int)
    sp.add_argument("--lam")
    sp.set_defaults(func=cmd_equilibrium)

    sp = common(sub.add_parser("compare", help="run one experiment"))
    sp.add_argument("--preset")
    sp.set_defaults(func=cmd_compare)

    sp = common(sub.add_parser("sweep", help="run several experiments"))
    sp.add_argument("--preset", action="append", help="repeatable; default is every preset")
    sp.add_argument("configs", nargs="*", help="additional config files")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
