"""Command-line entry point: ``sepdev <subcommand> --config run.json``.

Every subcommand writes its result file(s) into ``--out`` plus a separate
``run_metadata.json`` holding the thread count and its source.  The
result files depend only on the configuration and seeds; the metadata
file is the one place scheduling details are recorded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..basis import TrigSeries
from ..control import ControlField
from ..pde import HeatFlow, solve_controlled
from ..rates import (SusceptibilityPath, i_dyn_variational, i_ini_variational, j_dyn_variational,
                     j_ini_variational)
from ..sampling import Profile
from .config import THREADS_ENV, RunConfig
from .ensemble import run_ensemble
from .importance import AlwaysEvent, ThresholdEvent, estimate_event, mdp_curve
from .io import export

SUBCOMMANDS = ("simulate", "hydro", "martingale", "replacement", "rates", "tilted", "estimate", "curve")


def _split(doc: dict) -> tuple[RunConfig | None, dict]:
    fields = set(RunConfig.__dataclass_fields__)
    run = {k: v for k, v in doc.items() if k in fields}
    extra = {k: v for k, v in doc.items() if k not in fields}
    if "n_sites" not in run:
        return None, extra
    return RunConfig.from_dict(run), extra


def _overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicas"] = args.replicas
    # --threads is deliberately not folded into the configuration: the
    # exported config.json must not depend on scheduling
    return cfg.replace(**changes) if changes else cfg


def _threads_info(cfg: RunConfig | None, args) -> dict:
    env = os.environ.get(THREADS_ENV)
    if env:
        return {"threads": max(1, int(env)), "source": f"environment {THREADS_ENV}"}
    if args.threads is not None:
        return {"threads": args.threads, "source": "--threads"}
    if cfg is not None and cfg.threads is not None:
        return {"threads": cfg.threads, "source": "config"}
    return {"threads": os.cpu_count() or 1, "source": "hardware default"}


def _event_from(spec: dict | None):
    if spec is None or spec.get("kind") == "always":
        return AlwaysEvent()
    return ThresholdEvent(int(spec["mode"]), float(spec["threshold"]), spec.get("time"),
                          bool(spec.get("below", False)))


def _tilt_from(spec: dict | None, horizon: float):
    if spec is None:
        return None
    g = Profile.from_spec(spec.get("g", 0.0))
    F = ControlField.from_spec(spec.get("control"), horizon)
    return g, F


def _need(cfg, sub):
    if cfg is None:
        raise SystemExit(f"{sub}: configuration must contain a run configuration (n_sites, horizon, ...)")
    return cfg


def _default_times(cfg: RunConfig, k: int = 5) -> list[float]:
    return [cfg.horizon * (i + 1) / k for i in range(k)]


def _run(sub: str, doc: dict, args) -> tuple[list, RunConfig | None]:
    cfg, extra = _split(doc)
    if cfg is not None:
        cfg = _overrides(cfg, args)
    threads = _threads_info(cfg, args)["threads"]

    if sub in ("simulate", "martingale", "replacement", "tilted"):
        cfg = _need(cfg, sub)
        if sub == "martingale" and not any(o["kind"] == "martingale" for o in cfg.observables):
            ob = {"kind": "martingale", "mode": 1, "c": 1.0, "times": _default_times(cfg)}
            ob.update(extra.get("martingale", {}))
            cfg = cfg.replace(observables=cfg.observables + [ob])
        if sub == "replacement" and not any(o["kind"] == "replacement" for o in cfg.observables):
            ob = {"kind": "replacement"}
            ob.update(extra.get("replacement", {}))
            cfg = cfg.replace(observables=cfg.observables + [ob])
        if sub == "tilted":
            if "control" in extra:
                cfg = cfg.replace(engine={"kind": "tilted", "control": extra["control"]})
            if cfg.engine.get("kind") != "tilted":
                raise SystemExit("tilted: engine must be tilted (set engine.control or 'control')")
        stats = run_ensemble(cfg, threads=threads)
        return [(stats, "stats")], cfg

    if sub == "hydro":
        spec = extra.get("hydro", extra)
        horizon = float(spec.get("horizon", cfg.horizon if cfg else 0.01))
        times = np.asarray(spec.get("times", np.linspace(0.0, horizon, int(spec.get("n_times", 11)))))
        band = int(spec.get("band", 64))
        profile = Profile.from_spec(spec.get("profile", 0.5))
        flow = HeatFlow(profile, band)
        out = [(flow.path(times), "heat")]
        if "control" in spec:
            F = ControlField.from_spec(spec["control"], horizon)
            g = Profile.from_spec(spec.get("g", 0.0))
            out.append((solve_controlled(g, F, flow, horizon, times, band=band), "controlled"))
        return out, cfg

    if sub == "rates":
        spec = extra.get("rates", extra)
        kind = spec.get("functional", "i_ini")
        band = int(spec.get("band", 16))
        if kind == "i_ini":
            nu = TrigSeries.from_modes({int(k): float(v) for k, v in spec["nu"].items()})
            res = i_ini_variational(nu, Profile.from_spec(spec.get("phi", 0.5)), max(band, nu.band))
        elif kind == "j_ini":
            res = j_ini_variational(Profile.from_spec(spec["p"]), Profile.from_spec(spec.get("phi", 0.5)))
        elif kind in ("i_dyn", "j_dyn"):
            horizon = float(spec.get("horizon", 0.05))
            tg = np.linspace(0.0, horizon, int(spec.get("time_points", 17)))
            flow = HeatFlow(Profile.from_spec(spec.get("rho", 0.5)))
            if kind == "i_dyn":
                F = ControlField.from_spec(spec.get("control", {"kind": "single_mode", "mode": -1}), horizon)
                W = solve_controlled(Profile.from_spec(spec.get("g", 0.0)), F, flow, horizon,
                                     np.linspace(0.0, horizon, int(spec.get("path_points", 1001))))
                res = i_dyn_variational(W, SusceptibilityPath.from_density(flow), band, tg)
            else:
                res = j_dyn_variational(flow, band, tg)
        else:
            raise SystemExit(f"rates: unknown functional {kind!r}")
        return [(res, "rate")], cfg

    if sub == "estimate":
        cfg = _need(cfg, sub)
        est = estimate_event(cfg, _event_from(extra.get("event")),
                             _tilt_from(extra.get("tilt"), cfg.horizon), threads=threads)
        return [(est, "estimate")], cfg

    if sub == "curve":
        cfg = _need(cfg, sub)
        rows = mdp_curve(cfg, extra.get("sizes", [cfg.n_sites]), _event_from(extra.get("event")),
                         _tilt_from(extra.get("tilt"), cfg.horizon), extra.get("cost"), threads=threads)
        return [(rows, "curve")], cfg

    raise SystemExit(f"unknown subcommand {sub!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepdev", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out", help="output directory (default: config 'out' or '.')")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        results, cfg = _run(args.command, doc, args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out = Path(args.out or (cfg.out if cfg and cfg.out else doc.get("out") or "."))
    for obj, name in results:
        path = export(obj, out, name, args.format)
        print(path)
    meta = {"subcommand": args.command, "version": __version__, **_threads_info(cfg, args)}
    export(meta, out, "run_metadata", "json")
    if cfg is not None:
        export(cfg, out, "config", "json")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
