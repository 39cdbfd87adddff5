"""Command-line drivers: sampling runs, acceptance curves, region dumps,
and the stochastic volatility filter benchmark.

Every command is a pure function of its arguments and the seed: the
master seed expands into per-run streams through counter-based spawn
keys, so run r's stream never depends on how many runs precede it.
Outputs are comma-separated text with a header row; floats are written
with repr, which round-trips exactly.
"""

from __future__ import annotations

import argparse
import math
import json
import sys
from os import path

import numpy as np

from . import report
from .ars_mixture import ExponentialDensity, acceptance_curve, adaptive_sample
from .bounds import SupportSet
from .errors import PotsampleError
from .model import PotentialModel, builtin_model, model_from_dict
from .pf import SVParams, run_filter, simulate_sv
from .rou import RouSampler

_S0_ARTIFICIAL = (0.0, 2.0 - math.sqrt(2.0), 2.0, 2.0 + math.sqrt(2.0))

# Scheme-1 defaults for the built-in models: the exponential term's
# index and matching density.
_BUILTIN_ARS1 = {
    "artificial3obs": (4, {"rate": 0.2, "offset": 0.0}),
}
_BUILTIN_SUPPORTS = {
    "artificial3obs": _S0_ARTIFICIAL,
}


def _rng(seed: int, stream: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(out_path: str, header: str, rows) -> None:
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sibling(out_path: str, tag: str, ext: str | None = None) -> str:
    root, old_ext = path.splitext(out_path)
    return f"{root}_{tag}{ext if ext is not None else (old_ext or '.csv')}"


def _load_setup(args) -> tuple[PotentialModel, SupportSet, tuple | None]:
    """Model, initial supports, and the optional scheme-1 (j, q) pair."""
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if "builtin" in cfg:
            model = builtin_model(cfg["builtin"], **cfg.get("params", {}))
            name = cfg["builtin"]
        else:
            model = model_from_dict(cfg)
            name = None
        raw_sup = cfg.get("supports", _BUILTIN_SUPPORTS.get(name))
        raw_ars = cfg.get("ars1", _BUILTIN_ARS1.get(name))
    else:
        model = builtin_model(args.model)
        raw_sup = _BUILTIN_SUPPORTS.get(args.model)
        raw_ars = _BUILTIN_ARS1.get(args.model)
    if raw_sup is None:
        raise ValueError(
            "no initial support points: add a 'supports' list to the config"
        )
    supports = SupportSet(raw_sup)
    ars = None
    if raw_ars is not None:
        j, qcfg = (raw_ars["j"], raw_ars["q"]) if isinstance(raw_ars, dict) else raw_ars
        ars = (int(j), ExponentialDensity(**qcfg))
    return model, supports, ars


def _draw_once(args, model, supports, ars, n: int, rng):
    """n samples plus per-sample trial counts under the chosen scheme."""
    if args.scheme == "ars1":
        if ars is None:
            raise ValueError(
                "scheme ars1 needs the config's 'ars1' section: the term "
                "index j and its exponential density parameters"
            )
        j, q = ars
        xs, stats, _ = adaptive_sample(model, j, q, supports, n, rng)
        return xs, stats.trials_per_accept
    sampler = RouSampler(model, args.rho, SupportSet(supports))
    xs, stats = sampler.sample(n, rng)
    return xs, stats.trials_per_sample


def cmd_sample(args) -> int:
    model, supports, ars = _load_setup(args)
    xs, trials = _draw_once(args, model, supports, ars, args.n, _rng(args.seed, 0))
    _write_csv(args.out, "x", ([x] for x in xs))
    _write_csv(
        _sibling(args.out, "stats"),
        "i,trials",
        ([i + 1, t] for i, t in enumerate(trials)),
    )
    if args.plot:
        report.plot_samples(model, xs, _sibling(args.out, "plot", ".png"))
    return 0


def cmd_curve(args) -> int:
    model, supports, ars = _load_setup(args)
    rows = np.empty((args.runs, args.n), dtype=np.int64)
    for r in range(args.runs):
        _, rows[r] = _draw_once(
            args, model, SupportSet(supports), ars, args.n, _rng(args.seed, r)
        )
    curve = acceptance_curve(rows)
    _write_csv(args.out, "i,r_hat", ([i + 1, v] for i, v in enumerate(curve)))
    if args.plot:
        report.plot_curve(curve, _sibling(args.out, "plot", ".png"))
    return 0


def cmd_region(args) -> int:
    if args.scheme != "rou":
        raise ValueError("region dumps exist only for scheme rou")
    model, supports, _ = _load_setup(args)
    sampler = RouSampler(model, args.rho, supports)
    rng = _rng(args.seed, 0)
    draws = 0
    while sampler.trials - sampler.accepts < args.warmup:
        sampler.draw(rng)
        draws += 1
        if draws > max(1000, 50 * args.warmup):
            break  # acceptance too good to collect more warm-up rejections
    dump = sampler.export_region(args.n)
    nan = math.nan
    rows = [
        ["triangle", t["lo"], t["hi"], t["v1v"], t["v1u"], t["v2v"], t["v2u"],
         t["v3v"], t["v3u"], t["area"], nan, nan, nan]
        for t in dump["triangles"]
    ]
    rows.extend(
        ["boundary", nan, nan, nan, nan, nan, nan, nan, nan, nan,
         b["x"], b["v"], b["u"]]
        for b in dump["boundary"]
    )
    _write_csv(
        args.out,
        "kind,lo,hi,v1v,v1u,v2v,v2u,v3v,v3u,area,x,v,u",
        rows,
    )
    if args.plot:
        report.plot_region(dump, _sibling(args.out, "plot", ".png"))
    return 0


def _read_observations(obs_path: str) -> list[float]:
    obs = []
    with open(obs_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            first = line.strip().split(",")[0]
            if not first:
                continue
            try:
                obs.append(float(first))
            except ValueError:
                if lineno == 0:
                    continue  # header row
                raise ValueError(f"{obs_path}:{lineno + 1}: not a number: {first!r}")
    return obs


def cmd_pf_sv(args) -> int:
    if not args.sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {args.sigma}")
    if not abs(args.beta) < 1.0:
        raise ValueError(f"beta must satisfy |beta| < 1, got {args.beta}")
    params = SVParams(args.beta, args.sigma)
    rng = _rng(args.seed, 0)
    truths = None
    if args.obs_file:
        obs = _read_observations(args.obs_file)
    elif args.steps == 0:
        obs = []
    else:
        truths, obs = simulate_sv(params, args.steps, 1.0, rng)
    trace = run_filter(params, obs, args.particles, rng)
    tr = truths if truths is not None else [math.nan] * len(trace)
    _write_csv(
        args.out,
        "k,truth,estimate,std,acceptance_rate",
        (
            [k + 1, tr[k], trace.estimates[k], trace.stds[k], trace.acceptance_rates[k]]
            for k in range(len(trace))
        ),
    )
    if args.plot:
        report.plot_trace(trace, truths, _sibling(args.out, "plot", ".png"))
    return 0


def _add_model_args(p: argparse.ArgumentParser) -> None:
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model", help="built-in model name")
    grp.add_argument("--config", help="JSON model config path")
    p.add_argument("--scheme", choices=("ars1", "rou"), default="rou",
                   help="sampling scheme (default rou)")
    p.add_argument("--rho", type=float, default=1.0,
                   help="transformed-region exponent (rou only, default 1)")


def _add_io_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", required=True, help="output file path")
    p.add_argument("--plot", action="store_true",
                   help="also render a figure next to the output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potsample",
        description="Exact sampling from densities given by generalized potentials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw n samples and their trial counts")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=1000, help="sample count (default 1000)")
    _add_io_args(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("curve", help="acceptance-probability curve over runs")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=1000,
                   help="samples per run (default 1000)")
    p.add_argument("--runs", type=int, default=1000,
                   help="independent runs averaged (default 1000)")
    _add_io_args(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("region", help="dump the triangle cover of the region")
    _add_model_args(p)
    p.add_argument("--warmup", type=int, default=0,
                   help="rejections to absorb before dumping (default 0)")
    p.add_argument("--n", type=int, default=512,
                   help="boundary probe count for plots (default 512)")
    _add_io_args(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("pf-sv", help="stochastic volatility particle filter")
    p.add_argument("--beta", type=float, default=0.8, help="AR coefficient")
    p.add_argument("--sigma", type=float, default=0.9, help="state noise std")
    p.add_argument("--steps", type=int, default=40,
                   help="steps to simulate when no --obs-file (default 40)")
    p.add_argument("--particles", type=int, default=1000,
                   help="particle count (default 1000)")
    p.add_argument("--obs-file", help="read observations from this file instead")
    _add_io_args(p)
    p.set_defaults(func=cmd_pf_sv)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PotsampleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
