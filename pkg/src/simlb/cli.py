"""Command-line interface: ``simlb gen|run|viz|compare``.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Run outputs go to
``--out-dir`` (default ``$SIMLB_OUT_DIR`` or ``./simlb-runs``), one
directory per run with a ``manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .generators import (STRIPED_RING, Mod7, PicSpec, RandomPct, Spike, StencilSpec,
                         gen_pic_initial, gen_stencil, pic_step)
from .metrics import compute_metrics
from .model import SnapshotError, load_snapshot, save_snapshot
from .simulate import run_simulation
from .strategy import STRATEGIES, StrategyConfig
from .viz import save_svg

log = logging.getLogger("simlb")

PIC_SIDECAR = ".pic.json"
OUT_ENV = "SIMLB_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple:
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected dimensions like 4x4, got {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be positive: {text!r}")
    return dims


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simlb", description="Diffusion load balancing simulator.")
    p.add_argument("--version", action="version", version=f"simlb {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a workload snapshot")
    gsub = gen.add_subparsers(dest="workload", required=True, parser_class=_Parser)

    st = gsub.add_parser("stencil", help="2D/3D stencil grid of objects")
    st.add_argument("--grid", type=_dims, required=True, help="objects per dimension, e.g. 32x32")
    place = st.add_mutually_exclusive_group(required=True)
    place.add_argument("--nodes", type=_dims, help="tile decomposition, e.g. 4x4")
    place.add_argument("--ring", type=int, metavar="N", help="N column stripes forming a 1D ring")
    st.add_argument("--no-periodic", action="store_true", help="drop wrap-around edges")
    st.add_argument("--base-load", type=float, default=1.0, help="load per object (default 1.0)")
    st.add_argument("--bytes-per-edge", type=float, default=8.0, help="bytes per stencil edge (default 8)")
    st.add_argument("--imbalance", choices=["none", "random", "mod7", "spike"], default="none",
                    help="synthetic load imbalance (default none)")
    st.add_argument("--pct", type=float, default=0.4, help="random: relative change (default 0.4)")
    st.add_argument("--grain", type=_dims, help="random: objects per shared draw, e.g. 8x8")
    st.add_argument("--mod7-over", type=float, default=Mod7.over, help="mod7: overload factor")
    st.add_argument("--mod7-under", type=float, default=Mod7.under, help="mod7: underload factor")
    st.add_argument("--spike-factor", type=float, default=10.0, help="spike: overload factor (default 10)")
    st.add_argument("--spike-node", type=int, default=0, help="spike: overloaded node (default 0)")
    st.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    st.add_argument("-o", "--output", required=True, help="snapshot file to write")

    pic = gsub.add_parser("pic", help="particle-in-cell workload")
    pic.add_argument("--grid", type=int, default=1000, help="cells per side (default 1000)")
    pic.add_argument("--particles", type=int, default=100_000, help="particle count (default 100000)")
    pic.add_argument("--rho", type=float, default=0.9, help="geometric skew in (0, 1] (default 0.9)")
    pic.add_argument("--k", type=int, default=2, help="horizontal speed parameter (default 2)")
    pic.add_argument("--chares", type=_dims, default=(12, 12), help="chare grid (default 12x12)")
    pic.add_argument("--nodes", type=int, default=4, help="processor count (default 4)")
    pic.add_argument("--mapping", choices=["striped", "quad"], default="striped",
                     help="initial chare placement (default striped)")
    pic.add_argument("--load-per-particle", type=float, default=PicSpec.load_per_particle,
                     help="chare load per particle (default 1.0)")
    pic.add_argument("--load-per-cell", type=float, default=PicSpec.load_per_cell,
                     help="chare load per grid cell (default 0.01)")
    pic.add_argument("--bytes-per-crossing", type=float, default=PicSpec.bytes_per_particle_crossing,
                     help="edge bytes per particle crossing next step (default 1.0)")
    pic.add_argument("--halo-bytes", type=float, default=PicSpec.bytes_halo_const,
                     help="constant bytes per chare edge (default 8.0)")
    pic.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    pic.add_argument("-o", "--output", required=True, help="snapshot file to write")

    def strategy_flags(sp):
        sp.add_argument("--neighbors", "-K", type=int, default=4, help="neighbor count K (default 4)")
        sp.add_argument("--eps", type=float, default=0.05,
                        help="neighborhood stddev threshold relative to mean load (default 0.05)")
        sp.add_argument("--max-iters", type=int, default=100, help="diffusion iteration cap (default 100)")
        sp.add_argument("--alpha", type=float, help="uniform diffusion coefficient (default 1/(max deg+1))")
        sp.add_argument("--strict-neighbors", action="store_true",
                        help="only pair nodes that already communicate")
        sp.add_argument("--greedy-tol", type=float, default=0.01, help="greedy-refine tolerance")
        sp.add_argument("--seed", type=int, default=0, help="seed for tie-breaking (default 0)")
        sp.add_argument("--random-ties", action="store_true", help="break neighbor ties randomly by seed")
        sp.add_argument("--out-dir", help=f"output root (default ${OUT_ENV} or ./simlb-runs)")
        sp.add_argument("--name", help="run directory name (default derived from inputs)")

    run = sub.add_parser("run", help="simulate a workload under one strategy")
    run.add_argument("snapshot", help="snapshot file")
    run.add_argument("--strategy", choices=STRATEGIES, default="diff-comm",
                     help="balancing strategy (default diff-comm)")
    run.add_argument("--lb-every", type=int, default=1, help="steps between balancing (default 1)")
    run.add_argument("--steps", type=int, default=1, help="application steps (default 1)")
    run.add_argument("--dump-snapshots", action="store_true", help="write a snapshot after every round")
    run.add_argument("--svg", action="store_true", help="render an SVG after every round (2D only)")
    strategy_flags(run)

    viz = sub.add_parser("viz", help="render object placement as SVG")
    viz.add_argument("snapshot", help="snapshot file with 2D coordinates")
    viz.add_argument("-o", "--output", required=True, help="SVG file to write")
    viz.add_argument("--spacing", type=float, default=12.0, help="pixels per grid step")

    cmp_ = sub.add_parser("compare", help="one balancing round per strategy on the same input")
    cmp_.add_argument("snapshot", help="snapshot file")
    cmp_.add_argument("--strategies", default="greedy-refine,diff-comm,diff-coord",
                      help="comma-separated list (default greedy-refine,diff-comm,diff-coord)")
    strategy_flags(cmp_)
    return p


def _stencil_spec(a) -> StencilSpec:
    imb = None
    if a.imbalance == "random":
        imb = RandomPct(a.pct, a.seed, a.grain)
    elif a.imbalance == "mod7":
        imb = Mod7(a.mod7_over, a.mod7_under)
    elif a.imbalance == "spike":
        imb = Spike(a.spike_factor, a.spike_node)
    node_dims = (STRIPED_RING, a.ring) if a.ring else a.nodes
    return StencilSpec(a.grid, node_dims, not a.no_periodic, a.base_load, a.bytes_per_edge, imb)


def cmd_gen(a) -> int:
    out = Path(a.output)
    if a.workload == "stencil":
        spec = _stencil_spec(a)
        try:
            spec.validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        save_snapshot(gen_stencil(spec), out)
        log.info("wrote %s", out)
        return 0
    spec = PicSpec(a.grid, a.particles, a.rho, a.k, a.chares, a.nodes, a.mapping, a.seed,
                   a.bytes_per_crossing, a.halo_bytes, a.load_per_particle, a.load_per_cell)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _, snap = gen_pic_initial(spec)
    save_snapshot(snap, out)
    Path(str(out) + PIC_SIDECAR).write_text(
        json.dumps({"pic_spec": spec.to_dict(), "step": 0}, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s and %s", out, str(out) + PIC_SIDECAR)
    return 0


def _config(a, name: str) -> StrategyConfig:
    if a.neighbors < 1:
        raise UsageError("--neighbors must be at least 1")
    return StrategyConfig(name=name, neighbors=a.neighbors, alpha=a.alpha, eps=a.eps,
                          max_iters=a.max_iters, comm_fallback=not a.strict_neighbors,
                          randomize_ties=a.random_ties, seed=a.seed, greedy_tol=a.greedy_tol)


def _run_dir(a, default: str) -> Path:
    root = Path(a.out_dir or os.environ.get(OUT_ENV) or "simlb-runs")
    d = root / (a.name or default)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _load_pic(snapshot_path: Path):
    side = Path(str(snapshot_path) + PIC_SIDECAR)
    if not side.exists():
        return None
    meta = json.loads(side.read_text())
    state, _ = gen_pic_initial(PicSpec.from_dict(meta["pic_spec"]))
    for _ in range(meta.get("step", 0)):
        state = pic_step(state)
    return state


def _strip_timing(row: dict) -> dict:
    return {k: v for k, v in row.items() if k != "strategy_wall_time"}


def cmd_run(a) -> int:
    if a.lb_every < 1 or a.steps < 1:
        raise UsageError("--lb-every and --steps must be positive")
    cfg = _config(a, a.strategy)
    path = Path(a.snapshot)
    snap = load_snapshot(path)
    pic = _load_pic(path)
    out = _run_dir(a, f"{path.stem}-{a.strategy}-seed{a.seed}")
    keep = a.dump_snapshots or a.svg
    result = run_simulation(snap, cfg, a.lb_every, a.steps, pic_state=pic, keep_snapshots=keep)
    report = result.report

    metrics = _strip_timing(report.row())
    metrics["initial"] = _strip_timing(compute_metrics(snap).row())
    metrics["diagnostics"] = report.diagnostics
    metrics["per_round_series"] = [_strip_timing(r) for r in result.rounds]
    _dump(out / "metrics.json", metrics)
    _dump(out / "timing.json", {"strategy_wall_time": report.strategy_wall_time,
                                "per_round": [r["strategy_wall_time"] for r in result.rounds]})

    fields = ["round", "step", "max_avg_before", "max_avg_load", "ext_bytes", "int_bytes",
              "ext_int_ratio", "migration_fraction"]
    with open(out / "series.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in result.rounds:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    if result.particle_ratio:
        with open(out / "particles.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "max_avg_particles"] +
                       [f"node{i}" for i in range(snap.node_count)])
            for t, (ratio, counts) in enumerate(zip(result.particle_ratio, result.node_particles), 1):
                w.writerow([t, repr(float(ratio))] + [int(c) for c in counts])
    files = ["metrics.json", "timing.json", "series.csv"] + (
        ["particles.csv"] if result.particle_ratio else [])
    with open(out / "plans.jsonl", "w") as fh:
        for r, rs in zip(result.rounds, result.round_plans):
            fh.write(json.dumps({"round": r["round"], "step": r["step"], **rs}, sort_keys=True) + "\n")
    files.append("plans.jsonl")
    for k, s in enumerate(result.snapshots):
        if a.dump_snapshots:
            save_snapshot(s, out / f"round{k:04d}.snap")
            files.append(f"round{k:04d}.snap")
        if a.svg:
            save_svg(s, out / f"round{k:04d}.svg")
            files.append(f"round{k:04d}.svg")
    save_snapshot(result.snapshot, out / "final.snap")
    files.append("final.snap")
    _dump(out / "manifest.json", {
        "command": "run", "snapshot": str(path), "strategy": cfg.to_dict(),
        "lb_every": a.lb_every, "steps": a.steps, "files": sorted(files),
    })
    print(f"{a.strategy}: max/avg {report.max_avg_load:.3f}  ext/int {report.ext_int_ratio:.3f}  "
          f"migrations {100 * report.migration_fraction:.1f}%  -> {out}")
    return 0


def cmd_viz(a) -> int:
    snap = load_snapshot(a.snapshot)
    save_svg(snap, a.output, spacing=a.spacing)
    return 0


def format_table(rows: list) -> str:
    """Render comparison rows like a metrics table: one column per strategy."""
    head = ["Metric"] + [r["strategy"] for r in rows]
    lines = [
        ["max/avg load"] + [_cell(r, "max_avg_load", "{:.2f}") for r in rows],
        ["external/internal comm"] + [_cell(r, "ext_int_ratio", "{:.3f}") for r in rows],
        ["% migrations"] + [_cell(r, "migration_fraction", "{:.1%}") for r in rows],
    ]
    table = [head] + lines
    widths = [max(len(row[c]) for row in table) for c in range(len(head))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in table) + "\n"


def _cell(row, key, fmt):
    if "error" in row:
        return "error"
    return fmt.format(row[key])


def compare(snap, names, a) -> list:
    rows = [{"strategy": "initial", **_strip_timing(compute_metrics(snap).row())}]
    rows[0]["migration_fraction"] = 0.0
    for name in names:
        try:
            res = run_simulation(snap, _config(a, name), 1, 1)
            rows.append({"strategy": name, **_strip_timing(res.report.row())})
        except (RuntimeError, ValueError) as exc:
            log.error("strategy %s failed: %s", name, exc)
            rows.append({"strategy": name, "error": str(exc.__cause__ or exc)})
    return rows


def cmd_compare(a) -> int:
    names = [n.strip() for n in a.strategies.split(",") if n.strip()]
    bad = [n for n in names if n not in STRATEGIES]
    if not names or bad:
        raise UsageError(f"unknown strategies: {', '.join(bad) or '(none given)'}")
    path = Path(a.snapshot)
    snap = load_snapshot(path)
    rows = compare(snap, names, a)
    text = format_table(rows)
    out = _run_dir(a, f"{path.stem}-compare-seed{a.seed}")
    _dump(out / "compare.json", {"snapshot": str(path), "neighbors": a.neighbors, "rows": rows})
    (out / "compare.txt").write_text(text)
    _dump(out / "manifest.json", {"command": "compare", "snapshot": str(path),
                                  "strategies": names, "files": ["compare.json", "compare.txt"]})
    sys.stdout.write(text)
    return 0 if all("error" not in r for r in rows) else 2


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "viz": cmd_viz, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"simlb: error: {exc}", file=sys.stderr)
        return 1
    except (SnapshotError, OSError, ValueError, RuntimeError) as exc:
        print(f"simlb: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
