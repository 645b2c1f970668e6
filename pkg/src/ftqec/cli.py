"""Command-line front end: ``ftqec <command> [options]``.

Every command writes its artifacts plus a ``manifest.json`` into
``--out-dir``.  The manifest records a hash of the resolved configuration
and the master seed; rerunning with the same manifest reproduces the
artifacts byte for byte, for any ``--workers``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .analysis import fit_decay_rates, invert_basis_rates
from .noise import PRESETS, NoiseModel, load_noise_config, preset
from .pipeline import (BASES, BASIS_RATE_NAME, BASIS_STATES, error_budget, run_memory_grid,
                       threshold_scan)
from .protocol import (INIT_STATES, ExperimentConfig, default_timing, memory_circuit, prep_tstate,
                       run_sgate_experiment, sgate_circuit, tstate_circuit)
from .report import (BUDGET_COLUMNS, FIT_COLUMNS, MEMORY_COLUMNS, SGATE_COLUMNS,
                     THRESHOLD_COLUMNS, read_csv, svg_plot, write_csv, write_json)
from .runtime import run_batch

log = logging.getLogger("ftqec")


class CliError(Exception):
    pass


# ---------------------------------------------------------------- argument helpers

def parse_cycles(text: str) -> tuple:
    """``"0..4"`` or ``"0,1,3"`` -> sorted tuple of ints."""
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = range(int(a), int(b) + 1)
        else:
            vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cycle list {text!r}") from None
    vals = sorted(set(vals))
    if not vals or vals[0] < 0:
        raise argparse.ArgumentTypeError(f"bad cycle list {text!r}")
    return tuple(vals)


def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def resolve_noise(args) -> NoiseModel:
    """Bundled defaults < ``--config`` file < preset/mode/scale flags."""
    if args.preset and args.preset != "default":
        nm = preset(args.preset, "incoherent")
    elif args.config:
        try:
            nm = load_noise_config(args.config)
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
    else:
        nm = load_noise_config()
    if args.preset and args.preset != "default" and args.config:
        log.warning("--preset overrides --config")
    # a noiseless model stays noiseless whatever dephasing mode is asked for
    if args.mode and not nm.is_noiseless:
        nm = replace(nm, dephasing_mode=args.mode)
    if args.noise_scale is not None:
        nm = nm.with_scale(args.noise_scale)
    return nm


def _backend(args, nm: NoiseModel) -> str:
    if args.backend:
        return args.backend
    return "dense" if nm.dephasing_mode == "coherent" else "frame"


def _manifest(args, nm: NoiseModel, outputs: list) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("func", "out_dir", "workers", "verbose")}
    cfg["noise"] = asdict(nm)
    blob = json.dumps(cfg, sort_keys=True, default=str)
    return {"config_hash": hashlib.sha256(blob.encode()).hexdigest(), "seed": args.seed,
            "version": __version__, "config": json.loads(blob),
            "outputs": sorted(str(Path(p).name) for p in outputs)}


def _out(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc}") from exc
    return out


def _dump(args, out: Path, name: str, circuit, outputs: list) -> None:
    if args.dump_circuit:
        d = out / "circuits"
        d.mkdir(exist_ok=True)
        p = d / f"{name}.json"
        p.write_text(circuit.to_json(indent=1) + "\n")
        outputs.append(p)


def _log_shots(args, out: Path, name: str, circuit, nm, shots, seed, backend, timing,
               outputs: list) -> None:
    """Newline-delimited JSON shot records with the sampled faults."""
    if not args.log_faults:
        return
    res = run_batch(circuit, nm, shots, seed, backend, timing, log_faults=True)
    p = out / f"shots_{name}.ndjson"
    with open(p, "w") as fh:
        for i in range(res.shots):
            fh.write(res.record(i).to_json() + "\n")
    outputs.append(p)


def _safe(state: str) -> str:
    return {"|0>": "zero", "|1>": "one", "|+>": "plus", "|->": "minus", "|+i>": "plusi",
            "|-i>": "minusi", "|T>": "t"}[state]


# ---------------------------------------------------------------- commands

def cmd_memory(args) -> int:
    """Six-state memory grid over the requested cycle counts, with decay fits."""
    nm = resolve_noise(args)
    out = _out(args)
    backend = _backend(args, nm)
    grid = run_memory_grid(nm, args.cycles, args.shots, args.seed, backend=backend,
                           workers=args.workers)
    outputs = [write_csv(out / "memory.csv", grid.rows(), MEMORY_COLUMNS)]
    outputs.append(write_json(out / "fit.json", grid.to_dict()))
    rows = [{"name": k, "p_spam": grid.p_spam[k], "p_cycle": v, "p_cycle_std": s}
            for k, (v, s) in grid.fits.items()]
    outputs.append(write_csv(out / "fit.csv", rows, FIT_COLUMNS))
    series = []
    for b in BASES:
        pair = BASIS_STATES[b]
        ys = [0.5 * (grid.rate(pair[0], c) + grid.rate(pair[1], c)) for c in grid.cycles]
        es = [0.5 * (grid.runs[(pair[0], c)].jackknife()[1] ** 2
                     + grid.runs[(pair[1], c)].jackknife()[1] ** 2) ** 0.5 for c in grid.cycles]
        series.append({"label": f"{b} basis", "x": list(grid.cycles), "y": ys, "err": es})
    (out / "memory.svg").write_text(svg_plot(series, "QEC cycles", "logical error rate"))
    outputs.append(out / "memory.svg")
    for st in INIT_STATES:
        c = memory_circuit(st, max(grid.cycles))
        _dump(args, out, f"memory_{_safe(st)}_c{max(grid.cycles)}", c, outputs)
        _log_shots(args, out, f"{_safe(st)}_c{max(grid.cycles)}", c, nm, args.shots, args.seed,
                   backend, None if nm.dephasing_mode == "off" else default_timing(None, nm.two_pi), outputs)
    write_json(out / "manifest.json", _manifest(args, nm, outputs))
    avg, std = grid.fits["average"]
    print(f"average p_cycle = {avg:.4g} +- {std:.2g}")
    for b in BASES:
        v, s = grid.fits[f"basis {b}"]
        print(f"  {b} basis ({BASIS_RATE_NAME[b]}) = {v:.4g} +- {s:.2g}")
    return 0


def cmd_sgate(args) -> int:
    """Logical S gate with active correction and with a software frame update."""
    nm = resolve_noise(args)
    out = _out(args)
    backend = _backend(args, nm)
    rows, outputs = [], []
    for i, active in enumerate((True, False)):
        cfg = ExperimentConfig("|+>", "Y", 1, args.shots, backend, nm, args.seed + i,
                               active_correction=active, workers=args.workers)
        r = run_sgate_experiment(cfg)
        mean, std = r.jackknife()
        mode = "active" if active else "software"
        rows.append({"mode": mode, "shots": r.shots, "failures": r.failures,
                     "fidelity": r.fidelity, "jackknife_std": std})
        _dump(args, out, f"sgate_{mode}", sgate_circuit(active), outputs)
        print(f"{mode:8s} fidelity = {r.fidelity:.4f} +- {std:.2g}")
    outputs.append(write_csv(out / "sgate.csv", rows, SGATE_COLUMNS))
    write_json(out / "manifest.json", _manifest(args, nm, outputs))
    return 0


def cmd_magic(args) -> int:
    """Prepare the magic state T|+>_L on the dense backend and estimate its error."""
    nm = resolve_noise(args)
    out = _out(args)
    if args.backend not in (None, "dense"):
        raise CliError("the magic state needs the dense backend")
    res = prep_tstate(ExperimentConfig("|T>", "X", 0, args.shots, "dense", nm, args.seed,
                                       workers=args.workers))
    outputs = [write_json(out / "magic.json", {
        "error": res.error, "std": res.std, "distillation_threshold": 0.335,
        "x": res.x.to_dict(), "y": res.y.to_dict()})]
    for b in ("X", "Y"):
        _dump(args, out, f"magic_{b}", tstate_circuit(b), outputs)
    write_json(out / "manifest.json", _manifest(args, nm, outputs))
    print(f"magic-state error = {res.error:.4f} +- {res.std:.2g} (threshold 0.335)")
    return 0


def cmd_budget(args) -> int:
    """Error budget over SPAM/MCMR, gate and dephasing noise from masked runs."""
    nm = resolve_noise(args)
    out = _out(args)
    res = error_budget(nm, args.shots, args.seed, scales=args.scales or (0.25, 0.5, 1.0),
                       backend=_backend(args, nm), workers=args.workers)
    m = res.model
    shares = m.shares()
    rows = [{"source": s, "A": float(m.A[i]), "B_row_sum": float(m.B[i].sum()), "share": shares[s]}
            for i, s in enumerate(m.sources)]
    outputs = [write_csv(out / "budget.csv", rows, BUDGET_COLUMNS),
               write_json(out / "budget.json", res.to_dict())]
    write_json(out / "manifest.json", _manifest(args, nm, outputs))
    for s in m.sources:
        print(f"{s:10s} {100 * shares[s]:5.1f}%")
    return 0


def cmd_threshold(args) -> int:
    """Pseudo-threshold scan of p_cycle against s * p2 for the noise presets."""
    base = resolve_noise(args)
    out = _out(args)
    names = [args.preset] if args.preset else [p for p in PRESETS if p != "off"]
    models = {}
    for n in names:
        nm = preset(n, base.dephasing_mode if base.dephasing_mode != "off" else "incoherent")
        models[n] = nm
    scales = args.scales or (0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0)
    res = threshold_scan(models, scales, args.shots, args.seed, backend=_backend(args, base),
                         workers=args.workers)
    rows = [{"model": n, "scale": s, "p_L": p, "std": e, "line": l}
            for n, cur in res.items() for s, p, e, l in zip(cur.scales, cur.p_L, cur.stds, cur.line)]
    outputs = [write_csv(out / "threshold.csv", rows, THRESHOLD_COLUMNS),
               write_json(out / "threshold.json", {n: c.to_dict() for n, c in res.items()})]
    series = [{"label": n, "x": c.scales, "y": c.p_L, "err": c.stds} for n, c in res.items()]
    series.append({"label": "s * p2", "x": list(scales), "y": [s * 3.1e-3 for s in scales],
                   "dashed": True, "color": "black"})
    (out / "threshold.svg").write_text(svg_plot(series, "scale s", "logical error per cycle",
                                               logx=True))
    outputs.append(out / "threshold.svg")
    write_json(out / "manifest.json", _manifest(args, base, outputs))
    for n, c in res.items():
        where = "" if c.crossing is None else f" at s = {c.crossing:.3g}"
        print(f"{n:14s} {c.status}{where}")
    return 0


def cmd_inject(args) -> int:
    """Exhaustive single-fault injection; exits 1 when any fault is not corrected."""
    from .ftcheck import inject_all
    out = _out(args)
    cycles = args.cycles[-1] if args.cycles else 1
    rep = inject_all(cycles=max(cycles, 1), backend=args.backend or "frame")
    data = {"total": rep.total, "failures": len(rep.failures),
            "per_state": {s: {"faults": n, "failures": f} for s, (n, f) in rep.per_state.items()},
            "failing_faults": [{"state": s, **f.to_dict()} for s, f in rep.failures]}
    outputs = [write_json(out / "inject.json", data)]
    write_json(out / "manifest.json", _manifest(args, NoiseModel(), outputs))
    print(rep.summary())
    for s, (n, f) in rep.per_state.items():
        print(f"  {s:5s} {f} / {n}")
    return 0 if rep.ok else 1


def cmd_fit(args) -> int:
    """Refit p_cycle from a memory CSV (uses the per-point jackknife stds as weights)."""
    if not args.input:
        raise CliError("fit needs --input memory.csv")
    try:
        rows = read_csv(args.input)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from exc
    by_state: dict = {}
    for r in rows:
        by_state.setdefault(r["state"], {})[int(r["cycles"])] = (
            float(r["mean"]), float(r["jackknife_std"]), int(r["shots"]))
    fits = {}
    for st, d in by_state.items():
        f = fit_decay_rates({c: v[0] for c, v in d.items()}, {c: v[1] for c, v in d.items()},
                            {c: v[2] for c, v in d.items()})
        fits[st] = f
    out_rows = [{"name": st, "p_spam": f.p_spam, "p_cycle": f.p_cycle, "p_cycle_std": f.p_cycle_std}
                for st, f in fits.items()]
    basis = {}
    for b in BASES:
        pair = BASIS_STATES[b]
        if all(s in by_state for s in pair):
            cyc = sorted(set(by_state[pair[0]]) & set(by_state[pair[1]]))
            rates = {c: 0.5 * (by_state[pair[0]][c][0] + by_state[pair[1]][c][0]) for c in cyc}
            stds = {c: 0.5 * (by_state[pair[0]][c][1] ** 2 + by_state[pair[1]][c][1] ** 2) ** 0.5
                    for c in cyc}
            shots = {c: by_state[pair[0]][c][2] + by_state[pair[1]][c][2] for c in cyc}
            f = fit_decay_rates(rates, stds, shots)
            basis[b] = f
            out_rows.append({"name": f"basis {b}", "p_spam": f.p_spam, "p_cycle": f.p_cycle,
                             "p_cycle_std": f.p_cycle_std})
    result = {"fits": {r["name"]: r for r in out_rows}}
    if len(basis) == 3:
        ch = invert_basis_rates(*(basis[b].p_cycle for b in BASES))
        result["channel"] = ch.to_dict()
    out = _out(args)
    outputs = [write_csv(out / "fit.csv", out_rows, FIT_COLUMNS), write_json(out / "fit.json", result)]
    write_json(out / "manifest.json", _manifest(args, NoiseModel(), outputs))
    for r in out_rows:
        print(f"{r['name']:10s} p_cycle = {r['p_cycle']:.4g} +- {r['p_cycle_std']:.2g}")
    return 0


COMMANDS = {"memory": cmd_memory, "sgate": cmd_sgate, "magic": cmd_magic, "budget": cmd_budget,
            "threshold": cmd_threshold, "inject": cmd_inject, "fit": cmd_fit}

DEFAULT_SHOTS = {"memory": 20000, "sgate": 10000, "magic": 20000, "budget": 20000,
                 "threshold": 20000, "inject": 0, "fit": 0}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftqec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0] if fn.__doc__ else None)
        sp.add_argument("--config", help="noise configuration file (key = value lines)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--shots", type=int, default=DEFAULT_SHOTS[name])
        sp.add_argument("--cycles", type=parse_cycles, default=(0, 1, 2, 3, 4) if name == "memory" else None,
                        help="e.g. 0..4 or 0,1,2")
        sp.add_argument("--backend", choices=("tableau", "frame", "dense"))
        sp.add_argument("--mode", choices=("coherent", "incoherent", "off"),
                        help="dephasing model")
        sp.add_argument("--noise-scale", type=float, dest="noise_scale")
        sp.add_argument("--preset", "--noise", dest="preset", choices=PRESETS,
                        help="named noise model (--noise is an alias)")
        sp.add_argument("--out-dir", default="out", dest="out_dir")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--dump-circuit", action="store_true", dest="dump_circuit",
                        help="write the circuits as JSON under OUT_DIR/circuits")
        sp.add_argument("--log-faults", action="store_true", dest="log_faults",
                        help="write newline-delimited JSON shot records with sampled faults")
        sp.add_argument("--scales", type=parse_floats, help="noise scales (budget, threshold)")
        sp.add_argument("--input", help="memory CSV to refit (fit)")
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.shots < 0:
        parser.error("--shots must be non-negative")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
