"""Command-line front end.

Subcommands: ``bounds``, ``gaps``, ``separation``, ``halfduplex``. Every CSV
starts with a ``#`` header block describing the run (deterministic, so
repeated runs are byte-identical); wall-clock time and flag counts go to a
``<out>.manifest.json`` sidecar. Files are written under a ``.partial``
suffix and renamed when complete.

Exit codes: 0 success, 1 input error, 2 at least one solver result flagged.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import (AntennaConfig, ChannelFormatError, ChannelMatrices, HalfDuplexChannel,
                      random_channel, random_half_duplex)
from .gaps import ADDITIVE_METRICS, RATIO_METRICS, montecarlo_gaps, separation_curve, snr_to_power
from .optimizer import FULL_DUPLEX_KINDS, BoundSession, SolverConfig

log = logging.getLogger("mimorelay")

EXIT_OK, EXIT_INPUT, EXIT_FLAGGED = 0, 1, 2
SNR_NOTE = "snr convention: unit noise at every receiver, per-node power P = 10^(snr_db/10)"


class InputError(ValueError):
    pass


def fmt(x) -> str:
    """Fixed 9-significant-digit formatting; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return f"{x:.9g}"


# ---------------------------------------------------------------------------
# argument parsing helpers

def parse_grid(text: str) -> list[float]:
    """``a:step:b`` (inclusive) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise InputError(f"range must be a:step:b, got {text!r}")
            a, step, b = parts
            if step <= 0 or b < a:
                raise InputError(f"range needs step > 0 and b >= a, got {text!r}")
            n = int(math.floor((b - a) / step + 1e-9))
            return [round(a + k * step, 12) for k in range(n + 1)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse number list {text!r}") from exc


def parse_sigma2(text: str) -> tuple[float, ...]:
    out = []
    for p in text.split(","):
        p = p.strip().lower()
        if not p:
            continue
        if p in ("inf", "infinite"):
            out.append(math.inf)
        else:
            try:
                out.append(float(p))
            except ValueError as exc:
                raise InputError(f"bad sigma2 value {p!r}") from exc
    if not out:
        raise InputError("sigma2 grid must be nonempty")
    return tuple(out)


def parse_pair(text: str, name: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.split(","))
    except ValueError as exc:
        raise InputError(f"{name} must be two comma-separated integers, got {text!r}") from exc
    return a, b


def parse_bounds(text: str, allowed) -> list[str]:
    kinds = [k.strip().upper() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in allowed]
    if bad or not kinds:
        raise InputError(f"unknown bound(s) {', '.join(bad) or '(none)'}; choose from {', '.join(allowed)}")
    return kinds


def solver_config(args) -> SolverConfig:
    kw = {}
    if args.tol is not None:
        kw["tol_bits"] = args.tol
    if args.sigma2_grid is not None:
        kw["sigma2_grid"] = parse_sigma2(args.sigma2_grid)
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def power_points(args) -> list[tuple[float, float]]:
    """[(snr_db, P)] from --power or --snr-db."""
    if args.power is not None and args.snr_db is not None:
        raise InputError("give either --power or --snr-db, not both")
    if args.power is not None:
        if not args.power > 0 or math.isinf(args.power):
            raise InputError("--power must be a positive finite number")
        return [(10.0 * math.log10(args.power), float(args.power))]
    if args.snr_db is None:
        raise InputError("one of --power or --snr-db is required")
    return [(s, snr_to_power(s)) for s in parse_grid(args.snr_db)]


def load_channel_file(path: str) -> ChannelMatrices:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read channel file {path!r}: {exc.strerror}") from exc
    try:
        return ChannelMatrices.from_json(text)
    except ChannelFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def dims_of(args) -> AntennaConfig:
    try:
        return AntennaConfig.parse(args.dims)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output

@dataclass
class Output:
    command: str
    params: dict
    seed: int | None
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    flags: int = 0

    def header(self) -> list[str]:
        lines = [f"# mimorelay {__version__}", f"# command: {self.command}"]
        for k in sorted(self.params):
            lines.append(f"# {k}: {self.params[k]}")
        lines.append(f"# seed: {'' if self.seed is None else self.seed}")
        lines.append(f"# {SNR_NOTE}")
        lines.append(f"# solver_flags: {self.flags}")
        return lines

    def text(self) -> str:
        body = [",".join(self.columns)] + [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(self.header() + body) + "\n"


def write_atomic(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
        return
    tmp = path + ".partial"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(path: str, outputs: list[tuple[str, Output]], started: float):
    for p, out in outputs:
        write_atomic(p, out.text())
    if path != "-":
        main_out = outputs[0][1]
        manifest = {"command": main_out.command, "parameters": main_out.params, "seed": main_out.seed,
                    "version": __version__, "wall_clock_s": round(time.perf_counter() - started, 3),
                    "solver_flags": main_out.flags, "files": [os.path.basename(p) for p, _ in outputs]}
        write_atomic(path + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands

def _bounds_task(task):
    channel_id, ch, snr_db, P, kinds, cfg = task
    session = BoundSession(ch, P, cfg)
    out = []
    for k in kinds:
        r = session.bound(k)
        out.append((channel_id, snr_db, k, r.value_bits, r.sigma2_used, r.certificate_gap_bits, r.flagged))
    return out


def _run_tasks(tasks, fn, threads: int):
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_bounds(args) -> int:
    started = time.perf_counter()
    cfg = solver_config(args)
    kinds = parse_bounds(args.bounds, FULL_DUPLEX_KINDS)
    points = power_points(args)
    if args.channel:
        channels = [(0, load_channel_file(args.channel))]
    else:
        if args.dims is None:
            raise InputError("need --channel FILE or --dims t1,t2,r2,r3")
        config = dims_of(args)
        channels = [(i, random_channel(config, args.seed, stream=i)) for i in range(args.channels)]
    tasks = [(cid, ch, snr, P, kinds, cfg) for cid, ch in channels for snr, P in points]
    results = [r for chunk in _run_tasks(tasks, _bounds_task, args.threads) for r in chunk]
    results.sort(key=lambda r: (r[0], r[1], kinds.index(r[2])))
    params = {"bounds": ",".join(kinds), "tol_bits": cfg.tol_bits,
              "sigma2_grid": ",".join(fmt(s) for s in cfg.sigma2_grid),
              "power": fmt(args.power) if args.power is not None else "", "snr_db": args.snr_db or "",
              "channel": os.path.basename(args.channel) if args.channel else "",
              "dims": args.dims or "", "channels": len(channels)}
    out = Output("bounds", params, None if args.channel else args.seed,
                 ["channel_id", "snr_db", "bound", "value_bits", "sigma2_used", "certificate_gap_bits"])
    out.rows = [list(r[:6]) for r in results]
    out.flags = sum(1 for r in results if r[6])
    write_outputs(args.out, [(args.out, out)], started)
    return EXIT_FLAGGED if out.flags else EXIT_OK


def aggregate_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.aggregate{ext or '.csv'}"


def cmd_gaps(args) -> int:
    started = time.perf_counter()
    cfg = solver_config(args)
    config = dims_of(args)
    if args.channels < 0:
        raise InputError("--channels must be nonnegative")
    grid = parse_grid(args.snr_db)
    report = montecarlo_gaps(config, args.channels, grid, args.seed, cfg, workers=args.threads)
    params = {"dims": ",".join(str(x) for x in config.as_tuple()), "channels": args.channels,
              "snr_db": ",".join(fmt(s) for s in grid), "tol_bits": cfg.tol_bits,
              "sigma2_grid": ",".join(fmt(s) for s in cfg.sigma2_grid)}
    rows_out = Output("gaps", params, args.seed,
                      ["channel_id", "snr_db", "bound", "value_bits", "sigma2_used",
                       "certificate_gap_bits", "flagged"])
    rows_out.rows = [[r.channel_id, r.snr_db, r.bound, r.value_bits, r.sigma2_used,
                      r.certificate_gap_bits, r.flagged] for r in report.rows]
    rows_out.flags = sum(1 for r in report.rows if r.flagged)
    agg = Output("gaps-aggregate", dict(params, flagged_points=report.flagged_points,
                                        low_rate_points=report.low_rate_points,
                                        metrics=",".join(ADDITIVE_METRICS + RATIO_METRICS)),
                 args.seed, ["snr_db", "metric", "max", "avg", "count"])
    agg.rows = [[a.snr_db, a.metric, a.max, a.avg, a.count] for a in report.aggregates]
    agg.flags = rows_out.flags
    files = [(args.out, rows_out)]
    if args.out != "-":
        files.append((args.aggregate_out or aggregate_path(args.out), agg))
    write_outputs(args.out, files, started)
    return EXIT_FLAGGED if rows_out.flags else EXIT_OK


def cmd_separation(args) -> int:
    started = time.perf_counter()
    gs = parse_grid(args.g)
    if not gs or any(not g > 0 for g in gs):
        raise InputError("--g values must be positive")
    if args.power is None or not args.power > 0:
        raise InputError("--power must be positive")
    out = Output("separation", {"g": args.g, "power": fmt(args.power)}, None,
                 ["g", "pdf_lower_bits", "dfdt_upper_bits", "separation_bits"])
    out.rows = [[r.g, r.pdf_lower_bits, r.dfdt_upper_bits, r.separation_bits]
                for r in separation_curve(gs, args.power)]
    write_outputs(args.out, [(args.out, out)], started)
    return EXIT_OK


def half_duplex_from_full(mode: str, split: tuple[int, int], ch: ChannelMatrices) -> HalfDuplexChannel:
    """Read the half-duplex blocks out of a full-duplex channel document.

    SFD keeps G31[:, :t1'] and G21[:, t1':]; RFD keeps G31[:r3', :] and
    G32[r3':, :]. The remaining blocks are not part of the model and are ignored.
    """
    a, b = split
    c = ch.config
    if mode == "SFD":
        if a + b != c.t1:
            raise InputError(f"SFD split {a}+{b} must equal t1 = {c.t1}")
        return HalfDuplexChannel("SFD", split, ch.G21[:, a:], ch.G31[:, :a], ch.G32)
    if a + b != c.r3:
        raise InputError(f"RFD split {a}+{b} must equal r3 = {c.r3}")
    return HalfDuplexChannel("RFD", split, ch.G21, ch.G31[:a, :], ch.G32[a:, :])


def _halfduplex_task(task):
    channel_id, hd, snr_db, P, kinds, cfg = task
    session = BoundSession(hd, P, cfg)
    rows = []
    for k in kinds:
        r = session.bound(k)
        rows.append([channel_id, snr_db, k, r.value_bits, r.sigma2_used, r.certificate_gap_bits, r.flagged])
    check = None
    if hd.mode == "SFD":
        emb = session.embedded_session()
        cs, pdf = emb.bound("CS"), session.sfd_pdf()
        check = abs(cs.value_bits - pdf.value_bits) <= 2 * cfg.tol_bits
        for name, r in (("CS", cs), ("PDF", pdf)):
            rows.append([channel_id, snr_db, name, r.value_bits, r.sigma2_used, r.certificate_gap_bits,
                         r.flagged])
    return rows, check


def cmd_halfduplex(args) -> int:
    started = time.perf_counter()
    cfg = solver_config(args)
    mode = args.mode.upper()
    split = parse_pair(args.split, "--split")
    if split[0] < 1 or split[1] < 1:
        raise InputError("--split parts must be positive")
    allowed = ("SFD_CAP", "SFD_CF") if mode == "SFD" else ("RFD_CS", "RFD_PDF", "RFD_CF")
    kinds = parse_bounds(args.bounds, allowed) if args.bounds else list(allowed)
    points = power_points(args)
    if args.channel:
        channels = [(0, half_duplex_from_full(mode, split, load_channel_file(args.channel)))]
    else:
        if args.dims is None:
            raise InputError("need --channel FILE or --dims t1,t2,r2,r3")
        c = dims_of(args)
        total = c.t1 if mode == "SFD" else c.r3
        if sum(split) != total:
            which = "t1" if mode == "SFD" else "r3"
            raise InputError(f"{mode} split {split[0]}+{split[1]} must equal {which} = {total}")
        other = c.r3 if mode == "SFD" else c.t1
        channels = [(i, random_half_duplex(mode, split, c.t2, c.r2, other, args.seed, stream=i))
                    for i in range(args.channels)]
    tasks = [(cid, hd, snr, P, kinds, cfg) for cid, hd in channels for snr, P in points]
    results = _run_tasks(tasks, _halfduplex_task, args.threads)
    columns = ["channel_id", "snr_db", "bound", "value_bits", "sigma2_used", "certificate_gap_bits"]
    if mode == "SFD":
        columns.append("cs_equals_pdf")
    rows, flags = [], 0
    for chunk, check in results:
        for r in chunk:
            flags += bool(r[6])
            rows.append(r[:6] + ([check] if mode == "SFD" else []))
    order = kinds + ["CS", "PDF"]
    rows.sort(key=lambda r: (r[0], r[1], order.index(r[2])))
    params = {"mode": mode.lower(), "split": f"{split[0]},{split[1]}", "bounds": ",".join(kinds),
              "tol_bits": cfg.tol_bits, "sigma2_grid": ",".join(fmt(s) for s in cfg.sigma2_grid),
              "power": fmt(args.power) if args.power is not None else "", "snr_db": args.snr_db or "",
              "channel": os.path.basename(args.channel) if args.channel else "", "dims": args.dims or "",
              "channels": len(channels)}
    out = Output("halfduplex", params, None if args.channel else args.seed, columns, rows, flags)
    write_outputs(args.out, [(args.out, out)], started)
    return EXIT_FLAGGED if flags else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimorelay", description="Capacity bounds for Gaussian MIMO relay channels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, power=True):
        sp.add_argument("--out", required=True, help="output CSV path ('-' for stdout)")
        sp.add_argument("--tol", type=float, default=None, help="solver tolerance in bits (default 1e-3)")
        sp.add_argument("--sigma2-grid", default=None, help="comma-separated compression noise grid")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--seed", type=int, default=0)
        if power:
            sp.add_argument("--power", type=float, default=None, help="linear per-node power")
            sp.add_argument("--snr-db", default=None, help="a:step:b or comma list, in dB")

    b = sub.add_parser("bounds", help="compute bounds on one channel file or on random channels")
    b.add_argument("--channel", help="channel JSON file")
    b.add_argument("--dims", help="t1,t2,r2,r3 for random channels")
    b.add_argument("--channels", type=int, default=1, help="number of random channels")
    b.add_argument("--bounds", default=",".join(FULL_DUPLEX_KINDS))
    common(b)
    b.set_defaults(func=cmd_bounds)

    g = sub.add_parser("gaps", help="Monte Carlo gap experiment")
    g.add_argument("--dims", default="2,2,2,2")
    g.add_argument("--channels", type=int, default=200)
    g.add_argument("--snr-db", default="-10:10:30")
    g.add_argument("--aggregate-out", default=None, help="aggregate CSV path (default <out>.aggregate.csv)")
    common(g, power=False)
    g.set_defaults(func=cmd_gaps)

    s = sub.add_parser("separation", help="PDF vs max(DF, DT) on the parallel example channel")
    s.add_argument("--g", required=True, help="g values: a:step:b or comma list")
    s.add_argument("--power", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_separation)

    h = sub.add_parser("halfduplex", help="SFD / RFD half-duplex bounds")
    h.add_argument("--mode", required=True, choices=["sfd", "rfd", "SFD", "RFD"])
    h.add_argument("--split", required=True, help="t1',t1'' (sfd) or r3',r3'' (rfd)")
    h.add_argument("--channel", help="full-duplex channel JSON holding the half-duplex blocks")
    h.add_argument("--dims", help="t1,t2,r2,r3 for random channels")
    h.add_argument("--channels", type=int, default=1)
    h.add_argument("--bounds", default=None)
    common(h)
    h.set_defaults(func=cmd_halfduplex)
    return p


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Let ``--snr-db -10:10:30`` through: argparse would read the value as an option."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--snr-db", "--g", "--sigma2-grid"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_glue_negative_values(argv))
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for flagged results
        return EXIT_INPUT if exc.code == 2 else (exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ChannelFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
