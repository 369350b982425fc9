"""Command-line entry point: ``cvqkd <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 I/O or record parse error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional

from . import csvio, plots, reproduce
from .channel import SourceConfig, sample_heterodyne_batch
from .config import ConfigError, RunConfig, load_config
from .estimation import build_q_histogram, excess_noise_report, marginal_histogram
from .keyrate import secret_key_rate
from .manifest import RunManifest
from .reference import FIG2_TRANSMISSIONS, TABLE1, TABLE2
from .sdp import SolverError
from .witness import bound_grid, witness_from_data, witness_from_excess

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

log = logging.getLogger("cvqkd")


class SolverFailure(RuntimeError):
    """A witness solve finished without a certified verdict."""


class Run:
    """Shared state of one invocation: config, output directory, manifest."""

    def __init__(self, command: str, cfg: RunConfig, workers: int):
        self.command = command
        self.cfg = cfg
        self.workers = workers
        self.out = Path(cfg["output"]["directory"])
        self.svg = cfg["output"]["format"] == "svg"
        self.manifest = RunManifest.start(command, cfg.echo(), cfg["source"]["seed"], workers)
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    def emit(self, *paths) -> None:
        self.manifest.record(*paths)
        for p in paths:
            log.info("wrote %s", p)

    def finish(self) -> Path:
        return self.manifest.write(self.path(f"manifest-{self.command}.json"))


def _check_verdict(v) -> None:
    if v.entangled is None:
        raise SolverFailure(f"witness solver did not converge: {v.status}")


def cmd_simulate(run: Run, args) -> None:
    src = run.cfg.source_config()
    batch = sample_heterodyne_batch(src, run.cfg.channel_config(), workers=run.workers)
    run.emit(csvio.write_records_csv(batch, run.path("records.csv")))


def cmd_analyze(run: Run, args) -> None:
    cfg = run.cfg
    records_path = args.records or run.path("records.csv")
    batch = csvio.read_records_csv(records_path)
    alpha, T = float(batch.meta["alpha"]), float(batch.meta["T"])
    run.manifest.config["input"] = {"records": str(records_path), "sha256": csvio.sha256_file(records_path)}

    h = build_q_histogram(batch)
    margs = {"x": marginal_histogram(batch, "x"), "y": marginal_histogram(batch, "y")}
    outputs = [csvio.write_q_grid(h, run.path("qfunction.csv")), csvio.write_marginals(margs, run.path("marginals.csv"))]

    sig, vac = batch.signal, batch.vacuum
    noise_rows = []
    verdict_inputs = {"T": T, "overlap": math.exp(-2 * alpha**2), "mode": cfg["witness"]["coherence_mode"]}
    if len(sig) == 0:
        noise_rows.append(csvio.noise_row(None, "undefined: no signal records"))
        verdict = None
        status = "skipped: no signal records"
    elif len(vac) < 2:
        noise_rows.append(csvio.noise_row(None, "undefined: no vacuum calibration records"))
        verdict = None
        status = "skipped: no vacuum calibration records"
    else:
        raw = excess_noise_report(batch)
        rel = cfg["detector"]["electronic_noise_rel"]
        # the vacuum reference holds shot plus electronic noise
        corrected = excess_noise_report(batch, electronic_var=raw.vacuum_var_used * rel / (1 + rel))
        noise_rows += [csvio.noise_row(raw), csvio.noise_row(corrected)]
        verdict_inputs.update(E_x=raw.E_x, E_y=raw.E_y)
        missing = [b for b in (0, 1) if int((sig.bit == b).sum()) < 2]
        if missing:
            verdict, status = None, f"skipped: fewer than 2 records with bit {missing[0]}"
        else:
            src = SourceConfig(alpha=alpha)
            w = cfg["witness"]
            verdict = witness_from_data(batch, src, T, w["tolerance"], w["coherence_mode"], w["method"])
            status = ""
    outputs.append(csvio.write_noise_reports(noise_rows, run.path("excess_noise.csv")))
    outputs.append(csvio.write_verdicts([csvio.verdict_row(verdict, verdict_inputs, status)], run.path("verdict.csv")))
    if run.svg:
        outputs += [plots.q_function(h, run.path("qfunction.svg")), plots.marginals(margs, run.path("marginals.svg"))]
    run.emit(*outputs)
    if verdict is not None:
        _check_verdict(verdict)


def cmd_witness(run: Run, args) -> None:
    w = run.cfg["witness"]
    src = run.cfg.source_config()
    T = run.cfg["channel"]["transmission"]
    v = witness_from_excess(T, src.overlap, w["excess_x"], w["excess_y"], w["coherence_mode"], w["tolerance"], 0, w["method"])
    run.emit(csvio.write_verdicts([csvio.verdict_row(v)], run.path("verdict.csv")))
    _check_verdict(v)


def _bounds(run: Run, transmissions, name: str, markers=None) -> None:
    w = run.cfg["witness"]
    curves = bound_grid(
        transmissions, w["overlaps"], w["resolution"], w["coherence_mode"], w["tolerance"], w["method"], run.workers
    )
    outputs = [csvio.write_bounds(curves, run.path(f"{name}.csv"))]
    if run.svg:
        outputs.append(plots.bound_curves(curves, run.path(f"{name}.svg"), markers))
    run.emit(*outputs)


def cmd_bounds(run: Run, args) -> None:
    _bounds(run, run.cfg["witness"]["transmissions"], "bounds")


def cmd_keyrate(run: Run, args) -> None:
    cfg = run.cfg
    rep = secret_key_rate(cfg.source_config().amplitude, cfg["channel"]["transmission"], cfg.postselection_config(), cfg.ec_model())
    table = run.path("keyrate.txt")
    table.write_text(csvio.format_rate_table([(rep.overlap, rep.T, rep.G_dr, rep.G_rr)]), encoding="utf-8")
    run.emit(
        csvio.write_keyrates([rep], run.path("keyrate.csv")),
        csvio.write_slices(rep, run.path("keyrate_slices.csv")),
        table,
    )


def cmd_reproduce(run: Run, args) -> None:
    target = args.target
    cfg = run.cfg
    if target == "table1":
        rows = reproduce.table1(cfg, run.workers)
        run.emit(csvio.write_table(run.path("table1.csv"), reproduce.COMPARISON_COLUMNS, rows))
    elif target == "table2":
        res = reproduce.table2(cfg)
        f = cfg["ec"]["efficiency"]
        reps = res.reports[f]
        table = run.path("table2.txt")
        table.write_text(
            f"efficiency f = {f:g}\n"
            + csvio.format_rate_table(
                [(r.overlap, r.T, rep.G_dr, rep.G_rr) for r, rep in zip(TABLE2, reps)],
                [(r.G_dr, r.G_rr) for r in TABLE2],
            ),
            encoding="utf-8",
        )
        run.emit(
            csvio.write_table(run.path("table2.csv"), reproduce.COMPARISON_COLUMNS, res.rows),
            csvio.write_keyrates([rep for f_ in sorted(res.reports) for rep in res.reports[f_]], run.path("table2_rates.csv")),
            table,
        )
    elif target == "fig2":
        markers = [(r.overlap, r.E_x_corrected) for r in TABLE1]
        _bounds(run, FIG2_TRANSMISSIONS, "fig2", markers)
    elif target == "fig9":
        rows = reproduce.fig9(cfg, run.workers)
        outputs = [csvio.write_table(run.path("fig9.csv"), reproduce.FIG9_COLUMNS, rows)]
        if run.svg:
            cols = list(zip(*rows))
            outputs.append(plots.postselection_sweep(cols[0], cols[1], cols[4], cols[2], cols[5], run.path("fig9.svg")))
        run.emit(*outputs)


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "witness": cmd_witness,
    "bounds": cmd_bounds,
    "keyrate": cmd_keyrate,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration")
    common.add_argument("--seed", type=int, help="override [source] seed")
    common.add_argument("--workers", type=int, default=1, help="parallel workers (results do not depend on it)")
    common.add_argument("--out", metavar="DIR", help="override [output] directory")
    common.add_argument("--format", choices=("csv", "svg"), help="csv only, or csv plus svg figures")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cvqkd", description="Coherent-state QKD simulation, entanglement witness and key rates.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="sample a heterodyne record batch")
    a = sub.add_parser("analyze", parents=[common], help="histograms, excess noise and witness from a record file")
    a.add_argument("--records", metavar="PATH", help="record CSV (default: OUT/records.csv)")
    sub.add_parser("witness", parents=[common], help="witness verdict for configured excess variances")
    sub.add_parser("bounds", parents=[common], help="tolerable excess variance over the configured grid")
    sub.add_parser("keyrate", parents=[common], help="postselection key rates for the configured link")
    r = sub.add_parser("reproduce", parents=[common], help="reproduce a reference table or figure")
    r.add_argument("target", choices=reproduce.TARGETS)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(args.seed, args.out, args.format)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        name = args.command if args.command != "reproduce" else f"reproduce-{args.target}"
        run = Run(name, cfg, args.workers)
        COMMANDS[args.command](run, args)
        run.finish()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SolverFailure) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except csvio.RecordParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
