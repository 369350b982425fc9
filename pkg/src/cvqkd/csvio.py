"""CSV emission and parsing with deterministic number formatting."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .channel import RecordBatch, RecordKind
from .estimation import ExcessNoiseReport, Histogram1D, Histogram2D
from .keyrate import KeyRateReport
from .witness import BoundCurve, WitnessVerdict

RECORD_COLUMNS = ("index", "kind", "bit", "outcome_x", "outcome_y")
_KIND_NAMES = {RecordKind.SIGNAL: "signal", RecordKind.VACUUM: "vacuum"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class RecordParseError(ValueError):
    """Malformed record file; ``line`` is 1-based."""

    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


def fmt(v) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if v == 0.0:
            return "0.0"  # drop the sign of -0.0
        return repr(v)
    return str(v)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    """Write rows with a header; ``comments`` become leading ``# `` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_table(path) -> tuple[list[str], list[str], list[list[str]]]:
    """(comment lines, header, rows) of a file written by write_table."""
    comments, header, rows = [], None, []
    with open(path, newline="", encoding="utf-8") as f:
        for line in f:
            if header is None and line.startswith("#"):
                comments.append(line[1:].strip())
                continue
            parsed = next(csv.reader([line]))
            if header is None:
                header = parsed
            else:
                rows.append(parsed)
    return comments, header or [], rows


# record batches


def _meta_line(meta: dict) -> str:
    keys = ("seed", "alpha", "T", "xi")
    parts = []
    for k in keys:
        v = meta.get(k)
        if isinstance(v, (list, tuple)):
            v = "/".join(fmt(float(u)) for u in v)
        else:
            v = fmt(v)
        parts.append(f"{k}={v}")
    return ",".join(parts)


def write_records_csv(batch: RecordBatch, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {_meta_line(batch.meta)}", ",".join(RECORD_COLUMNS)]
    kinds = [_KIND_NAMES[RecordKind(int(k))] for k in batch.kind]
    for i, k, b, x, y in zip(batch.index.tolist(), kinds, batch.bit.tolist(), batch.outcome_x.tolist(), batch.outcome_y.tolist()):
        lines.append(f"{i},{k},{'' if b < 0 else b},{fmt(x)},{fmt(y)}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _parse_meta(path, text: str) -> dict:
    meta = {}
    for part in text.split(","):
        if "=" not in part:
            raise RecordParseError(path, 1, f"bad header field {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        if v == "":
            meta[k] = None
        elif k == "seed":
            meta[k] = int(v)
        elif "/" in v:
            meta[k] = [float(u) for u in v.split("/")]
        else:
            meta[k] = float(v)
    for k in ("alpha", "T"):
        if meta.get(k) is None:
            raise RecordParseError(path, 1, f"header lacks {k}")
    return meta


def read_records_csv(path) -> RecordBatch:
    """Parse a record file; any malformed line raises RecordParseError with its number."""
    idx, kind, bit, xs, ys = [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith("#"):
            raise RecordParseError(path, 1, "missing '# seed=...,alpha=...,T=...,xi=...' header")
        try:
            meta = _parse_meta(path, first[1:].strip())
        except ValueError as exc:
            if isinstance(exc, RecordParseError):
                raise
            raise RecordParseError(path, 1, str(exc)) from None
        cols = f.readline().strip()
        if tuple(c.strip() for c in cols.split(",")) != RECORD_COLUMNS:
            raise RecordParseError(path, 2, f"expected columns {','.join(RECORD_COLUMNS)}")
        for lineno, line in enumerate(f, start=3):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise RecordParseError(path, lineno, f"expected 5 fields, got {len(fields)}")
            try:
                k = _KIND_CODES[fields[1]]
            except KeyError:
                raise RecordParseError(path, lineno, f"unknown kind {fields[1]!r}") from None
            try:
                i = int(fields[0])
                b = -1 if fields[2] == "" else int(fields[2])
                x = float(fields[3])
                y = float(fields[4])
            except ValueError as exc:
                raise RecordParseError(path, lineno, str(exc)) from None
            if k is RecordKind.SIGNAL and b not in (0, 1):
                raise RecordParseError(path, lineno, "signal row needs bit 0 or 1")
            if k is RecordKind.VACUUM and b != -1:
                raise RecordParseError(path, lineno, "vacuum row must not carry a bit")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise RecordParseError(path, lineno, "non-finite outcome")
            idx.append(i)
            kind.append(int(k))
            bit.append(b)
            xs.append(x)
            ys.append(y)
    bit_a = np.array(bit, dtype=np.int8)
    alpha = float(meta["alpha"])
    amp = np.where(bit_a < 0, 0.0, np.where(bit_a == 1, alpha, -alpha))
    return RecordBatch(
        np.array(idx, dtype=np.int64),
        np.array(kind, dtype=np.int8),
        bit_a,
        amp,
        np.array(xs, dtype=float),
        np.array(ys, dtype=float),
        meta=meta,
    )


# estimation outputs


def write_q_grid(h: Histogram2D, path) -> Path:
    xc, yc = h.x_centers, h.y_centers
    rows = ((x, y, h.density[i, j]) for i, x in enumerate(xc.tolist()) for j, y in enumerate(yc.tolist()))
    return write_table(path, ("x", "y", "density"), rows, comments=[f"total_count={h.total_count}"])


def write_marginals(hists: dict[str, Histogram1D], path) -> Path:
    rows = []
    for axis, h in hists.items():
        rows.extend((axis, c, d) for c, d in zip(h.centers.tolist(), h.density.tolist()))
    return write_table(path, ("axis", "center", "density"), rows)


NOISE_COLUMNS = ("corrected", "E_x", "E_y", "stat_error_x", "stat_error_y", "vacuum_var_used", "n_signal", "n_vacuum", "status")


def noise_row(r: Optional[ExcessNoiseReport], status: str = "ok", corrected: bool = False) -> tuple:
    if r is None:
        return (corrected, None, None, None, None, None, 0, 0, status)
    return (r.corrected, r.E_x, r.E_y, r.stat_error_x, r.stat_error_y, r.vacuum_var_used, r.n_signal, r.n_vacuum, status)


def write_noise_reports(rows: list[tuple], path) -> Path:
    return write_table(path, NOISE_COLUMNS, rows)


VERDICT_COLUMNS = ("T", "overlap", "E_x", "E_y", "mode", "t_star", "verdict", "status", "iterations", "gap", "method")


def verdict_row(v: Optional[WitnessVerdict], inputs: Optional[dict] = None, status: str = "") -> tuple:
    inp = dict(inputs or {})
    if v is not None:
        inp = {**v.inputs, **inp}
    head = (inp.get("T"), inp.get("overlap"), inp.get("E_x"), inp.get("E_y"), inp.get("mode"))
    if v is None:
        return head + (None, "skipped", status, 0, None, None)
    return head + (v.t_star, v.label, v.status, v.solver_iterations, v.gap, v.method)


def write_verdicts(rows: list[tuple], path) -> Path:
    return write_table(path, VERDICT_COLUMNS, rows)


def write_bounds(curves: list[BoundCurve], path) -> Path:
    return write_table(path, ("T", "overlap", "E_max"), ((c.transmission, c.overlap, c.E_max) for c in curves))


KEYRATE_COLUMNS = (
    "overlap", "T", "alpha", "efficiency_f", "G_DR", "G_RR", "tau_opt_DR", "tau_opt_RR", "acceptance_DR", "acceptance_RR",
)


def keyrate_row(r: KeyRateReport) -> tuple:
    return (r.overlap, r.T, r.alpha, r.efficiency_f, r.G_dr, r.G_rr, r.tau_opt_dr, r.tau_opt_rr, r.acceptance_dr, r.acceptance_rr)


def write_keyrates(reports: list[KeyRateReport], path) -> Path:
    return write_table(path, KEYRATE_COLUMNS, (keyrate_row(r) for r in reports))


def write_slices(r: KeyRateReport, path) -> Path:
    return write_table(path, ("x_center", "weight", "error"), ((s.x_center, s.weight, s.error) for s in r.slices))


def format_rate_table(rows: list[tuple[float, float, float, float]], extra: Optional[list[tuple[float, float]]] = None) -> str:
    """Plain-text table: overlap, T, DR rate, RR rate (optionally two reference columns)."""
    head = ["State overlap", "Transmission T", "Key rate DR", "Key rate RR"]
    if extra is not None:
        head += ["Reference DR", "Reference RR"]
    body = []
    for k, (o, T, dr, rr) in enumerate(rows):
        line = [f"{o:.2f}", f"{100 * T:.1f}%", f"{dr:.4f}", f"{rr:.4f}"]
        if extra is not None:
            line += [f"{extra[k][0]:.4f}", f"{extra[k][1]:.4f}"]
        body.append(line)
    widths = [max(len(head[i]), *(len(b[i]) for b in body)) for i in range(len(head))]
    out = ["  ".join(h.rjust(w) for h, w in zip(head, widths)), "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(out) + "\n"
