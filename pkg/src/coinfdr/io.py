"""Delimited-text inputs, JSON-lines run reports and result tables."""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import RawMatrix, SummaryData

_NU_COMMENT = re.compile(r"^#\s*nu\s*=\s*(\S+)\s*$")


class InputError(ValueError):
    """Malformed input file; ``line`` (1-based) and ``column`` locate the problem."""

    def __init__(self, msg, path=None, line=None, column=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{': '.join([', '.join(where), msg]) if where else msg}")
        self.line = line
        self.column = column


class MissingNuError(InputError):
    pass


@dataclass(eq=False)
class SummaryTable:
    ids: list
    x: np.ndarray
    s2: np.ndarray
    nu: int

    def __len__(self):
        return len(self.ids)

    @property
    def n_zero(self) -> int:
        return int(np.sum(self.s2 == 0))

    def prepared(self) -> tuple[SummaryData, np.ndarray]:
        """Summary data with s2 = 0 rows clamped to the smallest positive s2.

        Also returns the mask of rows that may enter the NPMLE fit (the
        clamped rows may not).
        """
        s2 = self.s2.copy()
        fit_mask = s2 > 0
        if not fit_mask.any():
            raise InputError("every s2 value is zero")
        if not fit_mask.all():
            s2[~fit_mask] = s2[fit_mask].min()
        return SummaryData(self.x, s2, self.nu, np.array(self.ids, dtype=object)), fit_mask


def _parse_float(text, path, line, column):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"cannot parse {text!r} as a number", path, line, column) from None
    if not math.isfinite(value):
        raise InputError(f"non-finite value {text!r}", path, line, column)
    return value


def _data_lines(path):
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if text:
                yield lineno, text


def read_summary_table(path, nu: int | None = None, delimiter: str = ",") -> SummaryTable:
    """Read an ``id,x,s2`` table; ``nu`` comes from the argument or a ``# nu=<int>`` line."""
    path = Path(path)
    comment_nu = None
    ids, xs, s2s = [], [], []
    seen = {}
    header_seen = False
    for lineno, text in _data_lines(path):
        if text.startswith("#"):
            m = _NU_COMMENT.match(text)
            if m:
                try:
                    comment_nu = int(m.group(1))
                except ValueError:
                    raise InputError(f"bad nu value {m.group(1)!r}", path, lineno) from None
            continue
        cells = [c.strip() for c in next(csv.reader([text], delimiter=delimiter))]
        if not header_seen:
            if [c.lower() for c in cells] != ["id", "x", "s2"]:
                raise InputError("expected header 'id,x,s2'", path, lineno)
            header_seen = True
            continue
        if len(cells) != 3:
            raise InputError(f"expected 3 fields, found {len(cells)}", path, lineno)
        ident = cells[0]
        if ident in seen:
            raise InputError(f"duplicate id {ident!r} (first seen on line {seen[ident]})", path, lineno)
        seen[ident] = lineno
        x = _parse_float(cells[1], path, lineno, 2)
        s2 = _parse_float(cells[2], path, lineno, 3)
        if s2 < 0:
            raise InputError(f"negative s2 {s2}", path, lineno, 3)
        ids.append(ident)
        xs.append(x)
        s2s.append(s2)
    if not header_seen:
        raise InputError("missing header 'id,x,s2'", path)
    resolved = nu if nu is not None else comment_nu
    if resolved is None:
        raise MissingNuError("degrees of freedom missing: pass --nu or add a '# nu=<int>' line", path)
    if resolved < 1:
        raise InputError(f"nu must be a positive integer, got {resolved}", path)
    return SummaryTable(ids, np.array(xs, dtype=float), np.array(s2s, dtype=float), int(resolved))


def write_summary_table(path, data: SummaryData, delimiter: str = ","):
    with open(path, "w", newline="") as fh:
        fh.write(f"# nu={data.nu}\n")
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["id", "x", "s2"])
        for i, x, s2 in zip(data.ids, data.x, data.s2):
            w.writerow([i, repr(float(x)), repr(float(s2))])


def read_raw_matrix(path, design: str = "two-group", n1: int | None = None, delimiter: str = ",") -> RawMatrix:
    """Rows: feature id followed by one value per sample. An optional header starts with ``id``."""
    path = Path(path)
    ids, rows = [], []
    width = None
    for lineno, text in _data_lines(path):
        if text.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([text], delimiter=delimiter))]
        if not rows and not ids and cells[0].lower() == "id":
            continue
        if width is None:
            width = len(cells)
            if width < 2:
                raise InputError("rows need an id and at least one sample", path, lineno)
        elif len(cells) != width:
            raise InputError(f"ragged row: {len(cells)} fields, expected {width}", path, lineno)
        ids.append(cells[0])
        rows.append([_parse_float(c, path, lineno, j) for j, c in enumerate(cells[1:], start=2)])
    if not rows:
        raise InputError("no data rows", path)
    values = np.array(rows, dtype=float)
    n = values.shape[1]
    if design == "two-group":
        if n1 is None:
            raise InputError("two-group design needs --n1", path)
        if not 1 <= n1 < n:
            raise InputError(f"--n1 {n1} out of range for {n} sample columns", path)
        return RawMatrix(values, "two-group", (n1, n - n1), np.array(ids, dtype=object))
    return RawMatrix(values, "one-group", None, np.array(ids, dtype=object))


# -- reports -------------------------------------------------------------------


@dataclass
class RunReport:
    method: str
    alpha: float
    seed: int
    config: dict = field(default_factory=dict)
    rejected_ids: list = field(default_factory=list)
    records: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    warnings: dict = field(default_factory=dict)
    timing: float | None = None


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_report(report: RunReport, path):
    """JSON lines: one ``run`` header record, then one record per hypothesis."""
    head = {k: v for k, v in asdict(report).items() if k != "records"}
    head = {"type": "run", **_jsonable(head)}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for rec in report.records:
            fh.write(json.dumps({"type": "hypothesis", **_jsonable(rec)}, sort_keys=True) + "\n")


def read_report(path) -> RunReport:
    head, records = None, []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "run":
                head = obj
            else:
                records.append(obj)
    if head is None:
        raise InputError("report has no run record", path)
    return RunReport(records=records, **head)


def format_table(rows, columns, floatfmt="{:.4g}") -> str:
    """Fixed-width text table."""
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return floatfmt.format(v)
        return str(v)

    cells = [[fmt(r[c]) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[j]) for row in cells]) for j, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def write_results_table(rows, columns, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in columns})
