"""Trial-log parsing, validation and acceptance-window pre-selection.

Two on-disk formats are supported, both UTF-8 with LF line endings:

* CSV with header ``index,x,y,a,b[,herald_time][,herald_state]``
* JSONL, one object per line with the same field names

``herald_time`` is always in nanoseconds.  The window filter reads nothing
but ``herald_time``; settings and outcomes never influence which records are
kept.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any

from bellcert.bell_stats import HERALD_STATES, TrialRecord
from bellcert.exceptions import DomainError, MissingHeraldTimeError, ParseError

if TYPE_CHECKING:
    from bellcert.certify import CertificationConfig

__all__ = [
    "Dataset",
    "PreselectionWindow",
    "SweepRow",
    "dataset_hash",
    "dumps_dataset",
    "filter_window",
    "load_dataset",
    "save_dataset",
    "sweep_windows",
    "write_sweep_csv",
]

REQUIRED_FIELDS = ("index", "x", "y", "a", "b")
OPTIONAL_FIELDS = ("herald_time", "herald_state")
FORMATS = ("csv", "jsonl")


@dataclass(frozen=True)
class PreselectionWindow:
    """Inclusive acceptance window ``[t_s, t_e]`` on the herald time, in ns."""

    t_s: float
    t_e: float

    def __post_init__(self):
        # An open-ended window (t_e = inf) is allowed; NaN is not.
        if not math.isfinite(self.t_s) or math.isnan(self.t_e):
            raise DomainError(f"invalid window bounds [{self.t_s}, {self.t_e}]")
        if not 0 <= self.t_s < self.t_e:
            raise DomainError(f"window needs 0 <= t_s < t_e, got [{self.t_s}, {self.t_e}]")

    def contains(self, t: float) -> bool:
        return self.t_s <= t <= self.t_e

    def intersect(self, other: "PreselectionWindow") -> "PreselectionWindow | None":
        lo, hi = max(self.t_s, other.t_s), min(self.t_e, other.t_e)
        return PreselectionWindow(lo, hi) if lo < hi else None

    def as_dict(self) -> dict[str, float]:
        return {"t_s": self.t_s, "t_e": self.t_e}


def _canonical_line(r: TrialRecord) -> str:
    ht = "" if r.herald_time is None else repr(float(r.herald_time))
    hs = "" if r.herald_state is None else r.herald_state
    return f"{r.index},{r.x},{r.y},{r.a},{r.b},{ht},{hs}\n"


def dataset_hash(records: Iterable[TrialRecord]) -> str:
    """SHA-256 over the canonical record payload, independent of file format."""
    h = hashlib.sha256()
    for r in records:
        h.update(_canonical_line(r).encode())
    return h.hexdigest()


@dataclass(frozen=True)
class Dataset:
    """An ordered, validated, immutable sequence of trial records."""

    records: tuple[TrialRecord, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        _check_order(self.records)
        meta = dict(self.metadata)
        meta.setdefault("sha256", dataset_hash(self.records))
        object.__setattr__(self, "metadata", meta)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        return self.records[item]

    @property
    def sha256(self) -> str:
        return self.metadata["sha256"]

    @property
    def unfilterable(self) -> tuple[int, ...]:
        """Indices of records without a herald time."""
        return tuple(r.index for r in self.records if r.herald_time is None)


def _check_order(records: Sequence[TrialRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if cur.index <= prev.index:
            raise DomainError(
                f"record indices must be strictly increasing, got {prev.index} then {cur.index}")


def _parse_bit(raw: Any, name: str, line: int, path) -> int:
    if isinstance(raw, bool) or raw is None:
        raise ParseError(f"{name} must be 0 or 1, got {raw!r}", line=line, column=name, path=path)
    if isinstance(raw, str):
        raw = raw.strip()
        if raw not in ("0", "1"):
            raise ParseError(f"{name} must be 0 or 1, got {raw!r}", line=line, column=name, path=path)
        return int(raw)
    if raw in (0, 1) and not isinstance(raw, float):
        return int(raw)
    raise ParseError(f"{name} must be 0 or 1, got {raw!r}", line=line, column=name, path=path)


def _parse_index(raw: Any, line: int, path) -> int:
    try:
        if isinstance(raw, bool) or isinstance(raw, float):
            raise ValueError
        value = int(raw.strip()) if isinstance(raw, str) else int(raw)
    except (TypeError, ValueError):
        raise ParseError(f"index must be a non-negative integer, got {raw!r}",
                         line=line, column="index", path=path) from None
    if value < 0:
        raise ParseError(f"index must be non-negative, got {value}", line=line, column="index",
                         path=path)
    return value


def _parse_time(raw: Any, line: int, path) -> float | None:
    if raw is None or (isinstance(raw, str) and raw.strip() == ""):
        return None
    try:
        if isinstance(raw, bool):
            raise ValueError
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"herald_time must be a number, got {raw!r}", line=line,
                         column="herald_time", path=path) from None
    if not (math.isfinite(value) and value >= 0):
        raise ParseError(f"herald_time must be finite and non-negative, got {raw!r}", line=line,
                         column="herald_time", path=path)
    return value


def _parse_state(raw: Any, line: int, path) -> str | None:
    if raw is None or (isinstance(raw, str) and raw.strip() == ""):
        return None
    value = raw.strip() if isinstance(raw, str) else raw
    if value not in HERALD_STATES:
        raise ParseError(f"herald_state must be one of {HERALD_STATES}, got {raw!r}", line=line,
                         column="herald_state", path=path)
    return value


def _record_from_fields(row: dict, line: int, path) -> TrialRecord:
    unknown = sorted(set(row) - set(REQUIRED_FIELDS) - set(OPTIONAL_FIELDS))
    if unknown:
        raise ParseError(f"unknown field(s) {unknown}", line=line, path=path)
    for name in REQUIRED_FIELDS:
        if name not in row:
            raise ParseError(f"missing field {name!r}", line=line, column=name, path=path)
    return TrialRecord(
        index=_parse_index(row["index"], line, path),
        x=_parse_bit(row["x"], "x", line, path),
        y=_parse_bit(row["y"], "y", line, path),
        a=_parse_bit(row["a"], "a", line, path),
        b=_parse_bit(row["b"], "b", line, path),
        herald_time=_parse_time(row.get("herald_time"), line, path),
        herald_state=_parse_state(row.get("herald_state"), line, path),
    )


def _read_csv(text: str, path) -> list[tuple[int, TrialRecord]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, expected a header line", line=1, path=path) from None
    header = [h.strip() for h in header]
    if header[:5] != list(REQUIRED_FIELDS):
        raise ParseError(f"header must start with {','.join(REQUIRED_FIELDS)}, got {','.join(header)}",
                         line=1, path=path)
    extra = header[5:]
    if any(h not in OPTIONAL_FIELDS for h in extra) or len(set(extra)) != len(extra):
        raise ParseError(f"unexpected header columns {extra}", line=1, path=path)
    out = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", line=line, path=path)
        out.append((line, _record_from_fields(dict(zip(header, row)), line, path)))
    return out


def _read_jsonl(text: str, path) -> list[tuple[int, TrialRecord]]:
    out = []
    for line, raw in enumerate(text.split("\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg} (char {exc.pos})", line=line,
                             path=path) from None
        if not isinstance(obj, dict):
            raise ParseError("each line must be a JSON object", line=line, path=path)
        out.append((line, _record_from_fields(obj, line, path)))
    return out


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("jsonl", "ndjson"):
        return "jsonl"
    if suffix == "csv":
        return "csv"
    raise ParseError(f"cannot infer format from suffix {path.suffix!r}; pass csv or jsonl",
                     path=str(path))


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read and validate a trial log.

    ``format`` is ``"csv"`` or ``"jsonl"``; when omitted it is inferred from
    the file suffix.  Errors carry the offending line number.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt not in FORMATS:
        raise ParseError(f"unsupported format {fmt!r}; expected one of {FORMATS}", path=str(path))
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=str(path)) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8", path=str(path)) from None
    rows = _read_csv(text, str(path)) if fmt == "csv" else _read_jsonl(text, str(path))
    for (_, prev), (line, cur) in zip(rows, rows[1:]):
        if cur.index <= prev.index:
            raise ParseError(f"index {cur.index} does not increase (previous {prev.index})",
                             line=line, column="index", path=str(path))
    records = tuple(r for _, r in rows)
    metadata = {
        "source": str(path),
        "format": fmt,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "file_sha256": hashlib.sha256(raw).hexdigest(),
        "n_records": len(records),
        "n_unfilterable": sum(r.herald_time is None for r in records),
    }
    return Dataset(records, metadata)


def dumps_dataset(records: Iterable[TrialRecord], format: str = "csv") -> str:
    """Serialise records to CSV or JSONL text.

    Optional columns are written only when at least one record carries them.
    """
    records = list(records)
    has_time = any(r.herald_time is not None for r in records)
    has_state = any(r.herald_state is not None for r in records)
    if format == "csv":
        cols = list(REQUIRED_FIELDS) + (["herald_time"] if has_time else []) + (
            ["herald_state"] if has_state else [])
        lines = [",".join(cols)]
        for r in records:
            row = [str(r.index), str(r.x), str(r.y), str(r.a), str(r.b)]
            if has_time:
                row.append("" if r.herald_time is None else repr(float(r.herald_time)))
            if has_state:
                row.append(r.herald_state or "")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
    if format == "jsonl":
        out = []
        for r in records:
            obj: dict[str, Any] = {"index": r.index, "x": r.x, "y": r.y, "a": r.a, "b": r.b}
            if r.herald_time is not None:
                obj["herald_time"] = float(r.herald_time)
            if r.herald_state is not None:
                obj["herald_state"] = r.herald_state
            out.append(json.dumps(obj))
        return "\n".join(out) + ("\n" if out else "")
    raise DomainError(f"unsupported format {format!r}; expected one of {FORMATS}")


def save_dataset(records: Iterable[TrialRecord], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or _infer_format(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(records, fmt))


def filter_window(dataset: Dataset | Sequence[TrialRecord], window: PreselectionWindow,
                  strict: bool = True) -> Dataset:
    """Keep records whose herald time lies in ``[t_s, t_e]`` (both inclusive).

    In strict mode a record lacking ``herald_time`` is an error; otherwise such
    records are dropped.  The decision never looks at settings or outcomes.
    """
    if not isinstance(dataset, Dataset):
        dataset = Dataset(tuple(dataset))
    missing = dataset.unfilterable
    if missing and strict:
        shown = ", ".join(map(str, missing[:5]))
        raise MissingHeraldTimeError(
            f"{len(missing)} record(s) lack herald_time (first indices: {shown}); "
            "cannot apply the acceptance window in strict mode")
    kept = tuple(r for r in dataset.records
                 if r.herald_time is not None and window.contains(r.herald_time))
    meta = {k: v for k, v in dataset.metadata.items() if k != "sha256"}
    meta.update({
        "window": window.as_dict(),
        "n_kept": len(kept),
        "n_total": len(dataset.records),
        "parent_sha256": dataset.sha256,
    })
    return Dataset(kept, meta)


@dataclass(frozen=True)
class SweepRow:
    t_s: float
    n: int
    s_bar_u: float
    f_hat: dict[float, float]


def sweep_windows(dataset: Dataset | Sequence[TrialRecord], t_s_grid: Sequence[float], t_e: float,
                  config: "CertificationConfig", alphas: Sequence[float] | None = None,
                  strict: bool = True) -> list[SweepRow]:
    """Certify the data pre-selected with ``[t_s, t_e]`` for each ``t_s`` in the grid.

    ``alphas`` lists the significance levels to report (default: the config's
    alpha).  Windows that keep no records produce NaN statistics.
    """
    from bellcert.certify import certify

    grid = [float(t) for t in t_s_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("t_s grid must be sorted ascending")
    if not isinstance(dataset, Dataset):
        dataset = Dataset(tuple(dataset))
    alphas = tuple(alphas) if alphas is not None else (config.alpha,)
    rows = []
    for t_s in grid:
        window = PreselectionWindow(t_s, t_e)
        subset = filter_window(dataset, window, strict=strict)
        if len(subset) == 0:
            rows.append(SweepRow(t_s, 0, math.nan, {al: math.nan for al in alphas}))
            continue
        f_hat = {}
        s_bar = math.nan
        for al in alphas:
            cert = certify(subset, config.with_(alpha=al, window=None))
            f_hat[al] = cert.f_hat
            s_bar = cert.s_bar_u
        rows.append(SweepRow(t_s, len(subset), s_bar, f_hat))
    return rows


def confidence_label(alpha: float) -> str:
    return f"{1.0 - alpha:.10g}"


def write_sweep_csv(rows: Sequence[SweepRow], alphas: Sequence[float], fh) -> None:
    """Plot-ready CSV with header ``t_s,n,s_bar_u,f_hat_<CL>...``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t_s", "n", "s_bar_u"] + [f"f_hat_{confidence_label(al)}" for al in alphas])
    for row in rows:
        writer.writerow([repr(row.t_s), row.n, repr(row.s_bar_u)]
                        + [repr(row.f_hat[al]) for al in alphas])
