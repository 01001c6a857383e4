"""Input coercion shared by the estimators and the CLI."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
from sklearn.utils.validation import check_array

from bellcert.bell_stats import RelabellingConvention, TrialRecord
from bellcert.exceptions import DomainError
from bellcert.ingest import Dataset, PreselectionWindow

__all__ = ["check_convention", "check_records", "check_window"]

_ARRAY_COLUMNS = ("x", "y", "a", "b", "herald_time")


def _from_frame(frame) -> Dataset:
    cols = set(frame.columns)
    missing = {"x", "y", "a", "b"} - cols
    if missing:
        raise DomainError(f"data frame lacks columns {sorted(missing)}")
    index = frame["index"].tolist() if "index" in cols else list(range(len(frame)))
    times = frame["herald_time"].tolist() if "herald_time" in cols else [None] * len(frame)
    states = frame["herald_state"].tolist() if "herald_state" in cols else [None] * len(frame)
    records = []
    for i, x, y, a, b, t, s in zip(index, frame["x"], frame["y"], frame["a"], frame["b"],
                                    times, states):
        t = None if t is None or t != t else float(t)
        s = None if s is None or s != s else s
        records.append(TrialRecord(int(i), int(x), int(y), int(a), int(b), t, s))
    return Dataset(tuple(records))


def check_records(X) -> Dataset:
    """Coerce trial data into a :class:`Dataset`.

    Accepts a Dataset, a sequence of :class:`TrialRecord`, a pandas data frame
    with named columns, or a numeric array whose columns are
    ``x, y, a, b[, herald_time]`` (rows are numbered in order).
    """
    if isinstance(X, Dataset):
        return X
    if hasattr(X, "columns") and hasattr(X, "iloc"):
        return _from_frame(X)
    if isinstance(X, Sequence) and X and isinstance(X[0], TrialRecord):
        return Dataset(tuple(X))
    arr = check_array(X, dtype=float, ensure_all_finite="allow-nan", ensure_min_samples=1)
    if arr.shape[1] not in (4, 5):
        raise DomainError(
            f"array input needs columns {', '.join(_ARRAY_COLUMNS[:4])}[, herald_time]; "
            f"got {arr.shape[1]} columns")
    bits = arr[:, :4]
    if not np.all(np.isin(bits, (0.0, 1.0))):
        raise DomainError("settings and outcomes must be 0 or 1")
    bits = bits.astype(np.int64)
    times = arr[:, 4] if arr.shape[1] == 5 else None
    records = tuple(
        TrialRecord(i, int(r[0]), int(r[1]), int(r[2]), int(r[3]),
                    None if times is None or np.isnan(times[i]) else float(times[i]))
        for i, r in enumerate(bits))
    return Dataset(records)


def check_window(window) -> PreselectionWindow | None:
    if window is None or isinstance(window, PreselectionWindow):
        return window
    if isinstance(window, Mapping):
        return PreselectionWindow(float(window["t_s"]), float(window["t_e"]))
    try:
        t_s, t_e = window
    except (TypeError, ValueError):
        raise DomainError(f"window must be a (t_s, t_e) pair, got {window!r}") from None
    return PreselectionWindow(float(t_s), float(t_e))


def check_convention(convention):
    if isinstance(convention, Mapping):
        return {str(k): check_convention(v) for k, v in convention.items()}
    if isinstance(convention, RelabellingConvention):
        return convention
    return RelabellingConvention(int(convention))
