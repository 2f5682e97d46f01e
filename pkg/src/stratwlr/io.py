"""Reading and writing delimited patient-level files."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .survival_core import Cohort

__all__ = ["ColumnMap", "Dataset", "read_dataset", "parse_dataset", "write_dataset", "format_number"]

DELIMITERS = {"comma": ",", "tab": "\t", "semicolon": ";"}
_TRUE = {"1", "1.0", "true", "t", "yes"}
_FALSE = {"0", "0.0", "false", "f", "no"}


@dataclass(frozen=True)
class ColumnMap:
    time: str = "time"
    event: str = "event"
    arm: str = "arm"
    stratum: Optional[str] = "stratum"


@dataclass
class Dataset:
    """Parsed records plus the labels needed to print or re-export them."""

    cohort: Cohort
    stratum_labels: list
    columns: ColumnMap
    arm_labels: tuple = ("0", "1")
    source: str = "<memory>"
    sha256: str = ""
    delimiter: str = ","
    line_numbers: list = field(default_factory=list, repr=False)


def _sniff(header: str) -> str:
    counts = {d: header.count(d) for d in (",", "\t", ";")}
    best = max(counts, key=counts.get)
    return best if counts[best] > 0 else ","


def _parse_flag(value, line, column):
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValidationError(f"line {line}: column {column!r} must be 0 or 1, got {value!r}")


def parse_dataset(
    text: str,
    columns: ColumnMap = ColumnMap(),
    delimiter: Optional[str] = None,
    experimental: Optional[str] = None,
    strata: Optional[Sequence[str]] = None,
    source: str = "<memory>",
) -> Dataset:
    """Parse delimited text with a header row.

    Parameters
    ----------
    text : str
        File contents.
    columns : ColumnMap
        Header names for time, event, arm and (optionally) stratum.
    delimiter : str, optional
        Field separator; detected from the header among comma, tab and
        semicolon when omitted.
    experimental : str, optional
        Arm label coding the experimental arm. Without it the arm column must
        already hold 0/1.
    strata : sequence of str, optional
        Declared stratum labels, in index order. Labels outside the list are
        rejected. By default labels are indexed in order of first appearance.
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ValidationError(f"{source}: empty file")
    delim = DELIMITERS.get(delimiter, delimiter) if delimiter else _sniff(lines[0])
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    header = [h.strip() for h in next(reader)]

    wanted = {"time": columns.time, "event": columns.event, "arm": columns.arm}
    if columns.stratum:
        wanted["stratum"] = columns.stratum
    pos = {}
    for key, name in wanted.items():
        if name not in header:
            raise ValidationError(f"line 1: missing column {name!r} (found: {', '.join(header)})")
        pos[key] = header.index(name)

    labels = list(strata) if strata is not None else []
    label_index = {lab: i for i, lab in enumerate(labels)}
    arm_labels = set()
    time, event, arm, stratum, line_nos = [], [], [], [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ValidationError(f"line {line_no}: expected {len(header)} fields, found {len(row)}")
        raw_t = row[pos["time"]].strip()
        try:
            t = float(raw_t)
        except ValueError:
            raise ValidationError(f"line {line_no}: time {raw_t!r} is not a number") from None
        if not np.isfinite(t) or t < 0:
            raise ValidationError(f"line {line_no}: time must be finite and nonnegative, got {raw_t!r}")
        e = _parse_flag(row[pos["event"]], line_no, columns.event)

        raw_arm = row[pos["arm"]].strip()
        if experimental is None:
            a = int(_parse_flag(raw_arm, line_no, columns.arm))
        else:
            arm_labels.add(raw_arm)
            if len(arm_labels) > 2:
                raise ValidationError(f"line {line_no}: more than two arm labels ({', '.join(sorted(arm_labels))})")
            a = int(raw_arm == experimental)

        if columns.stratum:
            lab = row[pos["stratum"]].strip()
            if lab == "":
                raise ValidationError(f"line {line_no}: empty stratum label")
            if lab not in label_index:
                if strata is not None:
                    raise ValidationError(f"line {line_no}: unknown stratum label {lab!r}")
                label_index[lab] = len(labels)
                labels.append(lab)
            s = label_index[lab]
        else:
            s = 0

        time.append(t)
        event.append(e)
        arm.append(a)
        stratum.append(s)
        line_nos.append(line_no)

    if not time:
        raise ValidationError(f"{source}: no data rows")
    if experimental is not None:
        if experimental not in arm_labels:
            raise ValidationError(f"experimental arm label {experimental!r} does not occur in column {columns.arm!r}")
        control = sorted(arm_labels - {experimental})
        arm_names = (control[0] if control else "control", experimental)
    else:
        arm_names = ("0", "1")
    if not columns.stratum:
        labels = ["all"]

    return Dataset(
        cohort=Cohort(time, event, arm, stratum, n_strata=max(len(labels), 1)),
        stratum_labels=labels,
        columns=columns,
        arm_labels=arm_names,
        source=source,
        sha256=hashlib.sha256(text.encode()).hexdigest(),
        delimiter=delim,
        line_numbers=line_nos,
    )


def read_dataset(path, **kwargs) -> Dataset:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_dataset(text, source=str(path), **kwargs)


def format_number(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_dataset(ds: Dataset, path=None) -> str:
    """Export records with the original column names and labels.

    Parsing the output with the same column map returns identical records.
    """
    cols = ds.columns
    header = [cols.time, cols.event, cols.arm] + ([cols.stratum] if cols.stratum else [])
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=ds.delimiter, lineterminator="\n")
    w.writerow(header)
    c = ds.cohort
    for t, e, a, s in zip(c.time, c.event, c.arm, c.stratum):
        row = [format_number(t), int(e), ds.arm_labels[a] if ds.arm_labels != ("0", "1") else int(a)]
        if cols.stratum:
            row.append(ds.stratum_labels[s])
        w.writerow(row)
    out = buf.getvalue()
    if path is not None:
        Path(path).write_text(out)
    return out
