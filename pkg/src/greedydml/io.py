"""CSV ingestion and result tables (CSV, markdown, JSON)."""

from __future__ import annotations

import csv
import fnmatch
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import GreedyDMLError, MissingColumn, ParseError
from .simulate import SimStats
from .types import Dataset, EstimateResult, validate_dataset

__all__ = [
    "ColumnBindings",
    "read_table",
    "read_csv",
    "write_csv",
    "parse_column",
    "resolve_controls",
    "emit_table",
    "parse_json",
]

Result = Union[SimStats, EstimateResult]


@dataclass(frozen=True)
class ColumnBindings:
    """Which CSV columns play which role.

    ``controls`` entries are column names or shell-style glob patterns;
    matches are taken in header order and never include the outcome,
    treatment or instrument columns.
    """

    outcome: str
    treatment: str
    instrument: Optional[str] = None
    controls: tuple[str, ...] = field(default_factory=tuple)


def read_table(path: Union[str, Path]) -> tuple[list[str], dict[str, list[str]]]:
    """Read a headed, comma-delimited UTF-8 file into raw string columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise GreedyDMLError(f"{path}: file is empty") from None
        cols: dict[str, list[str]] = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno, "<row>", ",".join(row))
            for h, cell in zip(header, row):
                cols[h].append(cell)
    return header, cols


def parse_column(values: Sequence[str], column: str) -> np.ndarray:
    out = np.empty(len(values))
    for i, cell in enumerate(values):
        try:
            out[i] = float(cell)
        except ValueError:
            raise ParseError(i + 1, column, cell) from None
    return out


def resolve_controls(header: Sequence[str], patterns: Iterable[str], exclude: Iterable[str] = ()) -> list[str]:
    excluded = set(exclude)
    chosen: list[str] = []
    for pattern in patterns:
        hits = [h for h in header if fnmatch.fnmatchcase(h, pattern) and h not in excluded]
        if not hits:
            raise MissingColumn(f"no column matches control pattern {pattern!r}")
        chosen.extend(h for h in hits if h not in chosen)
    # header order regardless of pattern order
    position = {h: i for i, h in enumerate(header)}
    return sorted(chosen, key=position.__getitem__)


def read_csv(path: Union[str, Path], bindings: ColumnBindings) -> Dataset:
    """Load a :class:`Dataset` from a CSV file.

    Row numbers in :class:`ParseError` count data rows from 1 (the header
    is not counted).

    Raises
    ------
    MissingColumn
        If a bound column (or control pattern) is absent from the header.
    ParseError
        If a cell in a bound column is not a decimal number.
    """
    header, cols = read_table(path)
    roles = [bindings.outcome, bindings.treatment] + ([bindings.instrument] if bindings.instrument else [])
    for name in roles:
        if name not in cols:
            raise MissingColumn(f"column {name!r} not found in {path}")
    controls = resolve_controls(header, bindings.controls, exclude=roles)
    if not controls:
        raise MissingColumn("no control columns bound")
    y = parse_column(cols[bindings.outcome], bindings.outcome)
    d = parse_column(cols[bindings.treatment], bindings.treatment)
    z = parse_column(cols[bindings.instrument], bindings.instrument) if bindings.instrument else None
    X = np.column_stack([parse_column(cols[c], c) for c in controls])
    return validate_dataset(X, y, d, z, column_names=controls)


def write_csv(path: Union[str, Path], columns: Mapping[str, Sequence[float]]) -> None:
    """Write numeric columns with round-trip (shortest repr) precision."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=np.float64) for n in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*data):
            w.writerow([repr(float(v)) for v in row])


def _f3(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _sizes(sizes: Sequence[int]) -> str:
    return "/".join(str(s) for s in sizes)


def _rows(result: Result, fmt: str) -> tuple[list[str], list[str]]:
    if isinstance(result, SimStats):
        return ["Bias", "SD", "RMSE", "Coverage"], [
            _f3(result.bias), _f3(result.sd), _f3(result.rmse), _f3(result.coverage)
        ]
    roles = list(result.m_hats)
    size_cols = [f"m_hat[{r}]" for r in roles]
    sizes = [_sizes(result.m_hats[r]) for r in roles]
    if fmt == "markdown":
        return ["Estimate (SE)", "CI-low", "CI-high"] + size_cols, [
            f"{_f3(result.theta_hat)} ({_f3(result.std_err)})",
            _f3(result.ci_low), _f3(result.ci_high),
        ] + sizes
    return ["Estimate", "SE", "CI-low", "CI-high"] + size_cols, [
        _f3(result.theta_hat), _f3(result.std_err), _f3(result.ci_low), _f3(result.ci_high)
    ] + sizes


def _to_dict(result: Result) -> dict:
    if isinstance(result, SimStats):
        return {"type": "SimStats", **asdict(result)}
    return {
        "type": "EstimateResult",
        "theta_hat": result.theta_hat,
        "omega_hat": result.omega_hat,
        "std_err": result.std_err,
        "ci_low": result.ci_low,
        "ci_high": result.ci_high,
        "n_used": result.n_used,
        "alpha_level": result.alpha_level,
        "m_hats": result.m_hats,
    }


def _from_dict(obj: dict) -> Result:
    obj = dict(obj)
    kind = obj.pop("type", None)
    obj.pop("label", None)
    if kind == "SimStats":
        if obj.get("per_rep") is not None:
            obj["per_rep"] = [(float(t), bool(c)) for t, c in obj["per_rep"]]
        return SimStats(**obj)
    if kind == "EstimateResult":
        return EstimateResult(**obj)
    raise GreedyDMLError(f"unknown result type {kind!r}")


def emit_table(
    results: Union[Result, Sequence[Result]],
    fmt: str = "markdown",
    labels: Optional[Sequence[str]] = None,
) -> str:
    """Render one result or a list of same-kind results.

    ``csv`` and ``markdown`` round to three decimals; ``json`` keeps full
    precision and can be read back with :func:`parse_json`. ``labels``
    adds a leading label column (a ``label`` key in JSON).
    """
    single = isinstance(results, (SimStats, EstimateResult))
    items = [results] if single else list(results)
    if labels is not None and len(labels) != len(items):
        raise GreedyDMLError("one label per result is required")

    if fmt == "json":
        dicts = [_to_dict(r) for r in items]
        if labels is not None:
            for d, lab in zip(dicts, labels):
                d["label"] = lab
        return json.dumps(dicts[0] if single else dicts, indent=2) + "\n"

    if fmt not in ("csv", "markdown"):
        raise GreedyDMLError(f"unknown output format {fmt!r}")
    header: list[str] = []
    body: list[list[str]] = []
    for i, r in enumerate(items):
        h, row = _rows(r, fmt)
        if labels is not None:
            h, row = ["Label"] + h, [labels[i]] + row
        if header and h != header:
            raise GreedyDMLError("cannot mix result kinds in one table")
        header = h
        body.append(row)

    if fmt == "csv":
        lines = [",".join(header)] + [",".join(row) for row in body]
    else:
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ] + ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"


def parse_json(text: str) -> Union[Result, list[Result]]:
    """Inverse of ``emit_table(..., fmt="json")``."""
    obj = json.loads(text)
    if isinstance(obj, list):
        return [_from_dict(o) for o in obj]
    return _from_dict(obj)
