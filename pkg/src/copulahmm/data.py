"""Minute-by-minute match data: CSV ingestion and covariate standardization."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .likelihood import MatchSeries
from .model import ModelSpec

__all__ = [
    "REQUIRED_COLUMNS",
    "COVARIATE_COLUMNS",
    "DataError",
    "Dataset",
    "load_dataset",
    "write_dataset",
    "compute_standardization",
]

REQUIRED_COLUMNS = ("match_id", "minute", "shots", "touches", "score_diff", "home", "opp_market_value")
COVARIATE_COLUMNS = ("opp_market_value", "score_diff", "home", "minute")
# dummies stay on their 0/1 scale
UNSCALED = frozenset({"home"})


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """A list of matches plus the covariate scaling used to build them."""

    matches: tuple[MatchSeries, ...]
    covariate_names: tuple[str, ...] = ()
    standardization: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "matches", tuple(self.matches))
        ids = [m.match_id for m in self.matches]
        if len(set(ids)) != len(ids):
            raise DataError("match ids must be unique")

    @property
    def n_obs(self) -> int:
        return sum(m.T for m in self.matches)

    def __len__(self) -> int:
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)

    def match(self, match_id: str) -> MatchSeries:
        for m in self.matches:
            if m.match_id == match_id:
                return m
        raise KeyError(f"no match with id {match_id!r}")

    def model_spec(self, n_states: int, copula="independence") -> ModelSpec:
        return ModelSpec(n_states, copula, self.covariate_names, self.standardization)


def compute_standardization(raw: np.ndarray, names) -> tuple[tuple[float, float], ...]:
    """``(mean, sd)`` per column over all rows; dummies and constant columns map to (0, 1)."""
    stats = []
    for j, name in enumerate(names):
        if name in UNSCALED:
            stats.append((0.0, 1.0))
            continue
        col = raw[:, j]
        sd = float(np.std(col, ddof=1)) if len(col) > 1 else 0.0
        stats.append((float(np.mean(col)), sd if sd > 0 else 1.0))
    return tuple(stats)


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise DataError(f"line {line}: column {column!r} is not a number: {value!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise DataError(f"line {line}: column {column!r} must be an integer, got {value!r}")
    return int(f)


def _parse_float(value: str, column: str, line: int) -> float:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise DataError(f"line {line}: column {column!r} is not a number: {value!r}") from None
    if not math.isfinite(f):
        raise DataError(f"line {line}: column {column!r} must be finite, got {value!r}")
    return f


def load_dataset(path, covariates=(), standardization=None) -> Dataset:
    """Read a match CSV into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        CSV with header columns ``match_id, minute, shots, touches,
        score_diff, home, opp_market_value``; extra columns are ignored.
        Rows of one match must appear in strictly increasing minute order.
    covariates : sequence of str
        Covariates to attach to each match, in order.
    standardization : sequence of (mean, sd), optional
        Scaling to apply; computed from the file when omitted. Pass a fitted
        model's scaling when applying it to new data.
    """
    covariates = tuple(covariates)
    unknown = [c for c in covariates if c not in COVARIATE_COLUMNS]
    if unknown:
        raise DataError(f"unknown covariates {unknown}; available: {list(COVARIATE_COLUMNS)}")
    rows: dict[str, list[tuple]] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing required columns {missing}")
        for line, rec in enumerate(reader, start=2):
            mid = (rec["match_id"] or "").strip()
            if not mid:
                raise DataError(f"line {line}: empty match_id")
            minute = _parse_int(rec["minute"], "minute", line)
            shots = _parse_int(rec["shots"], "shots", line)
            touches = _parse_int(rec["touches"], "touches", line)
            if shots < 0 or touches < 0:
                raise DataError(f"line {line}: counts must be nonnegative")
            home = _parse_int(rec["home"], "home", line)
            if home not in (0, 1):
                raise DataError(f"line {line}: home must be 0 or 1, got {home}")
            values = {
                "minute": float(minute),
                "home": float(home),
                "score_diff": _parse_float(rec["score_diff"], "score_diff", line),
                "opp_market_value": _parse_float(rec["opp_market_value"], "opp_market_value", line),
            }
            prev = rows.get(mid)
            if prev:
                last_minute, last_line = prev[-1][0], prev[-1][4]
                if minute == last_minute:
                    raise DataError(f"line {line}: duplicate minute {minute} for match {mid!r} "
                                    f"(first seen on line {last_line})")
                if minute < last_minute:
                    raise DataError(f"line {line}: minutes of match {mid!r} are not increasing "
                                    f"({minute} after {last_minute}); rows must be pre-sorted")
            rows.setdefault(mid, []).append(
                (minute, shots, touches, [values[c] for c in covariates], line)
            )
    if not rows:
        raise DataError(f"{path}: no data rows")
    raw = {mid: np.array([r[3] for r in recs], dtype=float).reshape(len(recs), len(covariates))
           for mid, recs in rows.items()}
    if standardization is None:
        standardization = compute_standardization(np.concatenate(list(raw.values())), covariates)
    spec = ModelSpec(1, covariate_names=covariates, standardization=standardization)
    matches = [
        MatchSeries(mid, np.array([(r[1], r[2]) for r in recs]), spec.standardize(raw[mid]))
        for mid, recs in rows.items()
    ]
    return Dataset(matches, covariates, spec.standardization)


def write_dataset(path, matches) -> None:
    """Write simulated matches (carrying ``raw`` covariates) in the input CSV schema."""
    with open(path, "w", newline="") as fh:
        _write_rows(fh, matches)


def _write_rows(fh, matches) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for m in matches:
        raw = getattr(m, "raw", None) or {}
        for t in range(m.T):
            minute = int(raw["minute"][t]) if "minute" in raw else t + 1
            writer.writerow([
                m.match_id, minute, int(m.y[t, 0]), int(m.y[t, 1]),
                _fmt(raw.get("score_diff", [0] * m.T)[t]),
                int(raw.get("home", [1] * m.T)[t]),
                _fmt(raw.get("opp_market_value", [0.0] * m.T)[t]),
            ])


def _fmt(v) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)
