"""Trial CSV schemas, piecewise-exponential tables and the bundled oncology data.

CSV schemas (header row required):

    binomial   study,responders,n
    normal     study,mean,n,sd
    tte        study,events,exposure
    tte (PWE)  study,interval_lo,interval_hi,events,exposure
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

from .records import Binomial, Endpoint, NormalMean, TrialRecord, Tte

SCHEMAS = {
    Endpoint.BINOMIAL: ("study", "responders", "n"),
    Endpoint.NORMAL: ("study", "mean", "n", "sd"),
    Endpoint.TTE: ("study", "events", "exposure"),
}
PWE_SCHEMA = ("study", "interval_lo", "interval_hi", "events", "exposure")


class ParseError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _int(cell: str, row: int, name: str) -> int:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: {name} {cell!r} is not numeric") from None
    if not v.is_integer():
        raise ParseError(f"row {row}: {name} {cell!r} is not an integer")
    return int(v)


def _float(cell: str, row: int, name: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: {name} {cell!r} is not numeric") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}: {name} must be finite")
    return v


def _read_rows(path, schema):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = tuple(c.strip() for c in rows[0])
    if header != schema:
        raise ParseError(f"{path}: header {','.join(header)!r} does not match {','.join(schema)!r}")
    body = []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(schema):
            raise ParseError(f"row {i}: expected {len(schema)} cells, got {len(r)}")
        body.append((i, [c.strip() for c in r]))
    return body


def parse_record(cells: Sequence[str], endpoint: Endpoint, row: int = 0) -> TrialRecord:
    endpoint = Endpoint(endpoint)
    sid = cells[0]
    try:
        if endpoint is Endpoint.BINOMIAL:
            payload = Binomial(_int(cells[1], row, "responders"), _int(cells[2], row, "n"))
        elif endpoint is Endpoint.NORMAL:
            payload = NormalMean(
                _float(cells[1], row, "mean"), _int(cells[2], row, "n"), _float(cells[3], row, "sd")
            )
        else:
            payload = Tte(_int(cells[1], row, "events"), _float(cells[2], row, "exposure"))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"row {row}: {exc}") from None
    return TrialRecord(sid, payload)


def parse_trials(path, endpoint) -> list[TrialRecord]:
    endpoint = Endpoint(endpoint)
    return [parse_record(cells, endpoint, i) for i, cells in _read_rows(path, SCHEMAS[endpoint])]


def write_trials(records: Sequence[TrialRecord], path) -> None:
    if not records:
        raise ValueError("nothing to write")
    endpoint = records[0].endpoint
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCHEMAS[endpoint])
        for r in records:
            p = r.payload
            if endpoint is Endpoint.BINOMIAL:
                w.writerow([r.study_id, p.responders, p.n])
            elif endpoint is Endpoint.NORMAL:
                w.writerow([r.study_id, _fmt(p.mean), p.n, _fmt(p.sd)])
            else:
                w.writerow([r.study_id, p.events, _fmt(p.exposure)])


# ---------------------------------------------------------------------------
# piecewise-exponential tables


@dataclass(frozen=True)
class PweStudy:
    study_id: str
    cells: tuple[tuple[int, float], ...]  # (events, exposure) per interval


@dataclass(frozen=True)
class PweTable:
    intervals: tuple[tuple[float, float], ...]
    studies: tuple[PweStudy, ...]

    def __post_init__(self):
        iv = self.intervals
        if not iv:
            raise ValueError("no intervals")
        if iv[0][0] != 0:
            raise ValueError("first interval must start at 0")
        for (lo, hi), nxt in zip(iv, list(iv[1:]) + [None]):
            if not hi > lo:
                raise ValueError(f"interval ({lo}, {hi}] is empty")
            if nxt is not None and nxt[0] != hi:
                raise ValueError(f"intervals not contiguous at {hi}")
        for s in self.studies:
            if len(s.cells) != len(iv):
                raise ValueError(f"study {s.study_id!r} has {len(s.cells)} cells, expected {len(iv)}")
            for ev, ex in s.cells:
                if ev < 0 or ex < 0:
                    raise ValueError(f"study {s.study_id!r}: negative events or exposure")

    @property
    def study_ids(self) -> list[str]:
        return [s.study_id for s in self.studies]

    def study(self, study_id: str) -> PweStudy:
        for s in self.studies:
            if s.study_id == study_id:
                return s
        raise KeyError(study_id)

    def cell(self, interval: int, study_id: str) -> tuple[int, float]:
        """(events, exposure) for a 1-based interval index."""
        return self.study(study_id).cells[interval - 1]


def collapse_intervals(
    t: PweTable, from_idx: int, to_idx: int, studies: Sequence[str] | None = None
) -> list[TrialRecord]:
    """Sum events and exposure over the 1-based inclusive interval range."""
    n = len(t.intervals)
    if not 1 <= from_idx <= to_idx <= n:
        raise ValueError(f"interval range {from_idx}..{to_idx} outside 1..{n}")
    chosen = t.studies if studies is None else [t.study(s) for s in studies]
    out = []
    for s in chosen:
        cells = s.cells[from_idx - 1 : to_idx]
        events = sum(c[0] for c in cells)
        # appendix exposures carry one decimal; round away summation noise
        exposure = round(math.fsum(c[1] for c in cells), 10)
        out.append(TrialRecord(s.study_id, Tte(events, exposure)))
    return out


def interval_records(t: PweTable, idx: int, studies: Sequence[str] | None = None) -> list[TrialRecord]:
    return collapse_intervals(t, idx, idx, studies)


def parse_pwe(path) -> PweTable:
    body = _read_rows(path, PWE_SCHEMA)
    intervals: list[tuple[float, float]] = []
    by_study: dict[str, dict[tuple[float, float], tuple[int, float]]] = {}
    for i, c in body:
        key = (_float(c[1], i, "interval_lo"), _float(c[2], i, "interval_hi"))
        ev, ex = _int(c[3], i, "events"), _float(c[4], i, "exposure")
        if ev < 0 or ex < 0:
            raise ParseError(f"row {i}: events and exposure must be >= 0")
        if key not in intervals:
            intervals.append(key)
        cells = by_study.setdefault(c[0], {})
        if key in cells:
            raise ParseError(f"row {i}: duplicate interval for study {c[0]!r}")
        cells[key] = (ev, ex)
    intervals.sort()
    studies = []
    for sid, cells in by_study.items():
        missing = [iv for iv in intervals if iv not in cells]
        if missing:
            raise ParseError(f"study {sid!r} lacks interval {missing[0]}")
        studies.append(PweStudy(sid, tuple(cells[iv] for iv in intervals)))
    try:
        return PweTable(tuple(intervals), tuple(studies))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def write_pwe(t: PweTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PWE_SCHEMA)
        for s in t.studies:
            for (lo, hi), (ev, ex) in zip(t.intervals, s.cells):
                w.writerow([s.study_id, _fmt(lo), _fmt(hi), ev, _fmt(ex)])


# ---------------------------------------------------------------------------
# ten oncology trials, events/exposure (years) over twelve follow-up intervals;
# studies 1-9 are historical, the last is the current trial

_APPENDIX_INTERVALS = (
    (0.00, 0.25), (0.25, 0.50), (0.50, 0.75), (0.75, 1.00), (1.00, 1.25), (1.25, 1.50),
    (1.50, 1.75), (1.75, 2.08), (2.08, 2.50), (2.50, 2.92), (2.92, 3.33), (3.33, 4.00),
)

_APPENDIX_ROWS = """
1/9.4 9/21.1 1/21.9 1/5.6 5/6.4 0/17.8 2/8 0/9.2 2/5.2 1/23.4
3/8.8 1/19.9 3/21.4 2/5.2 3/5.4 6/17 2/7.5 1/9.1 0/5 5/22.6
3/7.9 0/19.8 5/20.4 2/4.8 6/4.2 3/15.9 5/6.6 3/8.6 3/4.6 17/19.9
4/7 10/18.5 7/18.9 4/4 2/3.2 12/14 3/5.6 4/7.8 1/4.1 0/17.8
3/6.1 6/16.5 9/16.9 3/3.1 3/2.6 8/11.5 3/4.9 1/7.1 4/3.5 2/17.5
0/5.8 6/15 4/15.2 1/2.6 3/1.9 2/10.2 3/4.1 1/6.9 0/3 7/16.4
0/5.8 5/13.6 5/14.1 3/2.1 0/1.5 3/9.6 2/3.5 4/6.2 1/2.9 8/14.5
2/7.3 9/15.7 10/16.2 0/2.3 2/1.7 2/11.9 3/3.8 1/7.4 1/3.5 4/17.2
0/8.8 9/16.2 0/18.5 0/2.9 1/1.5 11/12.4 3/3.6 6/8 0/4.2 0/21
6/7.6 3/13.6 0/18.3 0/2.9 1/1 1/9.9 0/2.9 0/6.7 0/4.2 6/19.7
0/6.2 0/12.5 3/17 0/2.9 1/0.6 0/9.4 0/2.9 0/6.6 0/4.1 2/17.4
0/10 0/20.1 7/24.5 0/4.7 0/0.7 10/12.1 0/4.7 0/10.7 0/6.7 0/27.5
"""

APPENDIX_STUDY_IDS = tuple(f"Historical {i}" for i in range(1, 10)) + ("Current",)


def embedded_appendix_data() -> PweTable:
    grid = [
        [(int(ev), float(ex)) for ev, ex in (cell.split("/") for cell in line.split())]
        for line in _APPENDIX_ROWS.strip().splitlines()
    ]
    studies = tuple(
        PweStudy(sid, tuple(grid[i][j] for i in range(len(grid))))
        for j, sid in enumerate(APPENDIX_STUDY_IDS)
    )
    return PweTable(_APPENDIX_INTERVALS, studies)
