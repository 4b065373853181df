"""Instance ingestion: aggregated age-group tables, subject CSVs and the built-in data.

The six built-in instances are one-day screening samples aggregated by
age group. Each row gives the group's risk, the number of people tested
and how many tested positive.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from scipy import stats

from pooltest.errors import InstanceIOError, ParseError, RiskOutOfRange, SchemaError
from pooltest.model import Population, Subject, TestCharacteristics, validate_population

DEFAULT_SE = 0.7
DEFAULT_SP = 0.95
DEFAULT_LAMBDA = 0.8


@dataclass(frozen=True)
class AgeGroupRecord:
    label: str
    risk: float
    count: int
    positives: Optional[int] = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"record {self.label!r}: count must be non-negative")
        if self.positives is not None and not 0 <= self.positives <= self.count:
            raise ValueError(f"record {self.label!r}: positives must lie in [0, count]")


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    records: tuple[AgeGroupRecord, ...]
    tc: TestCharacteristics = field(default_factory=lambda: TestCharacteristics(DEFAULT_SE, DEFAULT_SP))
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if sum(r.count for r in self.records) < 1:
            raise ValueError(f"instance {self.name!r} has no subjects")

    @property
    def n_subjects(self) -> int:
        return sum(r.count for r in self.records)

    @property
    def positives(self) -> Optional[int]:
        if any(r.positives is None for r in self.records):
            return None
        return sum(r.positives for r in self.records)


def disaggregate(spec: InstanceSpec) -> Population:
    """One subject per tested person, ids ``<label>-<k>``, sorted by risk."""
    subjects = [
        Subject(f"{rec.label}-{k}", rec.risk)
        for rec in spec.records
        for k in range(1, rec.count + 1)
    ]
    return validate_population(subjects)


_PAPER_TABLES = {
    "inst1": [("15-44", 0.238, 18, 1), ("45-64", 0.339, 18, 5), ("65-74", 0.370, 4, 2), ("75+", 0.253, 14, 5)],
    "inst2": [("15-44", 0.238, 18, 3), ("45-64", 0.339, 21, 1), ("65-74", 0.370, 4, 0), ("75+", 0.253, 11, 7)],
    "inst3": [("-15", 0.000, 2, 0), ("15-44", 0.187, 76, 14), ("45-64", 0.152, 44, 6), ("65-74", 0.125, 13, 5), ("75+", 0.369, 22, 7)],
    "inst4": [("-15", 0.000, 1, 0), ("15-44", 0.187, 59, 11), ("45-64", 0.152, 45, 8), ("65-74", 0.125, 12, 2), ("75+", 0.369, 29, 7)],
    "inst5": [("-15", 0.000, 3, 1), ("15-44", 0.157, 49, 9), ("45-64", 0.199, 34, 9), ("65-74", 0.176, 4, 0), ("75+", 0.277, 14, 1)],
    "inst6": [("-15", 0.000, 0, 0), ("15-44", 0.157, 49, 7), ("45-64", 0.199, 36, 5), ("65-74", 0.176, 9, 0), ("75+", 0.277, 6, 1)],
}
# inst1 and inst2 have no "-15" subjects and no risk for that row, so it is left out.

BUILTIN_NAMES = tuple(_PAPER_TABLES)


def builtin_paper_instances() -> list[InstanceSpec]:
    tc = TestCharacteristics(DEFAULT_SE, DEFAULT_SP)
    return [
        InstanceSpec(name, tuple(AgeGroupRecord(*row) for row in rows), tc, DEFAULT_LAMBDA)
        for name, rows in _PAPER_TABLES.items()
    ]


def builtin_instance(name: str) -> InstanceSpec:
    for spec in builtin_paper_instances():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown built-in instance {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    significant_at_5pct: bool
    degenerate: bool = False


def chi_square_two_proportions(a_pos: int, a_tot: int, b_pos: int, b_tot: int) -> ChiSquareResult:
    """Pearson chi-square on the 2x2 table of positives/negatives for two groups.

    One degree of freedom, no continuity correction. A table with an empty
    row or column margin has no defined statistic; it is reported as
    degenerate and not significant.
    """
    for pos, tot in ((a_pos, a_tot), (b_pos, b_tot)):
        if tot < 1 or not 0 <= pos <= tot:
            raise ValueError(f"need 0 <= positives <= total and total >= 1, got {pos}/{tot}")
    a, b = a_pos, a_tot - a_pos
    c, d = b_pos, b_tot - b_pos
    n = a + b + c + d
    margins = (a + b) * (c + d) * (a + c) * (b + d)
    if margins == 0:
        return ChiSquareResult(0.0, 1.0, False, degenerate=True)
    statistic = n * (a * d - b * c) ** 2 / margins
    p_value = float(stats.chi2.sf(statistic, df=1))
    return ChiSquareResult(float(statistic), p_value, p_value < 0.05)


# --- file formats -----------------------------------------------------------

def _number(value, what: str, line=None, field_name=None) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what} is not a number: {value!r}", line, field_name) from None
    if math.isnan(x):
        raise ParseError(f"{what} is NaN", line, field_name)
    return x


def parse_subjects_csv(text: str) -> Population:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ParseError("empty CSV", line=1)
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["id", "risk"]:
        raise ParseError("CSV header must be 'id,risk'", line=1)
    subjects = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise ParseError("expected two columns", line=lineno)
        risk = _number(row[1].strip(), "risk", lineno, "risk")
        subjects.append(Subject(row[0].strip(), risk))
    return validate_population(subjects)


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where}: {key!r} must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{where}: {key!r} must be an integer")
        return value
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: {key!r} must be {kind.__name__}")
    return value


def spec_from_dict(doc: dict) -> InstanceSpec:
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be a JSON object")
    name = _require(doc, "name", str, "instance")
    se = _require(doc, "se", float, "instance")
    sp = _require(doc, "sp", float, "instance")
    lam = _require(doc, "lambda", float, "instance")
    records_raw = _require(doc, "records", list, "instance")
    records = []
    for k, rec in enumerate(records_raw):
        where = f"records[{k}]"
        if not isinstance(rec, dict):
            raise SchemaError(f"{where} must be an object")
        positives = rec.get("positives")
        if positives is not None and (isinstance(positives, bool) or not isinstance(positives, int)):
            raise SchemaError(f"{where}: 'positives' must be an integer")
        try:
            records.append(
                AgeGroupRecord(
                    _require(rec, "label", str, where),
                    _require(rec, "risk", float, where),
                    _require(rec, "count", int, where),
                    positives,
                )
            )
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        if not 0.0 <= records[-1].risk <= 1.0:
            raise RiskOutOfRange(records[-1].label, records[-1].risk)
    try:
        return InstanceSpec(name, tuple(records), TestCharacteristics(se, sp), lam)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def spec_to_dict(spec: InstanceSpec) -> dict:
    records = []
    for r in spec.records:
        rec = {"label": r.label, "risk": r.risk, "count": r.count}
        if r.positives is not None:
            rec["positives"] = r.positives
        records.append(rec)
    return {"name": spec.name, "se": spec.tc.se, "sp": spec.tc.sp, "lambda": spec.lam, "records": records}


def dump_instance(spec: InstanceSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n", encoding="utf-8")


def load_instance(path: Union[str, Path], format: Optional[str] = None) -> Union[InstanceSpec, Population]:
    """Read ``csv_subjects`` (a Population) or ``json_aggregated`` (an InstanceSpec).

    Without ``format`` the file suffix decides.
    """
    path = Path(path)
    if format is None:
        format = "csv_subjects" if path.suffix.lower() == ".csv" else "json_aggregated"
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceIOError(f"cannot read {path}: {exc}") from exc
    if format == "csv_subjects":
        return parse_subjects_csv(text)
    if format == "json_aggregated":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        return spec_from_dict(doc)
    raise ValueError(f"unknown instance format {format!r}")


def instance_summary(records: Sequence[AgeGroupRecord]) -> dict:
    return {
        "subjects": sum(r.count for r in records),
        "min_risk": min(r.risk for r in records if r.count),
        "max_risk": max(r.risk for r in records if r.count),
    }
