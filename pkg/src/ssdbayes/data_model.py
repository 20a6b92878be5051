"""Ingestion and standardization of concentration records.

Raw critical-effect concentrations arrive as one row per (contaminant,
species) bioassay, possibly censored.  This module parses them, collapses
multiple values per species by geometric means, and produces standardized
log10-scale samples with an invertible transform, which is the only
representation downstream modules consume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

KINDS = ("exact", "left", "right", "interval")
_KIND_CODE = {"exact": 0, "left": 1, "right": 2, "interval": 3}


@dataclass(frozen=True)
class CensoredValue:
    """A possibly censored measurement.

    ``lower`` and ``upper`` delimit the region the true value lies in:
    exact values have ``lower == upper``, left-censored values carry only an
    upper bound, right-censored ones only a lower bound, interval-censored
    ones both (with ``lower < upper``).
    """

    kind: str
    lower: float | None
    upper: float | None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown censor kind {self.kind!r}")
        lo, hi = self.lower, self.upper
        if self.kind == "exact":
            if lo is None or hi is None or lo != hi:
                raise ValueError("exact value must have coinciding bounds")
        elif self.kind == "left":
            if lo is not None or hi is None:
                raise ValueError("left-censored value carries exactly an upper bound")
        elif self.kind == "right":
            if lo is None or hi is not None:
                raise ValueError("right-censored value carries exactly a lower bound")
        else:
            if lo is None or hi is None:
                raise ValueError("interval-censored value carries two bounds")
            if not lo < hi:
                raise ValueError(f"interval bounds must satisfy lower < upper, got [{lo}, {hi}]")
        for b in (lo, hi):
            if b is not None and not math.isfinite(b):
                raise ValueError("bounds must be finite")

    @staticmethod
    def exact(value: float) -> "CensoredValue":
        return CensoredValue("exact", float(value), float(value))

    @staticmethod
    def left(bound: float) -> "CensoredValue":
        return CensoredValue("left", None, float(bound))

    @staticmethod
    def right(bound: float) -> "CensoredValue":
        return CensoredValue("right", float(bound), None)

    @staticmethod
    def interval(lower: float, upper: float) -> "CensoredValue":
        return CensoredValue("interval", float(lower), float(upper))

    @property
    def value(self) -> float:
        if self.kind != "exact":
            raise ValueError("only exact observations have a single value")
        return self.lower

    def map(self, fn) -> "CensoredValue":
        """Apply a strictly increasing transform to the bounds."""
        lo = None if self.lower is None else fn(self.lower)
        hi = None if self.upper is None else fn(self.upper)
        return CensoredValue(self.kind, lo, hi)

    def as_row(self) -> tuple[int, float, float]:
        """Kernel encoding: (kind code, a, b).

        Exact: a = value.  Left: a = upper bound.  Right: a = lower bound.
        Interval: a = lower, b = upper.
        """
        code = _KIND_CODE[self.kind]
        if self.kind == "exact":
            return code, self.lower, 0.0
        if self.kind == "left":
            return code, self.upper, 0.0
        if self.kind == "right":
            return code, self.lower, 0.0
        return code, self.lower, self.upper


@dataclass(frozen=True)
class ConcentrationRecord:
    """One (species, contaminant, concentration) observation.

    Concentrations are on the original measurement scale and must be strictly
    positive; the unit string is carried opaquely.
    """

    species: str
    contaminant: str
    observation: CensoredValue
    unit: str = ""

    def __post_init__(self):
        if not self.species:
            raise ValueError("species identifier must be non-empty")
        if not self.contaminant:
            raise ValueError("contaminant identifier must be non-empty")
        for b in (self.observation.lower, self.observation.upper):
            if b is not None and b <= 0.0:
                raise ValueError(f"concentrations must be positive, got {b}")


@dataclass(frozen=True)
class LogTransform:
    """The affine map x -> (log10 x - mean) / sd and its inverse."""

    mean: float
    sd: float
    base: float = 10.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("transform sd must be positive")

    def forward(self, concentration: float) -> float:
        return (math.log(concentration, self.base) - self.mean) / self.sd

    def inverse(self, z: float) -> float:
        return self.base ** (self.mean + self.sd * z)

    def log_of(self, z: float) -> float:
        """Standardized value back to the (unstandardized) log scale."""
        return self.mean + self.sd * z


@dataclass(frozen=True)
class StandardizedSample:
    """Standardized log-scale sample: the input every model consumes.

    ``values`` are censor-tagged reals on the standardized scale (exact-only
    samples have mean 0 and sample sd 1), ``transform`` recovers the original
    concentration scale, ``species`` aligns one identifier per value.
    """

    values: tuple[CensoredValue, ...]
    transform: LogTransform
    species: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.values)

    def exact_values(self) -> np.ndarray:
        return np.array([v.value for v in self.values if v.kind == "exact"])

    def has_censoring(self) -> bool:
        return any(v.kind != "exact" for v in self.values)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(kind codes, a, b) encoding for the numerical kernels."""
        rows = [v.as_row() for v in self.values]
        kind = np.array([r[0] for r in rows], dtype=np.int64)
        a = np.array([r[1] for r in rows], dtype=np.float64)
        b = np.array([r[2] for r in rows], dtype=np.float64)
        return kind, a, b


def parse_csv(path) -> list[ConcentrationRecord]:
    """Read concentration records from a CSV file.

    The header must declare ``contaminant,species,value,lower,upper,censor``.
    Rows with censor ``none`` read ``value``; ``left``/``right`` read their
    single bound from ``value``; ``interval`` reads ``lower``/``upper``.
    Errors mention the file line number (header is line 1).
    """
    required = {"contaminant", "species", "value", "lower", "upper", "censor"}
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            missing = sorted(required - set(reader.fieldnames or []))
            raise ValueError(f"CSV header missing columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(_parse_row(row))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{exc} at row {lineno}") from None
    return records


def _cell(row, key) -> str:
    v = row.get(key)
    return v.strip() if v is not None else ""


def _parse_row(row) -> ConcentrationRecord:
    censor = _cell(row, "censor")
    if censor == "none":
        obs = CensoredValue.exact(float(_cell(row, "value")))
    elif censor == "left":
        obs = CensoredValue.left(float(_cell(row, "value")))
    elif censor == "right":
        obs = CensoredValue.right(float(_cell(row, "value")))
    elif censor == "interval":
        obs = CensoredValue.interval(float(_cell(row, "lower")), float(_cell(row, "upper")))
    else:
        raise ValueError(f"censor must be one of none/left/right/interval, got {censor!r}")
    for b in (obs.lower, obs.upper):
        if b is not None and b <= 0:
            raise ValueError("non-positive concentration")
    return ConcentrationRecord(
        species=_cell(row, "species"),
        contaminant=_cell(row, "contaminant"),
        observation=obs,
    )


def _geomean(values) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values))


def aggregate_species(records: list[ConcentrationRecord]) -> list[ConcentrationRecord]:
    """Collapse multiple observations per species into one record each.

    Exact replicates are replaced by their geometric mean.  When censored
    observations are present the bounds are aggregated componentwise (left
    bounds treated as open at zero, right bounds as unbounded above), keeping
    the most specific censor kind the aggregated bounds allow.  Species order
    follows first appearance; single-record species pass through unchanged.
    """
    if not records:
        raise ValueError("no records to aggregate")
    contaminants = {r.contaminant for r in records}
    if len(contaminants) > 1:
        raise ValueError(f"records span multiple contaminants: {sorted(contaminants)}")
    by_species: dict[str, list[ConcentrationRecord]] = {}
    for r in records:
        by_species.setdefault(r.species, []).append(r)

    out = []
    for species, group in by_species.items():
        if len(group) == 1:
            out.append(group[0])
            continue
        obs = [r.observation for r in group]
        if all(o.kind == "exact" for o in obs):
            agg = CensoredValue.exact(_geomean([o.value for o in obs]))
        else:
            lows = [o.lower for o in obs]
            highs = [o.upper for o in obs]
            lo = None if any(l is None for l in lows) else _geomean(lows)
            hi = None if any(h is None for h in highs) else _geomean(highs)
            if lo is None and hi is None:
                raise ValueError(
                    f"species {species!r} mixes left- and right-censored records; "
                    "aggregated bounds are unbounded on both sides"
                )
            if lo is None:
                agg = CensoredValue.left(hi)
            elif hi is None:
                agg = CensoredValue.right(lo)
            elif lo == hi:
                agg = CensoredValue.exact(lo)
            else:
                agg = CensoredValue.interval(lo, hi)
        out.append(ConcentrationRecord(species, group[0].contaminant, agg, group[0].unit))
    return out


def decensor_records(records: list[ConcentrationRecord]) -> list[ConcentrationRecord]:
    """Conventional de-censoring: drop one-sided records, take interval midpoints."""
    out = []
    for r in records:
        o = r.observation
        if o.kind == "exact":
            out.append(r)
        elif o.kind == "interval":
            mid = 0.5 * (o.lower + o.upper)
            out.append(ConcentrationRecord(r.species, r.contaminant, CensoredValue.exact(mid), r.unit))
    return out


def log_standardize(records: list[ConcentrationRecord]) -> StandardizedSample:
    """Map records to the standardized log10 scale.

    The centering and scaling constants are the mean and sample standard
    deviation (n-1 denominator) of the exact log10 values; censored bounds
    are mapped by the same affine transform.
    """
    if len(records) < 2:
        raise ValueError("need at least two species to standardize")
    exact_logs = [
        math.log10(r.observation.value) for r in records if r.observation.kind == "exact"
    ]
    if not exact_logs:
        raise ValueError("cannot standardize without exact values")
    if len(exact_logs) < 2:
        raise ValueError("need at least two exact values to standardize")
    m = float(np.mean(exact_logs))
    s = float(np.std(exact_logs, ddof=1))
    if s <= 0:
        raise ValueError("zero variance among exact values; cannot standardize")
    transform = LogTransform(mean=m, sd=s)
    values = tuple(r.observation.map(transform.forward) for r in records)
    species = tuple(r.species for r in records)
    return StandardizedSample(values=values, transform=transform, species=species)


def standardize_log_values(logs, species: tuple[str, ...] | None = None) -> StandardizedSample:
    """Standardize values already on the log scale (one exact value each).

    Applies the same centering and scaling as :func:`log_standardize` without
    round-tripping through the concentration scale; used by the simulation
    harness, which generates log-scale data directly.
    """
    x = np.asarray(logs, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values to standardize")
    m = float(np.mean(x))
    s = float(np.std(x, ddof=1))
    if s <= 0:
        raise ValueError("zero variance among values; cannot standardize")
    transform = LogTransform(mean=m, sd=s)
    values = tuple(CensoredValue.exact((xi - m) / s) for xi in x)
    return StandardizedSample(values=values, transform=transform, species=species)


def back_transform(sample: StandardizedSample) -> list[CensoredValue]:
    """Recover concentration-scale observations from a standardized sample."""
    return [v.map(sample.transform.inverse) for v in sample.values]
