"""Flight records: schema, CSV I/O, regime segmentation, feature wiring and
a synthetic generator with known ground truth.

CSV layout
----------
One header row holding every name in :data:`CSV_COLUMNS`, followed by one
``DC_<code>`` column per delay code (minutes; 0 or empty means the code was
not applied).  UTF-8, comma separated, ``.`` decimal point.  Floats are
written with ``repr`` so a write/read cycle is exact.

Synthetic ground truth
----------------------
:func:`generate_synthetic` draws, per record (``h`` = summed delay-code
minutes, 0 for non-disrupted flights; ``SHIFT`` = 600 minutes)::

    sched_turn        = 25 + 0.1 * ONBD_CT + 10 * route_originator_flag
    tactical_hold     = 0.4 * h
    ADJST_TURN_MINS   = sched_turn + tactical_hold
    ACTL_TURN_MINS    = ADJST_TURN_MINS + 0.05 * (ONBD_CT - 136)
                        + 0.25 * tactical_hold + N(0, noise_sigma_turn)
    cruise            = route_dist / 7.5
    airborne_hold     = 0.2 * h + Exp(mean 2)
    actl_enroute_mins = cruise + airborne_hold
    actl_block_mins   = 12 + 0.08 * shiftper_actl_PB + actl_enroute_mins
                        + 0.5 * airborne_hold + N(0, noise_sigma_block)
    sched_block       = 22 + 0.08 * shiftper_sched_PB + cruise
    arrival_delay     = (ACTL_TURN_MINS - sched_turn) + actl_block_mins - sched_block
    DOT_DELAY_MINS    = max(0, round(arrival_delay))   (whole minutes; 0 when non-disrupted)
    A0  = DOT_DELAY_MINS == 0
    A14 = DOT_DELAY_MINS <= 14

Shift percentages are minutes-on-duty over ``SHIFT`` times 100; the origin
crew has been on duty ``U(60, 360)`` minutes at scheduled pushback, the
destination crew an independent ``U(60, 360)`` at scheduled gate parking,
and the actual-time percentages shift by the departure/arrival delay.
Noise-free, both regression targets are linear in their phase's inputs.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InvariantViolation, RecordError, SchemaError

log = logging.getLogger(__name__)

DETERMINATE_FEATURES = (
    "doy",
    "orig_x_dir",
    "orig_y_dir",
    "orig_z_dir",
    "dest_x_dir",
    "dest_y_dir",
    "dest_z_dir",
    "ONBD_CT",
    "route_dist",
    "route_originator_flag",
)
PHASE_EPISTEMIC = {
    "tactical": ("ADJST_TURN_MINS",),
    "operational": ("shiftper_sched_PB", "shiftper_sched_GP", "DOT_DELAY_MINS"),
    "strategic": ("shiftper_actl_PB", "shiftper_actl_GP", "actl_enroute_mins"),
}
PHASE_TARGETS = {
    "tactical": ("ACTL_TURN_MINS",),
    "operational": ("A0", "A14"),
    "strategic": ("actl_block_mins",),
}
TARGET_COLUMNS = ("ACTL_TURN_MINS", "actl_block_mins", "A0", "A14")
INPUT_COLUMNS = DETERMINATE_FEATURES + tuple(c for p in PHASE_EPISTEMIC.values() for c in p)
CSV_COLUMNS = INPUT_COLUMNS + TARGET_COLUMNS
CODE_PREFIX = "DC_"

_INT_COLUMNS = {"doy", "ONBD_CT", "route_originator_flag", "A0", "A14"}
_NONNEG_COLUMNS = (
    "ADJST_TURN_MINS",
    "DOT_DELAY_MINS",
    "actl_enroute_mins",
    "ACTL_TURN_MINS",
    "actl_block_mins",
)


class FunctionalRole(str, enum.Enum):
    CUSTOMER_HOLD = "CustomerHold"
    DISPATCH_CSC = "DispatchCSC"
    FLIGHT_OPERATIONS = "FlightOperations"
    FUEL_MANAGEMENT = "FuelManagement"
    GROUND_OPERATIONS = "GroundOperations"
    INFLIGHT = "Inflight"
    MAINTENANCE = "Maintenance"
    NAS = "NAS"
    SECURITY = "Security"
    TECHNOLOGY = "Technology"
    WEATHER = "Weather"

    @property
    def display_name(self) -> str:
        return {
            "CustomerHold": "Customer Hold",
            "DispatchCSC": "Dispatch CSC",
            "FlightOperations": "Flight Operations",
            "FuelManagement": "Fuel Management",
            "GroundOperations": "Ground Operations",
        }.get(self.value, self.value)

    @classmethod
    def parse(cls, text) -> "FunctionalRole":
        if isinstance(text, cls):
            return text
        key = str(text).replace(" ", "").replace("_", "").lower()
        for role in cls:
            if role.value.lower() == key:
                return role
        raise DomainError(f"unknown functional role {text!r}")


# HD06 (ATC hold at origin for weather) is the only code pinned down by real
# data; the other families are placeholders and may be replaced wholesale.
DEFAULT_CODE_ROLES: dict[str, FunctionalRole] = {
    "CH01": FunctionalRole.CUSTOMER_HOLD,
    "CH02": FunctionalRole.CUSTOMER_HOLD,
    "DS01": FunctionalRole.DISPATCH_CSC,
    "DS02": FunctionalRole.DISPATCH_CSC,
    "FO01": FunctionalRole.FLIGHT_OPERATIONS,
    "FO02": FunctionalRole.FLIGHT_OPERATIONS,
    "FU01": FunctionalRole.FUEL_MANAGEMENT,
    "FU02": FunctionalRole.FUEL_MANAGEMENT,
    "GO01": FunctionalRole.GROUND_OPERATIONS,
    "GO02": FunctionalRole.GROUND_OPERATIONS,
    "IF01": FunctionalRole.INFLIGHT,
    "IF02": FunctionalRole.INFLIGHT,
    "MX01": FunctionalRole.MAINTENANCE,
    "MX02": FunctionalRole.MAINTENANCE,
    "NA01": FunctionalRole.NAS,
    "NA02": FunctionalRole.NAS,
    "SE01": FunctionalRole.SECURITY,
    "SE02": FunctionalRole.SECURITY,
    "TE01": FunctionalRole.TECHNOLOGY,
    "TE02": FunctionalRole.TECHNOLOGY,
    "HD06": FunctionalRole.WEATHER,
    "WX01": FunctionalRole.WEATHER,
}


def role_codes(role, code_roles: Mapping[str, FunctionalRole] = DEFAULT_CODE_ROLES) -> tuple[str, ...]:
    role = FunctionalRole.parse(role)
    return tuple(sorted(c for c, r in code_roles.items() if r is role))


@dataclass(frozen=True)
class FlightRecord:
    doy: int
    orig_x_dir: float
    orig_y_dir: float
    orig_z_dir: float
    dest_x_dir: float
    dest_y_dir: float
    dest_z_dir: float
    ONBD_CT: int
    route_dist: float
    route_originator_flag: int
    ADJST_TURN_MINS: float
    shiftper_sched_PB: float
    shiftper_sched_GP: float
    DOT_DELAY_MINS: float
    shiftper_actl_PB: float
    shiftper_actl_GP: float
    actl_enroute_mins: float
    ACTL_TURN_MINS: float | None = None
    actl_block_mins: float | None = None
    A0: int | None = None
    A14: int | None = None
    delay_codes: Mapping[str, float] = field(default_factory=dict)

    def value(self, name: str) -> float:
        if name.startswith(CODE_PREFIX):
            return float(self.delay_codes.get(name[len(CODE_PREFIX):], 0.0))
        v = getattr(self, name)
        if v is None:
            raise DomainError(f"record has no value for {name!r}")
        return float(v)

    @property
    def is_disrupted(self) -> bool:
        return bool(self.delay_codes) or self.DOT_DELAY_MINS != 0


_RECORD_FIELDS = tuple(f.name for f in fields(FlightRecord) if f.name != "delay_codes")


def validate_record(rec: FlightRecord, row=None) -> FlightRecord:
    """Raise :class:`InvariantViolation` if ``rec`` breaks a schema rule."""
    for name in _RECORD_FIELDS:
        v = getattr(rec, name)
        if v is None:
            if name in TARGET_COLUMNS:
                continue
            raise InvariantViolation("value is missing", row, name)
        if not math.isfinite(v):
            raise InvariantViolation(f"non-finite value {v!r}", row, name)
    for name in ("route_originator_flag", "A0", "A14"):
        v = getattr(rec, name)
        if v is not None and v not in (0, 1):
            raise InvariantViolation(f"binary flag must be 0 or 1, got {v!r}", row, name)
    if rec.A0 == 1 and rec.A14 == 0:
        raise InvariantViolation("A0 == 1 requires A14 == 1", row, "A14")
    if not 1 <= rec.doy <= 366:
        raise InvariantViolation(f"day of year {rec.doy} out of range", row, "doy")
    if rec.ONBD_CT < 0:
        raise InvariantViolation("passenger count must be non-negative", row, "ONBD_CT")
    if not rec.route_dist > 0:
        raise InvariantViolation("route distance must be positive", row, "route_dist")
    for name in _NONNEG_COLUMNS:
        v = getattr(rec, name)
        if v is not None and v < 0:
            raise InvariantViolation(f"duration must be non-negative, got {v!r}", row, name)
    for code, minutes in rec.delay_codes.items():
        if not (math.isfinite(minutes) and minutes > 0):
            raise InvariantViolation(f"delay minutes must be positive, got {minutes!r}", row, CODE_PREFIX + code)
    return rec


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_csv(records: Iterable[FlightRecord], path, codes: Sequence[str] | None = None) -> int:
    records = list(records)
    if codes is None:
        codes = sorted({c for r in records for c in r.delay_codes})
    header = list(CSV_COLUMNS) + [CODE_PREFIX + c for c in codes]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = ["" if getattr(r, c) is None else _fmt(getattr(r, c)) for c in CSV_COLUMNS]
            row += [_fmt(float(r.delay_codes[c])) if c in r.delay_codes else "0" for c in codes]
            w.writerow(row)
    return len(records)


def _parse_value(name: str, text: str, row: int):
    text = text.strip()
    try:
        if name in _INT_COLUMNS:
            return int(text)
        return float(text)
    except ValueError:
        raise RecordError(f"cannot parse {text!r} as a number", row, name) from None


def _parse_row(raw: dict, row: int, code_cols: Sequence[str], require_targets: bool) -> FlightRecord:
    kw = {}
    for name in CSV_COLUMNS:
        text = raw.get(name)
        if text is None or text.strip() == "":
            if name in TARGET_COLUMNS and not require_targets:
                kw[name] = None
                continue
            raise RecordError("value is missing", row, name)
        kw[name] = _parse_value(name, text, row)
    codes = {}
    for col in code_cols:
        text = (raw.get(col) or "").strip()
        if text == "":
            continue
        minutes = _parse_value(col, text, row)
        if minutes != 0:
            codes[col[len(CODE_PREFIX):]] = minutes
    return validate_record(FlightRecord(delay_codes=codes, **kw), row)


def load_csv(path, strict: bool = True, require_targets: bool = True, errors: list | None = None) -> list[FlightRecord]:
    """Read and validate a flight CSV.

    Row numbers in errors count the header as row 1.  In lenient mode bad
    rows are skipped; pass a list as ``errors`` to collect the exceptions.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            log.warning("%s is empty", path)
            return []
        required = CSV_COLUMNS if require_targets else INPUT_COLUMNS
        for name in required:
            if name not in header:
                raise SchemaError(name, os.fspath(path))
        code_cols = [h for h in header if h.startswith(CODE_PREFIX)]
        records, skipped = [], []
        for i, raw in enumerate(reader, start=2):
            try:
                records.append(_parse_row(raw, i, code_cols, require_targets))
            except RecordError as exc:
                if strict:
                    raise
                skipped.append(exc)
    if skipped:
        log.warning("%s: skipped %d invalid row(s), kept %d", path, len(skipped), len(records))
        if errors is not None:
            errors.extend(skipped)
    return records


# --------------------------------------------------------------------------
# segmentation and feature wiring
# --------------------------------------------------------------------------


@dataclass
class DatasetPartition:
    non_disrupted: list = field(default_factory=list)
    disrupted_by_role: dict = field(default_factory=dict)
    quarantine: list = field(default_factory=list)

    def disrupted(self, role) -> list:
        return self.disrupted_by_role.get(FunctionalRole.parse(role), [])

    def __len__(self):
        return len(self.non_disrupted) + sum(map(len, self.disrupted_by_role.values())) + len(self.quarantine)


def dominant_code(codes: Mapping[str, float]) -> str:
    """Largest-minutes code; ties go to the lexicographically smallest code."""
    return min(codes, key=lambda c: (-codes[c], c))


def segment(records: Iterable[FlightRecord], code_roles: Mapping[str, FunctionalRole] = DEFAULT_CODE_ROLES) -> DatasetPartition:
    """Split records into the non-disrupted set and per-role disrupted sets.

    Disrupted records whose dominant code has no owner, or that carry a delay
    without any code, go to ``quarantine``.
    """
    part = DatasetPartition(disrupted_by_role={r: [] for r in FunctionalRole})
    for rec in records:
        if not rec.delay_codes:
            if rec.DOT_DELAY_MINS == 0:
                part.non_disrupted.append(rec)
            else:
                part.quarantine.append(rec)
            continue
        role = code_roles.get(dominant_code(rec.delay_codes))
        if role is None:
            part.quarantine.append(rec)
        else:
            part.disrupted_by_role[FunctionalRole.parse(role)].append(rec)
    if part.quarantine:
        log.warning("%d disrupted record(s) quarantined (no role for their delay codes)", len(part.quarantine))
    return part


def feature_columns(phase: str, codes: Sequence[str] = ()) -> tuple[str, ...]:
    """Column order: determinate features, phase epistemic features, codes."""
    if phase not in PHASE_EPISTEMIC:
        raise DomainError(f"unknown phase {phase!r}; expected one of {sorted(PHASE_EPISTEMIC)}")
    if codes and phase != "operational":
        raise DomainError("delay-code columns feed the operational phase only")
    return DETERMINATE_FEATURES + PHASE_EPISTEMIC[phase] + tuple(CODE_PREFIX + c for c in codes)


def feature_matrix(records: Sequence[FlightRecord], phase: str, codes: Sequence[str] = ()) -> tuple[np.ndarray, tuple[str, ...]]:
    names = feature_columns(phase, codes)
    if len(records) == 0:
        raise DomainError("feature_matrix needs at least one record")
    X = np.array([[r.value(n) for n in names] for r in records], dtype=np.float64)
    return X, names


def target_vector(records: Sequence[FlightRecord], phase: str, target: str) -> np.ndarray:
    if phase not in PHASE_TARGETS:
        raise DomainError(f"unknown phase {phase!r}")
    if target not in PHASE_TARGETS[phase]:
        raise DomainError(f"target {target!r} is not predicted in the {phase} phase (allowed: {PHASE_TARGETS[phase]})")
    return np.array([r.value(target) for r in records], dtype=np.float64)


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

# (code, lat, lon) for a small point-to-point network
AIRPORTS = (
    ("ATL", 33.640, -84.427),
    ("AUS", 30.197, -97.666),
    ("BNA", 36.124, -86.678),
    ("BWI", 39.175, -76.668),
    ("DAL", 32.847, -96.852),
    ("DEN", 39.856, -104.674),
    ("HOU", 29.645, -95.279),
    ("LAS", 36.084, -115.154),
    ("LAX", 33.942, -118.408),
    ("MCO", 28.431, -81.308),
    ("MDW", 41.786, -87.752),
    ("MSY", 29.993, -90.258),
    ("OAK", 37.721, -122.221),
    ("PHX", 33.435, -112.008),
    ("SAN", 32.734, -117.190),
    ("SAT", 29.534, -98.470),
    ("SEA", 47.450, -122.309),
    ("SLC", 40.790, -111.979),
    ("STL", 38.749, -90.370),
    ("TPA", 27.975, -82.533),
)
EARTH_RADIUS_MI = 3958.8
SHIFT_MINS = 600.0


@dataclass(frozen=True)
class SyntheticConfig:
    n_records: int = 20000
    seed: int = 7
    disruption_fraction: float = 0.3
    noise_sigma_turn: float = 3.0
    noise_sigma_block: float = 4.0
    roles: tuple = tuple(r.value for r in FunctionalRole)

    def __post_init__(self):
        if self.n_records < 0:
            raise DomainError("n_records must be non-negative")
        if not 0 <= self.disruption_fraction < 1:
            raise DomainError("disruption_fraction must lie in [0, 1)")
        if self.noise_sigma_turn < 0 or self.noise_sigma_block < 0:
            raise DomainError("noise sigmas must be non-negative")
        object.__setattr__(self, "roles", tuple(FunctionalRole.parse(r).value for r in self.roles))
        if not self.roles:
            raise DomainError("at least one role is required")

    @property
    def n_disrupted(self) -> int:
        return int(math.floor(self.disruption_fraction * self.n_records + 0.5))


def _unit_vectors():
    lat = np.radians([a[1] for a in AIRPORTS])
    lon = np.radians([a[2] for a in AIRPORTS])
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)


def generate_synthetic(cfg: SyntheticConfig, code_roles: Mapping[str, FunctionalRole] = DEFAULT_CODE_ROLES) -> list[FlightRecord]:
    """Seeded synthetic flights following the module-level ground truth.

    Exactly ``round(disruption_fraction * n_records)`` records are disrupted,
    their primary role drawn uniformly from ``cfg.roles``.
    """
    n = cfg.n_records
    rng = np.random.default_rng(cfg.seed)
    xyz = _unit_vectors()
    n_air = len(AIRPORTS)
    all_codes = sorted(code_roles)
    families = {r: role_codes(r, code_roles) for r in cfg.roles}
    for r, fam in families.items():
        if not fam:
            raise DomainError(f"no delay codes mapped to role {r}")

    disrupted = np.zeros(n, dtype=bool)
    disrupted[rng.permutation(n)[: cfg.n_disrupted]] = True

    doy = rng.integers(1, 366, size=n)
    orig = rng.integers(0, n_air, size=n)
    dest = (orig + rng.integers(1, n_air, size=n)) % n_air
    onbd = rng.binomial(175, 0.78, size=n)
    flag = (rng.random(n) < 0.2).astype(int)
    origin_duty = rng.uniform(60.0, 360.0, size=n)
    dest_duty = rng.uniform(60.0, 360.0, size=n)
    turn_noise = rng.normal(0.0, 1.0, size=n) * cfg.noise_sigma_turn
    block_noise = rng.normal(0.0, 1.0, size=n) * cfg.noise_sigma_block
    airborne_base = rng.exponential(2.0, size=n)

    codes: list[dict] = [{} for _ in range(n)]
    for i in np.nonzero(disrupted)[0]:
        role = cfg.roles[rng.integers(len(cfg.roles))]
        fam = families[role]
        primary = fam[rng.integers(len(fam))]
        minutes = 5.0 + rng.exponential(25.0)
        codes[i][primary] = minutes
        if rng.random() < 0.25:
            others = [c for c in all_codes if c != primary]
            second = others[rng.integers(len(others))]
            codes[i][second] = minutes * rng.uniform(0.1, 0.9)
    hold = np.array([sum(c.values()) for c in codes])

    cos_angle = np.clip(np.einsum("ij,ij->i", xyz[orig], xyz[dest]), -1.0, 1.0)
    route_dist = EARTH_RADIUS_MI * np.arccos(cos_angle)

    sched_turn = 25.0 + 0.1 * onbd + 10.0 * flag
    tactical_hold = 0.4 * hold
    adjst = sched_turn + tactical_hold
    actl_turn = np.maximum(adjst + 0.05 * (onbd - 136) + 0.25 * tactical_hold + turn_noise, 0.0)
    dep_delay = actl_turn - sched_turn

    cruise = route_dist / 7.5
    airborne_hold = 0.2 * hold + airborne_base
    enroute = cruise + airborne_hold
    pb_sched = 100.0 * origin_duty / SHIFT_MINS
    pb_actl = 100.0 * (origin_duty + dep_delay) / SHIFT_MINS
    block = np.maximum(12.0 + 0.08 * pb_actl + enroute + 0.5 * airborne_hold + block_noise, 0.0)
    sched_block = 22.0 + 0.08 * pb_sched + cruise
    arrival_delay = dep_delay + block - sched_block
    gp_sched = 100.0 * dest_duty / SHIFT_MINS
    gp_actl = 100.0 * (dest_duty + arrival_delay) / SHIFT_MINS
    dot = np.where(disrupted, np.maximum(np.round(arrival_delay), 0.0), 0.0)
    a0 = (dot == 0).astype(int)
    a14 = (dot <= 14.0).astype(int)

    out = []
    for i in range(n):
        out.append(
            FlightRecord(
                doy=int(doy[i]),
                orig_x_dir=float(xyz[orig[i], 0]),
                orig_y_dir=float(xyz[orig[i], 1]),
                orig_z_dir=float(xyz[orig[i], 2]),
                dest_x_dir=float(xyz[dest[i], 0]),
                dest_y_dir=float(xyz[dest[i], 1]),
                dest_z_dir=float(xyz[dest[i], 2]),
                ONBD_CT=int(onbd[i]),
                route_dist=float(route_dist[i]),
                route_originator_flag=int(flag[i]),
                ADJST_TURN_MINS=float(adjst[i]),
                shiftper_sched_PB=float(pb_sched[i]),
                shiftper_sched_GP=float(gp_sched[i]),
                DOT_DELAY_MINS=float(dot[i]),
                shiftper_actl_PB=float(pb_actl[i]),
                shiftper_actl_GP=float(gp_actl[i]),
                actl_enroute_mins=float(enroute[i]),
                ACTL_TURN_MINS=float(actl_turn[i]),
                actl_block_mins=float(block[i]),
                A0=int(a0[i]),
                A14=int(a14[i]),
                delay_codes={k: float(v) for k, v in sorted(codes[i].items())},
            )
        )
    return out
