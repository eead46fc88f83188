"""Six-network ensemble and the A0+A14 selection rule.

Each functional role gets two turnaround regressors (non-disrupted and
disrupted regimes), two block-time regressors, and two on-time classifiers
trained on disrupted flights only.  At inference the classifiers' binary
outputs are summed and the sum picks which regime's regression outputs are
reported:

====  ==============================  ==============================
 s     turnaround                      block time
====  ==============================  ==============================
 0     disrupted                       disrupted
 1     mean of both regimes            mean of both regimes
 2     non-disrupted                   non-disrupted
====  ==============================  ==============================

Delays are always ``disrupted - non-disrupted`` and do not depend on ``s``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ComponentError, DomainError, ModelLoadError, FormatVersionError
from .flight_data import (
    DEFAULT_CODE_ROLES,
    DatasetPartition,
    FlightRecord,
    FunctionalRole,
    feature_matrix,
    role_codes,
    target_vector,
)
from .metrics import RocCurve, auc, rmse, roc_curve
from .nn_core import ActivationKind, LossKind
from .training import TrainConfig, TrainedModel, fit_model, load_model, save_model

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "ptfm-bundle/1"
CLASSIFY_THRESHOLD = 0.5


@dataclass(frozen=True)
class Slot:
    name: str
    phase: str  # feature phase: tactical / operational / strategic
    model_phase: str  # phase tag stored on the TrainedModel
    regime: str
    target: str
    activation: ActivationKind
    seed_offset: int

    @property
    def is_classifier(self) -> bool:
        return self.phase == "operational"


SLOTS = (
    Slot("tactical_nd", "tactical", "tactical", "non_disrupted", "ACTL_TURN_MINS", ActivationKind.LOG_SIGMOID, 0),
    Slot("tactical_d", "tactical", "tactical", "disrupted", "ACTL_TURN_MINS", ActivationKind.LOG_SIGMOID, 1),
    Slot("strategic_nd", "strategic", "strategic", "non_disrupted", "actl_block_mins", ActivationKind.LOG_SIGMOID, 2),
    Slot("strategic_d", "strategic", "strategic", "disrupted", "actl_block_mins", ActivationKind.LOG_SIGMOID, 3),
    Slot("op_a0", "operational", "operational_a0", "disrupted", "A0", ActivationKind.SOFTPLUS, 4),
    Slot("op_a14", "operational", "operational_a14", "disrupted", "A14", ActivationKind.SOFTPLUS, 5),
)
SLOT_BY_NAME = {s.name: s for s in SLOTS}


@dataclass(frozen=True)
class EnsembleBundle:
    tactical_nd: TrainedModel
    tactical_d: TrainedModel
    strategic_nd: TrainedModel
    strategic_d: TrainedModel
    op_a0: TrainedModel
    op_a14: TrainedModel
    role: FunctionalRole
    codes: tuple = ()

    def model(self, slot: str) -> TrainedModel:
        return getattr(self, slot)

    def models(self) -> dict[str, TrainedModel]:
        return {s.name: self.model(s.name) for s in SLOTS}


@dataclass(frozen=True)
class PtfmEstimate:
    a0_pred: int
    a14_pred: int
    s: int
    p_a0: float
    p_a14: float
    turnaround_nd: float
    turnaround_d: float
    block_nd: float
    block_d: float
    turnaround_est: float
    block_est: float
    tactical_delay_est: float
    strategic_delay_est: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in ESTIMATE_COLUMNS}


ESTIMATE_COLUMNS = (
    "a0_pred",
    "a14_pred",
    "s",
    "p_a0",
    "p_a14",
    "turnaround_nd",
    "turnaround_d",
    "block_nd",
    "block_d",
    "turnaround_est",
    "block_est",
    "tactical_delay_est",
    "strategic_delay_est",
)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def _slot_config(slot: Slot, cfg: TrainConfig) -> TrainConfig:
    if slot.is_classifier:
        loss = LossKind.bce()
    else:
        delta = cfg.loss.huber_delta if cfg.loss.tag == "huber" else 1.0
        loss = LossKind.huber(delta)
    return replace(cfg, loss=loss, seed=cfg.seed + slot.seed_offset)


def _slot_problem(slot: Slot, records: Sequence[FlightRecord], codes: Sequence[str]):
    X, names = feature_matrix(records, slot.phase, codes if slot.is_classifier else ())
    y = target_vector(records, slot.phase, slot.target)
    return X, y, names


def train_ensemble(
    partition: DatasetPartition,
    role,
    cfg: TrainConfig,
    parallel: bool = False,
    code_roles: Mapping[str, FunctionalRole] = DEFAULT_CODE_ROLES,
    split_seed: int | None = None,
) -> EnsembleBundle:
    """Train all six members for ``role`` on an already-split training set."""
    role = FunctionalRole.parse(role)
    regimes = {"non_disrupted": partition.non_disrupted, "disrupted": partition.disrupted(role)}
    for name, recs in regimes.items():
        if len(recs) < 2:
            raise DomainError(f"{name} training set for role {role.value} has {len(recs)} record(s); need at least 2")
    codes = role_codes(role, code_roles)

    def fit(slot: Slot) -> TrainedModel:
        X, y, names = _slot_problem(slot, regimes[slot.regime], codes)
        scfg = _slot_config(slot, cfg)
        seeds = {"init": scfg.seed}
        if split_seed is not None:
            seeds["split"] = split_seed
        log.info("training %s on %d rows (%d features)", slot.name, X.shape[0], X.shape[1])
        try:
            return fit_model(
                X,
                y,
                slot.activation,
                scfg,
                phase=slot.model_phase,
                regime=slot.regime,
                role=role.value,
                feature_names=names,
                target_name=slot.target,
                seeds=seeds,
            )
        except Exception as exc:
            raise ComponentError(slot.name, exc) from exc

    if parallel:
        with ThreadPoolExecutor(max_workers=len(SLOTS)) as pool:
            fitted = list(pool.map(fit, SLOTS))
    else:
        fitted = [fit(s) for s in SLOTS]
    return EnsembleBundle(role=role, codes=codes, **{s.name: m for s, m in zip(SLOTS, fitted)})


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------


def select_rule(s: int, turn_nd: float, turn_d: float, block_nd: float, block_d: float) -> tuple[float, float]:
    if s == 0:
        return turn_d, block_d
    if s == 1:
        return (turn_nd + turn_d) / 2.0, (block_nd + block_d) / 2.0
    if s == 2:
        return turn_nd, block_nd
    raise DomainError(f"A0 + A14 must be 0, 1 or 2, got {s!r}")


def fuse(a0: int, a14: int, turn_nd, turn_d, block_nd, block_d, p_a0=math.nan, p_a14=math.nan) -> PtfmEstimate:
    s = int(a0) + int(a14)
    turn, block = select_rule(s, turn_nd, turn_d, block_nd, block_d)
    return PtfmEstimate(
        a0_pred=int(a0),
        a14_pred=int(a14),
        s=s,
        p_a0=float(p_a0),
        p_a14=float(p_a14),
        turnaround_nd=float(turn_nd),
        turnaround_d=float(turn_d),
        block_nd=float(block_nd),
        block_d=float(block_d),
        turnaround_est=float(turn),
        block_est=float(block),
        tactical_delay_est=float(turn_d - turn_nd),
        strategic_delay_est=float(block_d - block_nd),
    )


def _component(bundle: EnsembleBundle, slot_name: str, records: Sequence[FlightRecord]) -> np.ndarray:
    slot = SLOT_BY_NAME[slot_name]
    model = bundle.model(slot_name)
    try:
        X, _ = feature_matrix(records, slot.phase, bundle.codes if slot.is_classifier else ())
        return model.predict(X)[:, 0]
    except Exception as exc:
        raise ComponentError(slot_name, exc) from exc


def classify_ontime(bundle: EnsembleBundle, record: FlightRecord) -> tuple[int, int, float, float]:
    p0 = float(_component(bundle, "op_a0", [record])[0])
    p14 = float(_component(bundle, "op_a14", [record])[0])
    return int(p0 >= CLASSIFY_THRESHOLD), int(p14 >= CLASSIFY_THRESHOLD), p0, p14


def estimate_many(bundle: EnsembleBundle, records: Sequence[FlightRecord]) -> list[PtfmEstimate]:
    if len(records) == 0:
        return []
    comp = {s.name: _component(bundle, s.name, records) for s in SLOTS}
    out = []
    for i in range(len(records)):
        p0, p14 = comp["op_a0"][i], comp["op_a14"][i]
        out.append(
            fuse(
                int(p0 >= CLASSIFY_THRESHOLD),
                int(p14 >= CLASSIFY_THRESHOLD),
                comp["tactical_nd"][i],
                comp["tactical_d"][i],
                comp["strategic_nd"][i],
                comp["strategic_d"][i],
                p0,
                p14,
            )
        )
    return out


def estimate(bundle: EnsembleBundle, record: FlightRecord) -> PtfmEstimate:
    return estimate_many(bundle, [record])[0]


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

REPORT_COLUMNS = (
    "Functional Role",
    "Training Data Samples",
    "Test Data Samples",
    "Block Time RMSE (mins)",
    "Turnaround RMSE (mins)",
    "A0 AUC",
    "A14 AUC",
)


@dataclass
class ModelEvaluation:
    slot: str
    n_train: int
    n_test: int
    rmse: float | None = None
    auc: float | None = None
    auc_defined: bool = True
    roc: RocCurve | None = None
    predicted: np.ndarray | None = None
    actual: np.ndarray | None = None

    def summary(self) -> dict:
        d = {"slot": self.slot, "n_train": self.n_train, "n_test": self.n_test}
        if self.rmse is not None:
            d["rmse"] = self.rmse
        if SLOT_BY_NAME[self.slot].is_classifier:
            d["auc"] = self.auc
            d["auc_defined"] = self.auc_defined
        return d


@dataclass
class EvaluationReport:
    role: FunctionalRole
    models: dict

    @property
    def row(self) -> dict:
        m = self.models
        return {
            "Functional Role": self.role.display_name,
            "Training Data Samples": m["op_a0"].n_train,
            "Test Data Samples": m["op_a0"].n_test,
            "Block Time RMSE (mins)": m["strategic_d"].rmse,
            "Turnaround RMSE (mins)": m["tactical_d"].rmse,
            "A0 AUC": m["op_a0"].auc,
            "A14 AUC": m["op_a14"].auc,
        }

    def to_dict(self) -> dict:
        return {
            "format_version": "ptfm-report/1",
            "role": self.role.value,
            "columns": list(REPORT_COLUMNS),
            "row": self.row,
            "models": {k: v.summary() for k, v in self.models.items()},
        }

    def to_text(self) -> str:
        row = self.row
        cells = []
        for col in REPORT_COLUMNS:
            v = row[col]
            if v is None:
                cells.append("undefined")
            elif col.endswith("AUC"):
                cells.append(f"{v:.4f}")
            elif "RMSE" in col:
                cells.append(f"{v:.2f}")
            elif isinstance(v, int):
                cells.append(f"{v:,}")
            else:
                cells.append(str(v))
        widths = [max(len(h), len(c)) for h, c in zip(REPORT_COLUMNS, cells)]
        line = "  ".join(h.ljust(w) for h, w in zip(REPORT_COLUMNS, widths))
        vals = "  ".join(c.ljust(w) for c, w in zip(cells, widths))
        detail = ["", "per-model:"]
        for name, ev in self.models.items():
            parts = [f"  {name:<13} train={ev.n_train:<7} test={ev.n_test:<7}"]
            if ev.rmse is not None:
                parts.append(f"rmse={ev.rmse:.3f}")
            if SLOT_BY_NAME[name].is_classifier:
                parts.append(f"auc={ev.auc:.4f}" if ev.auc_defined else "auc=undefined (single-class test set)")
            detail.append(" ".join(parts))
        return "\n".join([line.rstrip(), vals.rstrip()] + detail) + "\n"


def evaluate_bundle(bundle: EnsembleBundle, test_partition: DatasetPartition) -> EvaluationReport:
    """RMSE for the regressors and ROC/AUC for the classifiers on held-out data."""
    regimes = {
        "non_disrupted": test_partition.non_disrupted,
        "disrupted": test_partition.disrupted(bundle.role),
    }
    for name, recs in regimes.items():
        if not recs:
            raise DomainError(f"{name} test set for role {bundle.role.value} is empty")
    out = {}
    for slot in SLOTS:
        recs = regimes[slot.regime]
        model = bundle.model(slot.name)
        pred = _component(bundle, slot.name, recs)
        actual = target_vector(recs, slot.phase, slot.target)
        ev = ModelEvaluation(slot.name, model.n_train, len(recs), predicted=pred, actual=actual)
        if slot.is_classifier:
            if actual.min() == actual.max():
                log.warning("%s: test labels are all %d; AUC undefined", slot.name, int(actual[0]))
                ev.auc_defined = False
            else:
                ev.roc = roc_curve(pred, actual)
                ev.auc = auc(ev.roc)
        else:
            ev.rmse = rmse(pred, actual)
        out[slot.name] = ev
    return EvaluationReport(bundle.role, out)


# --------------------------------------------------------------------------
# bundle directory
# --------------------------------------------------------------------------


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_bundle(bundle: EnsembleBundle, directory) -> dict:
    """Write six model files plus ``manifest.json``; returns the manifest."""
    os.makedirs(directory, exist_ok=True)
    models = {}
    for slot in SLOTS:
        fname = f"{slot.name}.json"
        path = os.path.join(directory, fname)
        save_model(bundle.model(slot.name), path)
        models[slot.name] = {"file": fname, "sha256": _sha256(path)}
    manifest = {
        "format_version": BUNDLE_FORMAT,
        "role": bundle.role.value,
        "codes": list(bundle.codes),
        "models": models,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def load_bundle(directory) -> EnsembleBundle:
    path = os.path.join(directory, "manifest.json")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ModelLoadError(f"no manifest.json in {directory}") from None
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{path}: unreadable manifest ({exc})") from exc
    if manifest.get("format_version") != BUNDLE_FORMAT:
        raise FormatVersionError(
            f"unsupported bundle format {manifest.get('format_version')!r}; expected {BUNDLE_FORMAT!r}"
        )
    models = {}
    for slot in SLOTS:
        entry = manifest.get("models", {}).get(slot.name)
        if entry is None:
            raise ModelLoadError(f"manifest lists no model for {slot.name}")
        mpath = os.path.join(directory, entry["file"])
        if not os.path.exists(mpath):
            raise ModelLoadError(f"{slot.name}: missing model file {entry['file']}")
        if "sha256" in entry and _sha256(mpath) != entry["sha256"]:
            raise ModelLoadError(f"{slot.name}: {entry['file']} does not match its manifest hash")
        models[slot.name] = load_model(mpath)
    return EnsembleBundle(role=FunctionalRole.parse(manifest["role"]), codes=tuple(manifest.get("codes", ())), **models)
