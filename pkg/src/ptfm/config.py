"""Run configuration read from a TOML file.

Example::

    [data]
    csv = "flights.csv"          # omit to generate data from [synthetic]

    [synthetic]
    n_records = 20000
    seed = 7
    disruption_fraction = 0.3
    noise_sigma_turn = 3.0
    noise_sigma_block = 4.0
    roles = ["Weather"]

    [run]
    role = "Weather"
    output_dir = "runs/weather"
    report_formats = ["json", "text"]
    plots = true

    [split]
    train_fraction = 0.7
    seed = 42

    [train]
    epochs = 15000
    seed = 0
    learning_rate = 0.01
    optimizer = "adam"           # or "delta"
    huber_delta = 1.0
    plateau_window = 500

Relative paths are resolved against the directory holding the config file.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields

from .errors import DomainError
from .flight_data import FunctionalRole, SyntheticConfig
from .nn_core import LossKind
from .training import SplitSpec, TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REPORT_FORMATS = ("json", "text")


@dataclass(frozen=True)
class RunConfig:
    data_csv: str | None = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    role: FunctionalRole = FunctionalRole.WEATHER
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "ptfm-run"
    report_formats: tuple = REPORT_FORMATS
    plots: bool = True

    def to_toml(self) -> str:
        syn = self.synthetic
        t = self.train
        lines = []
        if self.data_csv is not None:
            lines += ["[data]", f"csv = {_q(self.data_csv)}", ""]
        lines += [
            "[synthetic]",
            f"n_records = {syn.n_records}",
            f"seed = {syn.seed}",
            f"disruption_fraction = {syn.disruption_fraction!r}",
            f"noise_sigma_turn = {syn.noise_sigma_turn!r}",
            f"noise_sigma_block = {syn.noise_sigma_block!r}",
            f"roles = [{', '.join(_q(r) for r in syn.roles)}]",
            "",
            "[run]",
            f"role = {_q(self.role.value)}",
            f"output_dir = {_q(self.output_dir)}",
            f"report_formats = [{', '.join(_q(f) for f in self.report_formats)}]",
            f"plots = {'true' if self.plots else 'false'}",
            "",
            "[split]",
            f"train_fraction = {self.split.train_fraction!r}",
            f"seed = {self.split.seed}",
            "",
            "[train]",
            f"epochs = {t.epochs}",
            f"seed = {t.seed}",
            f"learning_rate = {t.learning_rate!r}",
            f"optimizer = {_q(t.optimizer)}",
            f"huber_delta = {t.loss.huber_delta!r}",
            f"beta1 = {t.beta1!r}",
            f"beta2 = {t.beta2!r}",
            f"epsilon = {t.epsilon!r}",
            f"plateau_window = {t.plateau_window}",
        ]
        return "\n".join(lines) + "\n"


def _q(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


_SECTIONS = {"data", "synthetic", "run", "split", "train"}


def _check_keys(section: str, table: dict, allowed) -> None:
    unknown = set(table) - set(allowed)
    if unknown:
        raise DomainError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def from_dict(doc: dict, base_dir: str = ".") -> RunConfig:
    unknown = set(doc) - _SECTIONS
    if unknown:
        raise DomainError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    def path(p):
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    data = doc.get("data", {})
    _check_keys("data", data, {"csv"})
    syn = doc.get("synthetic", {})
    _check_keys("synthetic", syn, {f.name for f in fields(SyntheticConfig)})
    if "roles" in syn:
        syn = dict(syn, roles=tuple(syn["roles"]))
    run = doc.get("run", {})
    _check_keys("run", run, {"role", "output_dir", "report_formats", "plots"})
    split = doc.get("split", {})
    _check_keys("split", split, {"train_fraction", "seed"})
    train = dict(doc.get("train", {}))
    _check_keys(
        "train",
        train,
        {"epochs", "seed", "learning_rate", "optimizer", "huber_delta", "beta1", "beta2", "epsilon", "plateau_window"},
    )
    delta = train.pop("huber_delta", 1.0)
    formats = tuple(run.get("report_formats", REPORT_FORMATS))
    bad = set(formats) - set(REPORT_FORMATS)
    if bad:
        raise DomainError(f"unknown report format(s): {', '.join(sorted(bad))}")
    try:
        return RunConfig(
            data_csv=path(data["csv"]) if "csv" in data else None,
            synthetic=SyntheticConfig(**syn),
            role=FunctionalRole.parse(run.get("role", "Weather")),
            split=SplitSpec(**split),
            train=TrainConfig(loss=LossKind.huber(delta), **train),
            output_dir=path(run.get("output_dir", "ptfm-run")),
            report_formats=formats,
            plots=bool(run.get("plots", True)),
        )
    except TypeError as exc:
        raise DomainError(f"bad config value: {exc}") from exc


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DomainError(f"{path}: {exc}") from exc
    return from_dict(doc, os.path.dirname(os.path.abspath(path)))
