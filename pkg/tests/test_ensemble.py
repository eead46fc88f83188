import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import constant_bundle
from ptfm.ensemble import (
    REPORT_COLUMNS,
    SLOTS,
    EnsembleBundle,
    classify_ontime,
    estimate,
    estimate_many,
    evaluate_bundle,
    fuse,
    load_bundle,
    save_bundle,
    select_rule,
    train_ensemble,
)
from ptfm.errors import ComponentError, DomainError, ModelLoadError
from ptfm.flight_data import DatasetPartition, FunctionalRole, SyntheticConfig, feature_columns, feature_matrix, generate_synthetic, segment, target_vector
from ptfm.nn_core import ActivationKind, PerceptronNet
from ptfm.training import Standardizer, TrainConfig, TrainedModel, dumps_model, split_dataset

COMPONENTS = dict(turn_nd=30.03, turn_d=38.37, block_nd=92.02, block_d=93.61)
finite = st.floats(-500, 500, allow_nan=False)


class TestSelectRule:
    def test_all_late_uses_disrupted(self):
        assert select_rule(0, **COMPONENTS) == (38.37, 93.61)

    def test_all_on_time_uses_non_disrupted(self):
        assert select_rule(2, **COMPONENTS) == (30.03, 92.02)

    def test_mixed_uses_mean(self):
        turn, block = select_rule(1, **COMPONENTS)
        assert turn == pytest.approx(34.20, abs=1e-12)
        assert block == pytest.approx(92.815, abs=1e-12)

    @pytest.mark.parametrize("s", [-1, 3, 1.5])
    def test_out_of_range(self, s):
        with pytest.raises(DomainError):
            select_rule(s, **COMPONENTS)

    @given(finite, finite, finite, finite)
    def test_delays_invariant_to_s(self, tn, td, bn, bd):
        ests = [fuse(a0, a14, tn, td, bn, bd) for a0, a14 in ((0, 0), (0, 1), (1, 1))]
        assert len({(e.tactical_delay_est, e.strategic_delay_est) for e in ests}) == 1
        assert ests[0].tactical_delay_est == td - tn

    @given(finite, finite, finite, finite, st.integers(0, 2))
    def test_estimate_between_components(self, tn, td, bn, bd, s):
        turn, block = select_rule(s, tn, td, bn, bd)
        assert min(tn, td) <= turn <= max(tn, td)
        assert min(bn, bd) <= block <= max(bn, bd)


class TestEstimate:
    @pytest.fixture
    def record(self, weather_records):
        return weather_records[0]

    def test_late_flight(self, record):
        bundle = constant_bundle(30.03, 38.37, 92.02, 93.61, -4.0, -4.0)
        est = estimate(bundle, record)
        assert (est.a0_pred, est.a14_pred, est.s) == (0, 0, 0)
        assert est.turnaround_est == 38.37 and est.block_est == 93.61
        assert abs(est.tactical_delay_est - 8.34) < 1e-9
        assert abs(est.strategic_delay_est - 1.59) < 1e-9

    def test_on_time_flight(self, record):
        est = estimate(constant_bundle(30.03, 38.37, 92.02, 93.61, 3.0, 3.0), record)
        assert est.s == 2 and est.turnaround_est == 30.03 and est.block_est == 92.02

    def test_threshold_tie_is_on_time(self, record):
        a0, a14, p0, p14 = classify_ontime(constant_bundle(0, 0, 0, 0, 0.0, -1.0), record)
        assert (a0, a14) == (1, 0)
        assert p0 == 0.5 and p14 < 0.5

    def test_many_matches_single(self, weather_records):
        bundle = constant_bundle(1, 2, 3, 4, 1.0, -1.0)
        recs = weather_records[:5]
        assert estimate_many(bundle, recs) == [estimate(bundle, r) for r in recs]
        assert estimate_many(bundle, []) == []

    def test_wrong_feature_width_names_component(self, record):
        bundle = constant_bundle(1, 2, 3, 4, 1.0, -1.0)
        bad = dataclasses.replace(bundle, codes=())
        with pytest.raises(ComponentError, match="op_a0"):
            estimate(bad, record)


def _linear_model(X, y, phase):
    """Identity-hidden net reproducing the least-squares fit of ``y`` on ``X``."""
    A = np.c_[X, np.ones(len(X))]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    net = PerceptronNet(coef[None, :-1], [0.0], [[1.0]], [coef[-1]], ActivationKind.IDENTITY)
    n = X.shape[1]
    return TrainedModel(net, Standardizer(np.zeros(n), np.ones(n)), np.array([0.0]), phase=phase, n_train=len(X))


def _dot_classifier(names, cut, phase):
    n = len(names)
    w = np.zeros((1, n))
    w[0, names.index("DOT_DELAY_MINS")] = -1.0
    net = PerceptronNet(w, [0.0], [[1.0]], [cut], ActivationKind.IDENTITY)
    return TrainedModel(net, Standardizer(np.zeros(n), np.ones(n)), np.array([0.0]), phase=phase)


@pytest.fixture(scope="module")
def noiseless_partition():
    cfg = SyntheticConfig(n_records=800, seed=21, disruption_fraction=0.5, noise_sigma_turn=0, noise_sigma_block=0, roles=("Weather",))
    return segment(generate_synthetic(cfg))


class TestEvaluate:
    def test_exact_models_score_perfectly(self, noiseless_partition):
        part = noiseless_partition
        regimes = {"non_disrupted": part.non_disrupted, "disrupted": part.disrupted("Weather")}
        codes = ("HD06", "WX01")
        op_names = list(feature_columns("operational", codes))
        models = {}
        for slot in SLOTS:
            recs = regimes[slot.regime]
            if slot.is_classifier:
                cut = 0.5 if slot.target == "A0" else 14.5
                models[slot.name] = _dot_classifier(op_names, cut, slot.model_phase)
            else:
                X, _ = feature_matrix(recs, slot.phase)
                models[slot.name] = _linear_model(X, target_vector(recs, slot.phase, slot.target), slot.phase)
        bundle = EnsembleBundle(role=FunctionalRole.WEATHER, codes=codes, **models)
        report = evaluate_bundle(bundle, part)
        for name in ("tactical_nd", "tactical_d", "strategic_nd", "strategic_d"):
            assert report.models[name].rmse < 0.1
        assert report.models["op_a0"].auc == 1.0
        assert report.models["op_a14"].auc == 1.0

    def test_uninformative_classifier(self, noiseless_partition):
        report = evaluate_bundle(constant_bundle(30, 40, 90, 95, 0.3, 0.3), noiseless_partition)
        assert report.models["op_a0"].auc == 0.5

    def test_report_layout(self, noiseless_partition):
        report = evaluate_bundle(constant_bundle(30, 40, 90, 95, 0.3, 0.3), noiseless_partition)
        assert tuple(report.row) == REPORT_COLUMNS
        assert report.row["Functional Role"] == "Weather"
        assert report.row["Test Data Samples"] == len(noiseless_partition.disrupted("Weather"))
        doc = report.to_dict()
        assert doc["columns"] == list(REPORT_COLUMNS)
        json.dumps(doc)
        assert report.to_text().splitlines()[0].startswith("Functional Role")

    def test_single_class_auc_undefined(self, noiseless_partition):
        part = noiseless_partition
        late = [r for r in part.disrupted("Weather") if r.A14 == 0]
        sub = DatasetPartition(part.non_disrupted, {FunctionalRole.WEATHER: late})
        report = evaluate_bundle(constant_bundle(30, 40, 90, 95, 0.3, 0.3), sub)
        assert not report.models["op_a0"].auc_defined
        assert "undefined" in report.to_text()

    def test_empty_regime_rejected(self, noiseless_partition):
        sub = DatasetPartition(noiseless_partition.non_disrupted, {})
        with pytest.raises(DomainError, match="disrupted"):
            evaluate_bundle(constant_bundle(1, 2, 3, 4, 0, 0), sub)


@pytest.fixture(scope="module")
def train_part(weather_records):
    part = segment(weather_records)
    return DatasetPartition(
        split_dataset(part.non_disrupted)[0],
        {FunctionalRole.WEATHER: split_dataset(part.disrupted("Weather"))[0]},
    )


class TestTrainEnsemble:
    CFG = TrainConfig(epochs=25, learning_rate=0.03)

    def test_six_models_with_metadata(self, train_part):
        bundle = train_ensemble(train_part, "Weather", self.CFG, split_seed=42)
        for slot in SLOTS:
            m = bundle.model(slot.name)
            assert m.regime == slot.regime and m.target_name == slot.target
            assert m.net.hidden_activation is slot.activation
            assert m.seeds == {"init": slot.seed_offset, "split": 42}
            assert len(m.loss_history) == 25
        assert bundle.op_a0.net.n_in == 13 + 2
        assert bundle.op_a0.n_train == len(train_part.disrupted("Weather"))

    def test_deterministic_and_parallel_equal(self, train_part):
        a = train_ensemble(train_part, "Weather", self.CFG)
        b = train_ensemble(train_part, "Weather", self.CFG)
        c = train_ensemble(train_part, "Weather", self.CFG, parallel=True)
        for slot in SLOTS:
            assert dumps_model(a.model(slot.name)) == dumps_model(b.model(slot.name)) == dumps_model(c.model(slot.name))

    def test_empty_role_fails_before_training(self, train_part, monkeypatch):
        import ptfm.ensemble as ens

        monkeypatch.setattr(ens, "fit_model", lambda *a, **k: pytest.fail("training started"))
        with pytest.raises(DomainError, match="Maintenance"):
            train_ensemble(train_part, "Maintenance", self.CFG)

    def test_component_failure_is_named(self, train_part, monkeypatch):
        import ptfm.ensemble as ens

        real = ens.fit_model

        def flaky(X, y, hidden, cfg, **meta):
            if meta["phase"] == "strategic" and meta["regime"] == "disrupted":
                raise FloatingPointError("boom")
            return real(X, y, hidden, cfg, **meta)

        monkeypatch.setattr(ens, "fit_model", flaky)
        with pytest.raises(ComponentError, match="strategic_d") as info:
            train_ensemble(train_part, "Weather", self.CFG)
        assert info.value.component == "strategic_d"

    def test_bundle_round_trip(self, train_part, weather_records, tmp_path):
        bundle = train_ensemble(train_part, "Weather", self.CFG)
        manifest = save_bundle(bundle, tmp_path / "b")
        assert set(manifest["models"]) == {s.name for s in SLOTS}
        loaded = load_bundle(tmp_path / "b")
        assert loaded.role is FunctionalRole.WEATHER and loaded.codes == bundle.codes
        recs = weather_records[:20]
        assert estimate_many(loaded, recs) == estimate_many(bundle, recs)

    def test_tampered_bundle(self, train_part, tmp_path):
        save_bundle(train_ensemble(train_part, "Weather", TrainConfig(epochs=2)), tmp_path)
        with open(tmp_path / "op_a14.json", "a") as fh:
            fh.write(" ")
        with pytest.raises(ModelLoadError, match="op_a14"):
            load_bundle(tmp_path)
        with pytest.raises(ModelLoadError):
            load_bundle(tmp_path / "nowhere")
