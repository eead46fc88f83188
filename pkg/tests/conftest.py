import numpy as np
import pytest

from ptfm.ensemble import EnsembleBundle
from ptfm.flight_data import FunctionalRole, SyntheticConfig, feature_columns, generate_synthetic
from ptfm.nn_core import ActivationKind, PerceptronNet
from ptfm.training import Standardizer, TrainedModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_net(rng, n_in, n_hidden, n_out, hidden=ActivationKind.SIGMOID, scale=1.0):
    return PerceptronNet(
        rng.normal(0, scale, (n_hidden, n_in)),
        rng.normal(0, scale, n_hidden),
        rng.normal(0, scale, (n_out, n_hidden)),
        rng.normal(0, scale, n_out),
        hidden,
    )


@pytest.fixture(scope="session")
def weather_records():
    cfg = SyntheticConfig(n_records=1200, seed=11, disruption_fraction=0.5, roles=("Weather",))
    return generate_synthetic(cfg)


def constant_model(value, n_in, phase="tactical", hidden=ActivationKind.LOG_SIGMOID):
    """Model whose linear output is ``value`` for every input."""
    net = PerceptronNet(np.zeros((1, n_in)), np.zeros(1), np.zeros((1, 1)), np.array([float(value)]), hidden)
    std = Standardizer(np.zeros(n_in), np.ones(n_in))
    return TrainedModel(net, std, np.array([0.0]), phase=phase)


def constant_bundle(turn_nd, turn_d, block_nd, block_d, logit_a0, logit_a14, codes=("HD06", "WX01")):
    n_op = len(feature_columns("operational", codes))
    return EnsembleBundle(
        tactical_nd=constant_model(turn_nd, 11),
        tactical_d=constant_model(turn_d, 11),
        strategic_nd=constant_model(block_nd, 13, "strategic"),
        strategic_d=constant_model(block_d, 13, "strategic"),
        op_a0=constant_model(logit_a0, n_op, "operational_a0", ActivationKind.SOFTPLUS),
        op_a14=constant_model(logit_a14, n_op, "operational_a14", ActivationKind.SOFTPLUS),
        role=FunctionalRole.WEATHER,
        codes=tuple(codes),
    )


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
