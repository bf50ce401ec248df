import numpy as np
import pytest

from oql.core import (
    Measurement,
    ValidationError,
    expectation,
    is_density,
    random_measurement,
    random_state,
)
from oql.learners import (
    FTLLearner,
    FixedLearner,
    KnownStateLearner,
    LossKind,
    MMWLearner,
    baseline_ftl,
    loss_subgradient_scale,
    loss_value,
    mmw_init,
    mmw_predict,
    mmw_update,
)


def test_loss_values():
    assert loss_value(LossKind.L1, 0.7, 0.2) == pytest.approx(0.5)
    assert loss_value(LossKind.L2, 0.7, 0.2) == pytest.approx(0.25)
    assert loss_subgradient_scale(LossKind.L1, 0.3, 0.3) == 0.0
    assert loss_subgradient_scale(LossKind.L1, 0.1, 0.6) == -1.0
    assert loss_subgradient_scale(LossKind.L2, 0.7, 0.2) == pytest.approx(1.0)


def test_loss_kind_parse():
    assert LossKind.parse("L2") is LossKind.L2
    with pytest.raises(ValidationError):
        LossKind.parse("huber")


def test_initial_hypothesis_maximally_mixed():
    state = mmw_init(4, 0.3)
    assert np.allclose(mmw_predict(state).entries, np.eye(4) / 4)


def test_zero_eta_stays_mixed():
    state = mmw_init(2, 0.0)
    e = Measurement.basis_projector(2, 0)
    for _ in range(5):
        state = mmw_update(state, e, 1.0, LossKind.L2)
        assert np.allclose(mmw_predict(state).entries, np.eye(2) / 2)


def test_negative_eta_rejected():
    with pytest.raises(ValidationError):
        mmw_init(2, -0.1)


def test_dim_mismatch_rejected():
    with pytest.raises(ValidationError):
        mmw_update(mmw_init(2, 0.5), Measurement.basis_projector(4, 0), 1.0, LossKind.L1)


def test_prediction_chases_label():
    state = mmw_init(2, 0.5)
    e = Measurement.basis_projector(2, 0)
    prev = -1.0
    for _ in range(30):
        p = expectation(e, mmw_predict(state))
        assert p > prev
        prev = p
        state = mmw_update(state, e, 1.0, LossKind.L2)
    assert prev > 0.95


def test_predictions_always_valid_states():
    # ~10^4 update events across the (eta, N) sweep
    for eta in (0.01, 0.1, 1.0):
        for n in (2, 4, 8):
            state = mmw_init(n, eta)
            rng_seed = hash((eta, n)) % (1 << 31)
            for i in range(380):
                e = random_measurement(n, rng_seed, stream=i)
                y = (i * 0.37) % 1.0
                state = mmw_update(state, e, y, LossKind.L1 if i % 2 else LossKind.L2)
                assert is_density(mmw_predict(state).entries).passed


def test_unitary_covariance():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, _ = np.linalg.qr(g)
    rho = random_state("mixed", 4, 3)
    meas = [random_measurement(4, 10, stream=i) for i in range(25)]
    labels = [expectation(e, rho) for e in meas]

    def run(ms):
        state = mmw_init(4, 0.3)
        preds = []
        for e, y in zip(ms, labels):
            preds.append(expectation(e, mmw_predict(state)))
            state = mmw_update(state, e, y, LossKind.L1)
        return np.array(preds)

    rotated = [Measurement(q @ e.entries @ q.conj().T) for e in meas]
    assert np.abs(run(meas) - run(rotated)).max() <= 1e-8


def test_anytime_eta_schedule():
    state = mmw_init(4, None)
    assert state.current_eta() == pytest.approx(np.sqrt(np.log(4)))
    state = mmw_update(state, Measurement.basis_projector(4, 0), 1.0, LossKind.L2)
    assert state.current_eta() == pytest.approx(np.sqrt(np.log(4) / 2))


def test_baseline_ftl_empty_history():
    assert np.allclose(baseline_ftl([], 4, LossKind.L1).entries, np.eye(4) / 4)


def test_baseline_ftl_fits_single_round():
    e = Measurement.basis_projector(2, 0)
    state = baseline_ftl([(e, 1.0)], 2, LossKind.L1)
    assert expectation(e, state) == pytest.approx(1.0, abs=1e-6)


def test_baseline_ftl_moves_toward_label():
    e = random_measurement(2, 6)
    state0 = mmw_init(2, 0.4)
    p0 = expectation(e, mmw_predict(state0))
    y = 1.0 if p0 < 0.5 else 0.0
    mmw_dir = expectation(e, mmw_predict(mmw_update(state0, e, y, LossKind.L2))) - p0
    ftl_dir = expectation(e, baseline_ftl([(e, y)], 2, LossKind.L1)) - p0
    assert np.sign(mmw_dir) == np.sign(ftl_dir)


def test_learner_adapters():
    for learner in (MMWLearner(0.2), FTLLearner(), FixedLearner()):
        learner.begin(2, horizon=10)
        assert np.allclose(learner.hypothesis().entries, np.eye(2) / 2)
        learner.observe(Measurement.basis_projector(2, 0), 1.0, LossKind.L2)
        assert is_density(learner.hypothesis().entries).passed

    rho = random_state("pure", 2, 1)
    known = KnownStateLearner(rho)
    known.begin(2)
    assert known.hypothesis() is rho
    with pytest.raises(ValidationError):
        known.begin(4)
