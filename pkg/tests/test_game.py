import numpy as np
import pytest

from oql.core import (
    DensityMatrix,
    Measurement,
    ValidationError,
    expectation,
    generator,
    random_measurement,
    random_state,
)
from oql.game import (
    RealizableAdversary,
    SmoothAdversary,
    TreeAdversary,
    best_in_hindsight,
    mistakes,
    project_simplex,
    regret,
    run_game,
)
from oql.learners import (
    FixedLearner,
    FTLLearner,
    KnownStateLearner,
    LossKind,
    MMWLearner,
)
from oql.trees import (
    build_general_tree,
    build_halving_tree,
    build_pure_tree,
    build_vn_halving_tree,
    build_von_neumann_tree,
)


def test_cheating_learner_zero_everything():
    rho = random_state("pure", 4, 2)
    tr = run_game(KnownStateLearner(rho), RealizableAdversary(rho, eps=0.0), 60, "l1", seed=9)
    assert tr.cumulative_loss == 0.0
    assert regret(tr, "true_state") == 0.0
    assert mistakes(tr, 0.01) == 0
    assert regret(tr, "hindsight") >= -1e-6


def test_transcript_bookkeeping():
    rho = random_state("mixed", 2, 4)
    tr = run_game(MMWLearner(), RealizableAdversary(rho, eps=0.1), 40, "l2", seed=1)
    assert tr.cumulative_loss == pytest.approx(float(tr.losses.sum()))
    rows = list(tr.csv_rows(eps_prime=0.1))
    assert len(rows) == 40
    assert rows[-1]["cum_loss"] == pytest.approx(tr.cumulative_loss)
    assert rows[-1]["cum_regret_hindsight"] == pytest.approx(tr.regret_vs_hindsight, abs=1e-9)
    assert rows[0]["round"] == 1 and len(rows[0]["measurement_hash"]) == 12


def test_determinism_bit_identical():
    def play():
        rho = random_state("mixed", 4, 3)
        return run_game(MMWLearner(), RealizableAdversary(rho, eps=0.1), 50, "l1", seed=5)

    a, b = play(), play()
    assert np.array_equal(a.predictions, b.predictions)
    assert np.array_equal(a.labels, b.labels)
    assert [m.hash() for m in a.measurements] == [m.hash() for m in b.measurements]


def test_mmw_realizable_fixed_measurement_converges():
    rho = DensityMatrix.from_pure([1.0, 0.0])
    fixed = [Measurement.basis_projector(2, 0)]
    tr = run_game(
        MMWLearner(0.5),
        RealizableAdversary(rho, eps=0.0, source=fixed),
        200,
        "l2",
        seed=0,
    )
    assert tr.losses[-1] < 1e-3
    assert tr.losses[-1] < tr.losses[0]
    assert np.all(np.diff(tr.predictions) > 0)  # monotone chase toward 1


def test_realizable_exact_labels_when_noiseless():
    rho = random_state("mixed", 2, 8)
    tr = run_game(FixedLearner(), RealizableAdversary(rho, eps=0.0), 30, "l1", seed=2)
    assert np.allclose(tr.labels, tr.true_values(), atol=1e-12)
    assert tr.clip_count == 0


def test_uniform_noise_centered():
    rho = random_state("pure", 2, 1)
    tr = run_game(
        FixedLearner(), RealizableAdversary(rho, eps=0.2, noise="uniform"), 2000, "l1", seed=13
    )
    dev = tr.labels - tr.true_values()
    clipped_free = dev[~tr.clipped]
    se = 0.2 / np.sqrt(3 * clipped_free.size)
    assert abs(clipped_free.mean()) <= 3 * se


def test_gaussian_clipping_flagged():
    rho = DensityMatrix.from_pure([1.0, 0.0])
    high = Measurement(np.diag([0.95, 0.0]).astype(complex))  # Tr(E rho) = 0.95
    tr = run_game(
        FixedLearner(),
        RealizableAdversary(rho, eps=0.1, noise="gaussian", source=[high]),
        300,
        "l1",
        seed=3,
    )
    assert tr.clip_count > 0
    assert np.all(tr.labels <= 1.0) and np.all(tr.labels >= 0.0)


def test_noise_width_validated():
    rho = random_state("pure", 2, 1)
    adv = RealizableAdversary(rho, eps=0.7)
    with pytest.raises(ValidationError):
        run_game(FixedLearner(), adv, 5, "l1", seed=1)


# ------------------------------------------------------------ tree adversary

TREE_CASES = [
    build_halving_tree(0, 24, 1),
    build_von_neumann_tree(8, 3),
    build_vn_halving_tree(3, 2),
    build_general_tree(3, 2),
    build_pure_tree(2, 3),
]


@pytest.mark.parametrize("tree,wit", TREE_CASES, ids=lambda c: getattr(c, "construction", ""))
def test_tree_adversary_exact_lower_bound(tree, wit):
    rounds = min(tree.depth, 512)
    for learner in (MMWLearner(), FixedLearner()):
        tr = run_game(learner, TreeAdversary(tree, wit), rounds, "l1", seed=11)
        gap = float(np.abs(tr.predictions - tr.true_values()).sum())
        assert gap >= tree.delta * rounds - 1e-6


@pytest.mark.parametrize("tree,wit", TREE_CASES, ids=lambda c: getattr(c, "construction", ""))
def test_tree_adversary_per_round_margin(tree, wit):
    rounds = min(tree.certified_depth, 64)
    tr = run_game(MMWLearner(), TreeAdversary(tree, wit), rounds, "l1", seed=7)
    per_round = np.abs(tr.predictions - tr.true_values())
    assert np.all(per_round >= tree.delta - 1e-9)


def test_tree_adversary_ftl_bound():
    tree, wit = build_vn_halving_tree(2, 2)
    tr = run_game(FTLLearner(solver_iters=40), TreeAdversary(tree, wit), tree.depth, "l1", seed=4)
    gap = float(np.abs(tr.predictions - tr.true_values()).sum())
    assert gap >= tree.delta * tree.depth - 1e-6


def test_tree_adversary_wraparound_restarts():
    tree, wit = build_halving_tree(0, 3, 1)
    tr = run_game(FixedLearner(), TreeAdversary(tree, wit), 8, "l1", seed=2)
    assert tr.rounds == 8
    assert tr.true_state is not None  # first traversal's witness


def test_fine_shatter_variant_keeps_bound():
    # noisy labels do not affect the post-hoc gap guarantee
    tree, wit = build_general_tree(2, 2)
    adv = TreeAdversary(tree, wit, noise_eps=0.05, noise="uniform")
    tr = run_game(MMWLearner(), adv, tree.depth, "l1", seed=6)
    gap = float(np.abs(tr.predictions - tr.true_values()).sum())
    assert gap >= tree.delta * tree.depth - 1e-6


# ------------------------------------------------------------ smooth adversary

def test_smooth_sigma_one_is_base_distribution():
    rho = random_state("mixed", 2, 7)
    a = run_game(FixedLearner(), SmoothAdversary(rho, sigma=1.0), 30, "l1", seed=3)
    b = run_game(FixedLearner(), RealizableAdversary(rho, eps=0.0, noise="none"), 30, "l1", seed=3)
    assert [m.hash() for m in a.measurements] == [m.hash() for m in b.measurements]


def test_smooth_density_ratio_bound():
    atoms = [random_measurement(2, 100, stream=i) for i in range(8)]
    rho = random_state("pure", 2, 5)
    sigma = 0.5
    adv = SmoothAdversary(rho, sigma=sigma, base=lambda rng: atoms[int(rng.integers(8))])
    adv.begin(generator(17, 0), LossKind.L1)
    hyp = DensityMatrix.maximally_mixed(2)
    rounds = 20000
    counts = {a.hash(): 0 for a in atoms}
    for t in range(rounds):
        counts[adv.measurement(t, hyp).hash()] += 1
    bound_p = (1.0 / sigma + 1.0) / 8
    for c in counts.values():
        freq = c / rounds
        se = np.sqrt(bound_p * (1 - bound_p) / rounds)
        assert freq <= bound_p + 5 * se


def test_smooth_smaller_sigma_hurts_more():
    rho = random_state("mixed", 2, 1)

    def mean_loss(sigma):
        tot = 0.0
        for rep in range(6):
            tr = run_game(MMWLearner(), SmoothAdversary(rho, sigma=sigma), 400, "l1", seed=50 + rep)
            tot += tr.cumulative_loss
        return tot / 6

    assert mean_loss(0.0625) >= mean_loss(1.0)


def test_smooth_rejects_bad_sigma():
    rho = random_state("pure", 2, 0)
    with pytest.raises(ValidationError):
        SmoothAdversary(rho, sigma=0.0)


# ------------------------------------------------------------ hindsight solver

def test_hindsight_single_round_exact_fit():
    e = Measurement.basis_projector(2, 0)
    _, loss, _ = best_in_hindsight([e], [1.0], "l1")
    assert loss == pytest.approx(0.0, abs=1e-6)


def test_hindsight_conflicting_labels():
    e = Measurement.basis_projector(2, 0)
    _, loss, _ = best_in_hindsight([e, e], [0.0, 1.0], "l1")
    assert loss == pytest.approx(1.0, abs=1e-9)


def test_hindsight_matches_bloch_grid():
    pauli = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]

    def grid_min(ms, ys, centers=(0.0, 0.0, 0.0), half=1.0, step=0.02):
        base = np.array([0.5 * m.entries.trace().real for m in ms])
        coef = np.array(
            [[0.5 * np.trace(m.entries @ p).real for p in pauli] for m in ms]
        )
        ax = [np.arange(c - half, c + half + 1e-12, step) for c in centers]
        xs, ys_, zs = np.meshgrid(*ax, indexing="ij")
        pts = np.stack([xs.ravel(), ys_.ravel(), zs.ravel()], axis=1)
        pts = pts[(pts**2).sum(axis=1) <= 1.0 + 1e-12]
        losses = np.abs(base[None, :] + pts @ coef.T - ys[None, :]).sum(axis=1)
        i = losses.argmin()
        return losses[i], pts[i]

    rng = np.random.default_rng(5)
    for trial in range(3):
        ms = [random_measurement(2, 50, stream=100 * trial + i) for i in range(6)]
        ys = rng.uniform(0, 1, 6)
        _, loss, _ = best_in_hindsight(ms, ys, "l1")
        coarse, arg = grid_min(ms, ys)
        refined, _ = grid_min(ms, ys, centers=tuple(arg), half=0.04, step=0.001)
        assert loss == pytest.approx(refined, abs=1e-3)
        assert loss <= coarse + 1e-9  # never beaten by any grid candidate


def test_hindsight_dominates_gauge_candidates():
    rng = np.random.default_rng(3)
    ms = [random_measurement(4, 60, stream=i) for i in range(20)]
    ys = rng.uniform(0, 1, 20)
    for kind in ("l1", "l2"):
        state, loss, _ = best_in_hindsight(ms, ys, kind)
        kind = LossKind.parse(kind)
        for cand in [DensityMatrix.maximally_mixed(4)] + [
            DensityMatrix.from_pure(np.eye(4)[i]) for i in range(4)
        ]:
            cand_loss = sum(
                (abs if kind is LossKind.L1 else lambda z: z * z)(expectation(m, cand) - y)
                for m, y in zip(ms, ys)
            )
            assert loss <= cand_loss + 1e-9


def test_hindsight_empty_history_rejected():
    with pytest.raises(ValidationError):
        best_in_hindsight([], [], "l1")


def test_hindsight_regret_nonnegative_on_realizable():
    rho = random_state("mixed", 2, 11)
    for learner in (MMWLearner(), FixedLearner()):
        tr = run_game(learner, RealizableAdversary(rho, eps=0.0), 150, "l1", seed=21)
        assert tr.regret_vs_hindsight >= -1e-6


def test_regret_vs_true_nonnegative_in_expectation():
    rho = random_state("mixed", 2, 12)
    vals = []
    for rep in range(8):
        tr = run_game(
            MMWLearner(), RealizableAdversary(rho, eps=0.2, noise="uniform"), 100, "l2", seed=rep
        )
        vals.append(tr.regret_vs_true)
    assert np.mean(vals) >= -1e-3


def test_regret_missing_true_state_errors():
    e = Measurement.basis_projector(2, 0)

    class Bare:
        dim = 2

        def begin(self, rng, kind):
            pass

        def measurement(self, t, hyp):
            return e

        def label(self, t, meas, p):
            return 0.5, False

    tr = run_game(FixedLearner(), Bare(), 5, "l1", seed=0)
    with pytest.raises(ValidationError):
        regret(tr, "true_state")
    with pytest.raises(ValidationError):
        regret(tr, "nonsense")


def test_project_simplex():
    v = np.array([0.3, 1.4, -0.2])
    p = project_simplex(v)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)
    assert np.allclose(project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])
