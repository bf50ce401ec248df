"""oql: a desk-scale laboratory for online learning of quantum states."""

from .core import (
    DensityMatrix,
    HermitianOperator,
    Measurement,
    PureState,
    ValidationError,
    expectation,
    hermitian_eigen,
    is_density,
    matrix_exp_hermitian,
    projector,
    random_measurement,
    random_state,
)
from .completion import (
    PartialStarMatrix,
    clique_psd_check,
    complete_to_density,
    validate_star_pattern,
)
from .trees import (
    Path,
    ShatterTree,
    WitnessMap,
    build_construction,
    build_general_tree,
    build_halving_tree,
    build_pure_tree,
    build_vn_halving_tree,
    build_von_neumann_tree,
    node_measurement,
    node_value,
)
from .shattering import (
    ShatterReport,
    brute_force_sfat,
    check_prefix_measurability,
    sequential_rademacher_estimate,
    theoretical_bounds,
    verify_shattering,
)
from .learners import (
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
from .game import (
    GameTranscript,
    RealizableAdversary,
    SmoothAdversary,
    TreeAdversary,
    best_in_hindsight,
    mistakes,
    regret,
    run_game,
)

__version__ = "0.1.0"
