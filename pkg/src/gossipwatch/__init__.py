"""Gossip-network optimization under insider data injection: simulation,
score-based and neural detectors, collaborative training, and evaluation."""

from gossipwatch.topology import (
    Graph,
    AttackerMask,
    manhattan_grid,
    small_world,
    sample_gossip_pair,
    expected_transition_matrix,
    second_largest_eigenvalue,
    remove_edge,
    induced_subgraph,
    attacker_mask,
)
from gossipwatch.protocol import (
    LeastSquaresProblem,
    Stepsize,
    ProtocolConfig,
    AttackConfig,
    Trace,
    BatchStats,
    generate_problem,
    subgradient,
    project_box,
    attacker_state,
    run_instance,
    run_batch,
    local_objective,
    global_objective,
    optimal_value,
)
from gossipwatch.features import (
    NeighborScores,
    FeatureVector,
    SdScoreFeatures,
    temporal_scores,
    spatial_scores,
    neighborhood_average,
    sd_aggregates,
    tailor_inputs,
)
from gossipwatch.score_detectors import (
    GREATER_IS_H1,
    SMALLER_IS_H1,
    ScoreVerdict,
    td_detect,
    td_localize,
    sd_detect,
    sd_localize,
)
from gossipwatch.neural import (
    Mlp,
    TrainConfig,
    init_mlp,
    forward,
    loss_and_grad,
    sgd_epoch,
    train,
    nd_predict,
    nl_predict,
    save_model,
    load_model,
)
from gossipwatch.gossip_train import (
    LearnerState,
    RoundMetrics,
    merge_model,
    gossip_round,
    run_gossip_training,
)
from gossipwatch.datagen import (
    Scenario,
    ShardPolicy,
    Budget,
    LabeledDataset,
    DatasetPair,
    Sample,
    generate_sample,
    scenario_from_tag,
    build_dataset,
    shard_for_gossip,
    subset_rows,
    training_arrays,
)
from gossipwatch.evaluation import (
    Detector,
    RocCurve,
    rates_at_threshold,
    roc_curve,
    evaluate_detector,
    make_score_detector,
    make_nn_detector,
)
from gossipwatch.experiments import (
    ConfigError,
    FAMILIES,
    config_digest,
    resolve_config,
    run_family,
)

__version__ = "0.1.0"
