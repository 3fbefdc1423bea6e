"""Experiment families: one runner per evaluation study, CSV/JSON artifacts.

Each family has a DEFAULTS config (plain JSON-serializable dict), a runner
``run_<family>(cfg, outdir) -> list of artifact names``, and a shared driver
``run_family`` that resolves overrides, runs, and writes a ``manifest.json``
recording the exact config, its digest, and every artifact produced.  All
output is deterministic: same config, same bytes.  Nothing here timestamps
or hashes anything machine-specific.

Families:
  converge        attacker-free convergence and single-attacker steering
  one-attacker    detector ROC study on the torus, one attacker
  multi-attacker  fixed detectors tested against (m, c) attacker combos
  degree-tailor   monitor-degree cuts with tailored detector inputs
  mismatch        train on one beta law, test across S0..S4
  gossip-learning collaborative training, starved and position-split shards
  small-world     torus-trained detectors on a rewired 20-agent graph
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .datagen import (
    EVENT_FAR,
    EVENT_H0,
    EVENT_NEXT,
    Budget,
    ShardPolicy,
    scenario_from_tag,
    build_dataset,
    shard_for_gossip,
    subset_rows,
    training_arrays,
)
from .evaluation import (
    auc_table_to_csv,
    evaluate_detector,
    make_nn_detector,
    make_score_detector,
    roc_to_csv,
)
from .gossip_train import LearnerState, metrics_to_csv, run_gossip_training
from .neural import Mlp, TrainConfig, init_mlp, save_model, train
from .protocol import (
    AttackConfig,
    ProtocolConfig,
    generate_problem,
    global_objective,
    optimal_value,
    run_instance,
)
from .topology import (
    attacker_mask,
    expected_transition_matrix,
    induced_subgraph,
    manhattan_grid,
    remove_edge,
    second_largest_eigenvalue,
    small_world,
)

HIDDEN = (200, 100, 50)

_TRAIN_DEFAULTS = {"eta": 0.01, "batch_size": 32, "epochs": 30}


class ConfigError(ValueError):
    """Bad experiment configuration (unknown field, invalid value)."""


DEFAULTS: dict[str, dict] = {
    "converge": {
        "master_seed": 0,
        "seeds": 10,
        "rows": 3,
        "cols": 3,
        "d": 2,
        "T": 2000,
        "attacker": 1,
        "trace_seed": 0,
    },
    "one-attacker": {
        "master_seed": 0,
        "scenario": "S0",
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "temporal_setups": [[5, 2], [2, 2], [1, 2], [2, 1]],
        "spatial_setups": [[2, 2], [1, 2]],
        "train": dict(_TRAIN_DEFAULTS),
    },
    "multi-attacker": {
        "master_seed": 0,
        "scenario": "S0",
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "combos": [[1, 1], [2, 1], [2, 2], [5, 1], [5, 3]],
        "temporal_K": 5,
        "spatial_K": 2,
        "d": 2,
        "train": dict(_TRAIN_DEFAULTS),
    },
    "degree-tailor": {
        "master_seed": 0,
        "scenario": "S0",
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "monitor": 2,
        "cuts": [[2, 5], [2, 8]],
        "temporal_K": 5,
        "spatial_K": 2,
        "d": 2,
        "train": dict(_TRAIN_DEFAULTS),
    },
    "mismatch": {
        "master_seed": 0,
        "train_scenario": "S0",
        "test_scenarios": ["S0", "S1", "S2", "S3", "S4"],
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "temporal_K": 5,
        "spatial_Ks": [2, 1],
        "d": 2,
        "train": dict(_TRAIN_DEFAULTS),
    },
    "gossip-learning": {
        "master_seed": 0,
        "scenario": "S0",
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "excluded_agent": 1,
        "K": 1,
        "d": 2,
        "rounds": 200,
        "mu": 0.5,
        "policy_seed": 0,
        "starved_agent": 1,
        "starved_fraction": 0.02,
        "next_group": [0, 1, 2, 3],
        "far_group": [4, 5, 6, 7],
        "train": dict(_TRAIN_DEFAULTS),
    },
    "small-world": {
        "master_seed": 0,
        "scenario": "S0",
        "scale": 0.1,
        "rows": 3,
        "cols": 3,
        "n": 20,
        "mean_degree": 8,
        "rewire_prob": 0.2,
        "graph_seed": 5,
        "attackers": [3, 10, 17],
        "M": 4,
        "temporal_K": 5,
        "spatial_K": 2,
        "d": 2,
        "train": dict(_TRAIN_DEFAULTS),
    },
}


def resolve_config(family: str, overrides: dict | None = None) -> dict:
    """Defaults for ``family`` with ``overrides`` merged in.

    Unknown fields raise ConfigError with the full field path, so a typo in
    a config file fails loudly instead of being ignored.
    """
    if family not in DEFAULTS:
        raise ConfigError(
            f"unknown experiment family {family!r}; known: {sorted(DEFAULTS)}"
        )
    return apply_overrides(DEFAULTS[family], overrides or {}, family)


def apply_overrides(defaults: dict, overrides: dict, path: str) -> dict:
    """Deep-copied ``defaults`` with ``overrides`` merged; unknown keys fail."""
    cfg = json.loads(json.dumps(defaults))
    _merge(cfg, overrides, path)
    return cfg


def _merge(base: dict, overrides: dict, path: str) -> None:
    for key, value in overrides.items():
        here = f"{path}.{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here!r} expects an object, got {value!r}")
            _merge(base[key], value, here)
        else:
            base[key] = value


def config_digest(cfg: dict) -> str:
    """sha256 of the canonical (sorted-keys, compact) JSON encoding."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def run_family(family: str, outdir, overrides: dict | None = None) -> dict:
    """Resolve config, run the family, write manifest.json; returns it."""
    cfg = resolve_config(family, overrides)
    os.makedirs(outdir, exist_ok=True)
    artifacts = _RUNNERS[family](cfg, outdir)
    return write_manifest(outdir, family, cfg, artifacts)


def write_manifest(
    outdir, family: str, cfg: dict, artifacts: list[str], extra: dict | None = None
) -> dict:
    from . import __version__

    manifest = {
        "family": family,
        "config": cfg,
        "digest": config_digest(cfg),
        "version": __version__,
        "artifacts": sorted(artifacts) + ["manifest.json"],
        **(extra or {}),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def _write_csv(path, header: list[str], rows: list[tuple]) -> None:
    """Floats via repr (round-trip exact), everything else via str."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                    for v in row
                )
                + "\n"
            )


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(list(int(k) for k in key))


def _train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(eta=t["eta"], batch_size=t["batch_size"], epochs=t["epochs"])


def _fit(dataset, config: TrainConfig, rng: np.random.Generator) -> Mlp:
    """Train a fresh [M, 200, 100, 50, out] network on a labeled dataset."""
    X, Y, mask = training_arrays(dataset)
    out = 1 if dataset.task == "nd" else dataset.M
    mlp = init_mlp([dataset.M, *HIDDEN, out], seed=rng)
    train(mlp, X, Y, config, rng=rng, mask=mask)
    return mlp


def _eval(detector, dataset, outdir, stem, summaries, artifacts, extra=None):
    curve, summary = evaluate_detector(detector, dataset)
    if extra:
        summary.update(extra)
    summaries.append(summary)
    name = f"roc_{stem}.csv"
    roc_to_csv(curve, os.path.join(outdir, name))
    artifacts.append(name)
    return summary


def _save(mlp, outdir, name, artifacts, meta=None) -> None:
    save_model(mlp, os.path.join(outdir, name + ".json"), meta=meta)
    artifacts.extend([name + ".json", name + ".json.bin"])


def _test_budget(scale: float) -> Budget:
    """Test-split rows only, for scenarios evaluated with imported models."""
    return Budget(
        nd_train_per_event=0,
        nd_test_per_event=round(6000 * scale),
        nl_train=0,
        nl_test=round(6000 * scale),
    )


# --- converge ---------------------------------------------------------------


def run_converge(cfg: dict, outdir) -> list[str]:
    """Attacker-free convergence plus single-attacker steering, per seed.

    report.csv has one row per seed with the final-iterate gaps; the
    trace_seed run additionally dumps full trajectories for plotting.
    """
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    n, d, T = graph.n, cfg["d"], cfg["T"]
    config = ProtocolConfig(d=d, T=T, K=1)
    mask = attacker_mask(graph, [cfg["attacker"]])
    lam = second_largest_eigenvalue(expected_transition_matrix(graph))
    master = cfg["master_seed"]

    artifacts: list[str] = []
    rows = []
    for s in range(cfg["seeds"]):
        problem = generate_problem(n, d, _rng(master, s, 0))
        _, f_star = optimal_value(problem)
        clean = run_instance(graph, None, problem, config, None, _rng(master, s, 1))
        alpha = _rng(master, s, 2).uniform(-0.5, 0.5, size=d)
        attack = AttackConfig(alpha=alpha, lambda_hat=lam)
        hit = run_instance(graph, mask, problem, config, attack, _rng(master, s, 3))

        f_gap_t, spread_t = _clean_trajectory(problem, clean.states, f_star)
        dist_t = _attack_trajectory(hit.states, alpha, mask.flags)
        rows.append((s, f_gap_t[-1], spread_t[-1], dist_t[-1]))

        if s == cfg["trace_seed"]:
            _write_csv(
                os.path.join(outdir, "trajectory_clean.csv"),
                ["t", "f_gap", "disagreement"],
                [(t, f_gap_t[t], spread_t[t]) for t in range(T + 1)],
            )
            _write_csv(
                os.path.join(outdir, "trajectory_attack.csv"),
                ["t", "attack_distance"],
                [(t, dist_t[t]) for t in range(T + 1)],
            )
            artifacts.extend(["trajectory_clean.csv", "trajectory_attack.csv"])

    _write_csv(
        os.path.join(outdir, "report.csv"),
        ["seed", "f_gap", "disagreement", "attack_distance"],
        rows,
    )
    artifacts.append("report.csv")
    return artifacts


def _clean_trajectory(problem, states, f_star):
    resid = np.einsum("tnd,md->tnm", states, problem.theta) - problem.phi
    f_vals = (resid * resid).mean(axis=2)
    f_gap = f_vals.max(axis=1) - f_star
    diff = states[:, :, None, :] - states[:, None, :, :]
    spread = np.sqrt((diff * diff).sum(axis=3)).max(axis=(1, 2))
    return f_gap, spread


def _attack_trajectory(states, alpha, flags):
    trusted = states[:, ~flags, :] - alpha
    return np.sqrt((trusted * trusted).sum(axis=2)).max(axis=1)


# --- one-attacker -----------------------------------------------------------


def run_one_attacker(cfg: dict, outdir) -> list[str]:
    """Score and neural detectors on the torus with a single attacker.

    Temporal methods (td, tdnn) sweep the configured (K, d) setups; spatial
    methods (sd, sdnn) their own list.  Detection and localization both run;
    localization is evaluated in oracle-detection mode.
    """
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    budget = Budget.desk(cfg["scale"])
    tcfg = _train_config(cfg)

    setups = [tuple(s) for s in cfg["temporal_setups"]]
    for s in cfg["spatial_setups"]:
        if tuple(s) not in setups:
            setups.append(tuple(s))

    artifacts: list[str] = []
    summaries: list[dict] = []
    for K, d in setups:
        scenario = scenario_from_tag(cfg["scenario"], graph, K=K, d=d)
        data = build_dataset(scenario, budget, master)
        temporal = [K, d] in [list(s) for s in cfg["temporal_setups"]]
        spatial = [K, d] in [list(s) for s in cfg["spatial_setups"]]
        for task in ("nd", "nl"):
            if temporal:
                ds = data[f"{task}_temporal"]
                _eval(
                    make_score_detector("td", task), ds.test, outdir,
                    f"{task}_td_K{K}_d{d}", summaries, artifacts,
                )
                mlp = _fit(ds.train, tcfg, _rng(master, 11, K, d, task == "nl", 0))
                _save(mlp, outdir, f"model_{task}_tdnn_K{K}_d{d}", artifacts)
                _eval(
                    make_nn_detector(mlp, task, "temporal", "tdnn"), ds.test,
                    outdir, f"{task}_tdnn_K{K}_d{d}", summaries, artifacts,
                )
            if spatial:
                ds = data[f"{task}_spatial"]
                _eval(
                    make_score_detector("sd", task), ds.test, outdir,
                    f"{task}_sd_K{K}_d{d}", summaries, artifacts,
                )
                mlp = _fit(ds.train, tcfg, _rng(master, 11, K, d, task == "nl", 1))
                _save(mlp, outdir, f"model_{task}_sdnn_K{K}_d{d}", artifacts)
                _eval(
                    make_nn_detector(mlp, task, "spatial", "sdnn"), ds.test,
                    outdir, f"{task}_sdnn_K{K}_d{d}", summaries, artifacts,
                )

    auc_table_to_csv(summaries, os.path.join(outdir, "aucs.csv"))
    artifacts.append("aucs.csv")
    return artifacts


# --- multi-attacker ---------------------------------------------------------


def run_multi_attacker(cfg: dict, outdir) -> list[str]:
    """Detectors trained on one attacker, tested against (m, c) combos.

    Attacked test events are all next-to placements: c of the m attackers
    touch the monitor.  The far-from event is omitted because placements
    with every attacker outside the monitor neighborhood stop existing on
    the 9-agent torus once m exceeds the non-neighbor count.
    """
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    tK, sK, d = cfg["temporal_K"], cfg["spatial_K"], cfg["d"]
    tcfg = _train_config(cfg)

    artifacts: list[str] = []
    summaries: list[dict] = []
    models = _baseline_models(cfg, graph, master, tK, sK, d, tcfg, outdir, artifacts)

    for m, c in (tuple(combo) for combo in cfg["combos"]):
        for K, kind in ((tK, "temporal"), (sK, "spatial")):
            scenario = scenario_from_tag(
                cfg["scenario"], graph, m=m, c=c, K=K, d=d
            )
            data = build_dataset(
                scenario,
                _test_budget(cfg["scale"]),
                master + 1,
                events=(EVENT_H0, EVENT_NEXT),
            )
            method = "td" if kind == "temporal" else "sd"
            for task in ("nd", "nl"):
                ds = data[f"{task}_{kind}"].test
                extra = {"m": m, "c": c}
                _eval(
                    make_score_detector(method, task), ds, outdir,
                    f"{task}_{method}_m{m}_c{c}", summaries, artifacts, extra,
                )
                _eval(
                    make_nn_detector(models[(task, kind)], task, kind, method + "nn"),
                    ds, outdir, f"{task}_{method}nn_m{m}_c{c}",
                    summaries, artifacts, extra,
                )

    auc_table_to_csv(summaries, os.path.join(outdir, "aucs.csv"), extra_cols=("m", "c"))
    artifacts.append("aucs.csv")
    return artifacts


def _baseline_models(cfg, graph, master, tK, sK, d, tcfg, outdir, artifacts):
    """One-attacker-trained networks, one per (task, kind), saved to disk."""
    budget = Budget(
        nd_train_per_event=round(10000 * cfg["scale"]),
        nd_test_per_event=0,
        nl_train=round(10000 * cfg["scale"]),
        nl_test=0,
    )
    models = {}
    for K, kind in ((tK, "temporal"), (sK, "spatial")):
        scenario = scenario_from_tag(cfg["scenario"], graph, K=K, d=d)
        data = build_dataset(scenario, budget, master)
        for task in ("nd", "nl"):
            mlp = _fit(
                data[f"{task}_{kind}"].train, tcfg,
                _rng(master, 11, K, d, task == "nl", kind == "spatial"),
            )
            models[(task, kind)] = mlp
            method = "tdnn" if kind == "temporal" else "sdnn"
            _save(mlp, outdir, f"model_{task}_{method}", artifacts)
    return models


# --- degree-tailor ----------------------------------------------------------


def run_degree_tailor(cfg: dict, outdir) -> list[str]:
    """Cut monitor edges one by one and re-test fixed-width detectors.

    Models train on the intact torus with the monitor drawn per sample;
    test sets fix the monitor at the agent losing edges, so its degree drops
    below the detector width and the tailoring path (padding) is exercised.
    """
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    tK, sK, d = cfg["temporal_K"], cfg["spatial_K"], cfg["d"]
    monitor = cfg["monitor"]
    tcfg = _train_config(cfg)
    M = graph.max_degree()

    artifacts: list[str] = []
    summaries: list[dict] = []
    models = _baseline_models(cfg, graph, master, tK, sK, d, tcfg, outdir, artifacts)

    cut = graph
    for p in range(len(cfg["cuts"]) + 1):
        if p > 0:
            u, v = cfg["cuts"][p - 1]
            cut = remove_edge(cut, u, v)
        for K, kind in ((tK, "temporal"), (sK, "spatial")):
            scenario = scenario_from_tag(
                cfg["scenario"], cut, K=K, d=d, M=M, monitor=monitor
            )
            data = build_dataset(scenario, _test_budget(cfg["scale"]), master + 1)
            method = "td" if kind == "temporal" else "sd"
            for task in ("nd", "nl"):
                ds = data[f"{task}_{kind}"].test
                extra = {"p": p}
                _eval(
                    make_score_detector(method, task), ds, outdir,
                    f"{task}_{method}_p{p}", summaries, artifacts, extra,
                )
                _eval(
                    make_nn_detector(models[(task, kind)], task, kind, method + "nn"),
                    ds, outdir, f"{task}_{method}nn_p{p}", summaries, artifacts, extra,
                )

    auc_table_to_csv(summaries, os.path.join(outdir, "aucs.csv"), extra_cols=("p",))
    artifacts.append("aucs.csv")
    return artifacts


# --- mismatch ---------------------------------------------------------------


def run_mismatch(cfg: dict, outdir) -> list[str]:
    """Train under one initial-state law, test across all of them."""
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    tK, d = cfg["temporal_K"], cfg["d"]
    tcfg = _train_config(cfg)
    budget = Budget(
        nd_train_per_event=round(10000 * cfg["scale"]),
        nd_test_per_event=0,
        nl_train=round(10000 * cfg["scale"]),
        nl_test=0,
    )

    artifacts: list[str] = []
    summaries: list[dict] = []

    models = {}
    for K, kind in [(tK, "temporal")] + [(K, "spatial") for K in cfg["spatial_Ks"]]:
        scenario = scenario_from_tag(cfg["train_scenario"], graph, K=K, d=d)
        data = build_dataset(scenario, budget, master)
        for task in ("nd", "nl"):
            mlp = _fit(
                data[f"{task}_{kind}"].train, tcfg,
                _rng(master, 11, K, d, task == "nl", kind == "spatial"),
            )
            models[(task, kind, K)] = mlp
            method = "tdnn" if kind == "temporal" else "sdnn"
            _save(mlp, outdir, f"model_{task}_{method}_K{K}", artifacts)

    for tag in cfg["test_scenarios"]:
        for K, kind in [(tK, "temporal")] + [(K, "spatial") for K in cfg["spatial_Ks"]]:
            scenario = scenario_from_tag(tag, graph, K=K, d=d)
            data = build_dataset(scenario, _test_budget(cfg["scale"]), master + 1000)
            method = "td" if kind == "temporal" else "sd"
            for task in ("nd", "nl"):
                ds = data[f"{task}_{kind}"].test
                extra = {"scenario": tag}
                _eval(
                    make_score_detector(method, task), ds, outdir,
                    f"{task}_{method}_K{K}_{tag}", summaries, artifacts, extra,
                )
                _eval(
                    make_nn_detector(models[(task, kind, K)], task, kind, method + "nn"),
                    ds, outdir, f"{task}_{method}nn_K{K}_{tag}",
                    summaries, artifacts, extra,
                )

    auc_table_to_csv(
        summaries, os.path.join(outdir, "aucs.csv"), extra_cols=("scenario",)
    )
    artifacts.append("aucs.csv")
    return artifacts


# --- gossip-learning --------------------------------------------------------


def run_gossip_learning(cfg: dict, outdir) -> list[str]:
    """Collaborative detector training over the trustworthy agents.

    Case 1 starves one agent of attacked rows (a starved_fraction share of
    the next-to rows, a fair share of everything else) and compares its
    isolated model against its model after gossip rounds.  Case 2 splits
    attacked rows by attacker position (next-to rows to one agent group,
    far-from rows to the other) and compares position-specialist models
    against collaborative ones on matched and mismatched test subsets.
    """
    graph = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    tcfg = _train_config(cfg)
    learner_graph, _ = induced_subgraph(
        graph, [v for v in range(graph.n) if v != cfg["excluded_agent"]]
    )
    agents = tuple(range(learner_graph.n))

    artifacts: list[str] = []
    artifacts += _gossip_case1(cfg, graph, learner_graph, agents, master, tcfg, outdir)
    artifacts += _gossip_case2(cfg, graph, learner_graph, agents, master, tcfg, outdir)
    return artifacts


def _spawn_learners(shards, dataset, agents, tcfg, mu, master, tag):
    learners = []
    for a in agents:
        X, Y, mask = training_arrays(dataset, shards[a])
        mlp = init_mlp([dataset.M, *HIDDEN, 1], seed=_rng(master, tag, a))
        learners.append(
            LearnerState(agent=a, model=mlp, X=X, Y=Y, mask=mask, mu=mu, config=tcfg)
        )
    return learners


def _gossip_case1(cfg, graph, learner_graph, agents, master, tcfg, outdir):
    scenario = scenario_from_tag(cfg["scenario"], graph, K=cfg["K"], d=cfg["d"])
    data = build_dataset(
        scenario, Budget.desk(cfg["scale"]), master,
        tasks=("nd",), events=(EVENT_H0, EVENT_NEXT),
    )["nd_spatial"]
    policy = ShardPolicy(
        kind="starved",
        agents=agents,
        starved_agent=cfg["starved_agent"],
        starved_fraction=cfg["starved_fraction"],
        starved_events=(EVENT_NEXT,),
        seed=cfg["policy_seed"],
    )
    shards = shard_for_gossip(data.train, policy)
    starved = cfg["starved_agent"]

    iso_rows = shards[starved]
    X, Y, mask = training_arrays(data.train, iso_rows)
    iso = init_mlp([data.train.M, *HIDDEN, 1], seed=_rng(master, 21, starved))
    train(iso, X, Y, tcfg, rng=_rng(master, 22, starved), mask=mask)

    learners = _spawn_learners(shards, data.train, agents, tcfg, cfg["mu"], master, 21)
    metrics = run_gossip_training(
        learners, learner_graph, cfg["rounds"], _rng(master, 23), mode="sync"
    )
    collab = learners[starved].model

    artifacts = []
    summaries = []
    for name, mlp in (("isolated", iso), ("collaborative", collab)):
        det = make_nn_detector(mlp, "nd", "spatial", name)
        curve, summary = evaluate_detector(det, data.test)
        summaries.append((name, iso_rows.size, summary["auc"]))
        roc_to_csv(curve, os.path.join(outdir, f"roc_case1_{name}.csv"))
        artifacts.append(f"roc_case1_{name}.csv")
        _save(mlp, outdir, f"model_case1_{name}", artifacts)

    _write_csv(
        os.path.join(outdir, "case1_report.csv"),
        ["model", "starved_rows", "auc"],
        summaries,
    )
    metrics_to_csv(metrics, os.path.join(outdir, "case1_telemetry.csv"))
    artifacts += ["case1_report.csv", "case1_telemetry.csv"]
    return artifacts


def _gossip_case2(cfg, graph, learner_graph, agents, master, tcfg, outdir):
    scenario = scenario_from_tag(cfg["scenario"], graph, K=cfg["K"], d=cfg["d"])
    data = build_dataset(
        scenario, Budget.desk(cfg["scale"]), master + 500, tasks=("nd",)
    )["nd_spatial"]
    next_group = tuple(cfg["next_group"])
    far_group = tuple(cfg["far_group"])
    policy = ShardPolicy(
        kind="by-position",
        agents=agents,
        position_groups={
            EVENT_H0: agents,
            EVENT_NEXT: next_group,
            EVENT_FAR: far_group,
        },
        seed=cfg["policy_seed"],
    )
    shards = shard_for_gossip(data.train, policy)

    probes = {"next": next_group[0], "far": far_group[0]}
    iso_models = {}
    for label, agent in probes.items():
        X, Y, mask = training_arrays(data.train, shards[agent])
        mlp = init_mlp([data.train.M, *HIDDEN, 1], seed=_rng(master, 31, agent))
        train(mlp, X, Y, tcfg, rng=_rng(master, 32, agent), mask=mask)
        iso_models[label] = mlp

    learners = _spawn_learners(shards, data.train, agents, tcfg, cfg["mu"], master, 31)
    metrics = run_gossip_training(
        learners, learner_graph, cfg["rounds"], _rng(master, 33), mode="sync"
    )

    events = np.array(data.test.events)
    subsets = {
        "next": subset_rows(data.test, np.isin(events, (EVENT_H0, EVENT_NEXT))),
        "far": subset_rows(data.test, np.isin(events, (EVENT_H0, EVENT_FAR))),
    }

    rows = []
    for label, agent in probes.items():
        for model_kind, mlp in (
            ("independent", iso_models[label]),
            ("collaborative", learners[agent].model),
        ):
            det = make_nn_detector(mlp, "nd", "spatial", model_kind)
            for subset_label, subset in subsets.items():
                _, summary = evaluate_detector(det, subset)
                rows.append((model_kind, agent, subset_label, summary["auc"]))

    _write_csv(
        os.path.join(outdir, "case2_report.csv"),
        ["model", "agent", "test_events", "auc"],
        rows,
    )
    metrics_to_csv(metrics, os.path.join(outdir, "case2_telemetry.csv"))
    return ["case2_report.csv", "case2_telemetry.csv"]


# --- small-world ------------------------------------------------------------


def run_small_world(cfg: dict, outdir) -> list[str]:
    """Torus-trained detectors transplanted onto a rewired ring.

    The test graph is a Watts-Strogatz small world with fixed attackers;
    monitors are drawn from the attacker-adjacent agents, and monitor
    degrees exceed the detector width so inputs are tailored into windows.
    """
    torus = manhattan_grid(cfg["rows"], cfg["cols"])
    master = cfg["master_seed"]
    tK, sK, d = cfg["temporal_K"], cfg["spatial_K"], cfg["d"]
    tcfg = _train_config(cfg)

    artifacts: list[str] = []
    summaries: list[dict] = []
    models = _baseline_models(cfg, torus, master, tK, sK, d, tcfg, outdir, artifacts)

    world = small_world(
        cfg["n"], cfg["mean_degree"], cfg["rewire_prob"],
        np.random.default_rng(cfg["graph_seed"]),
    )
    attackers = tuple(int(a) for a in cfg["attackers"])
    adjacent = sorted(
        set(int(v) for a in attackers for v in world.neighbors_of(a)) - set(attackers)
    )

    for K, kind in ((tK, "temporal"), (sK, "spatial")):
        scenario = scenario_from_tag(
            cfg["scenario"], world,
            m=len(attackers), c=1, K=K, d=d, M=cfg["M"],
            attackers=attackers, monitor_pool=tuple(adjacent),
        )
        data = build_dataset(
            scenario, _test_budget(cfg["scale"]), master + 1,
            events=(EVENT_H0, EVENT_NEXT),
        )
        method = "td" if kind == "temporal" else "sd"
        for task in ("nd", "nl"):
            ds = data[f"{task}_{kind}"].test
            _eval(
                make_score_detector(method, task), ds, outdir,
                f"{task}_{method}", summaries, artifacts,
            )
            _eval(
                make_nn_detector(models[(task, kind)], task, kind, method + "nn"),
                ds, outdir, f"{task}_{method}nn", summaries, artifacts,
            )

    auc_table_to_csv(summaries, os.path.join(outdir, "aucs.csv"))
    artifacts.append("aucs.csv")
    return artifacts


_RUNNERS = {
    "converge": run_converge,
    "one-attacker": run_one_attacker,
    "multi-attacker": run_multi_attacker,
    "degree-tailor": run_degree_tailor,
    "mismatch": run_mismatch,
    "gossip-learning": run_gossip_learning,
    "small-world": run_small_world,
}

FAMILIES = tuple(_RUNNERS)
