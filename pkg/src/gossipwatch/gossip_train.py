"""Collaborative peer-to-peer detector training over a gossip network.

Each agent keeps a private model and a private data shard.  A round lets
every agent (in id order) merge any model received since its last turn,
take one mini-batch SGD step on its own shard, and push its parameters to a
uniformly chosen neighbor.  Inboxes hold one message; a newer arrival
overwrites an unread one.  Synchronous rounds stage all sends and deliver
them after every agent has acted, so the serial loop matches a barrier-
synchronized parallel execution; the asynchronous mode wakes one random
agent per tick with immediate delivery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gossipwatch.neural import Mlp, TrainConfig, mlp_from_blob, params_to_blob, sgd_step
from gossipwatch.topology import Graph


@dataclass
class LearnerState:
    """One agent's training state: model, local shard, merge weight, inbox."""

    agent: int
    model: Mlp
    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray | None = None
    mu: float = 0.5
    config: TrainConfig = field(default_factory=TrainConfig)
    inbox: bytes | None = None

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"merge weight mu must be in [0, 1], got {self.mu}")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("shard X and Y row counts differ")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    mean_loss: float  # mean batch loss over agents that trained (nan if none)
    dispersion: float  # max over model pairs of the max-abs parameter gap


def merge_model(own: Mlp, received: Mlp, mu: float) -> Mlp:
    """Convex parameter merge: (1 - mu) own + mu received."""
    if own.sizes != received.sizes:
        raise ValueError(f"cannot merge layer sizes {own.sizes} and {received.sizes}")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"merge weight mu must be in [0, 1], got {mu}")
    return Mlp(
        sizes=own.sizes,
        weights=[(1.0 - mu) * a + mu * b for a, b in zip(own.weights, received.weights)],
        biases=[(1.0 - mu) * a + mu * b for a, b in zip(own.biases, received.biases)],
    )


def _check_learners(learners, graph):
    if len(learners) != graph.n:
        raise ValueError(f"{len(learners)} learners for a graph of {graph.n} agents")
    for pos, lr in enumerate(learners):
        if lr.agent != pos:
            raise ValueError("learners must be listed in ascending agent id order")


def _act(lr: LearnerState, graph: Graph, rng: np.random.Generator):
    """Merge inbox, take one local SGD step, pick a recipient.  Returns the
    (recipient, payload) message and the batch loss (nan on an empty shard)."""
    if lr.inbox is not None:
        lr.model = merge_model(lr.model, mlp_from_blob(lr.model.sizes, lr.inbox), lr.mu)
        lr.inbox = None
    rows = lr.X.shape[0]
    if rows:
        take = min(lr.config.batch_size, rows)
        idx = rng.choice(rows, size=take, replace=False)
        loss = sgd_step(
            lr.model,
            lr.X[idx],
            lr.Y[idx],
            lr.config.eta,
            None if lr.mask is None else lr.mask[idx],
        )
    else:
        loss = float("nan")
    nbrs = graph.neighbors[lr.agent]
    recipient = int(nbrs[int(rng.random() * len(nbrs))])
    return recipient, params_to_blob(lr.model), loss


def gossip_round(
    learners: list[LearnerState], graph: Graph, rng: np.random.Generator
) -> list[float]:
    """One synchronous round over all agents; returns per-agent batch losses."""
    _check_learners(learners, graph)
    staged = []
    losses = []
    for lr in learners:
        recipient, payload, loss = _act(lr, graph, rng)
        staged.append((recipient, payload))
        losses.append(loss)
    for recipient, payload in staged:
        learners[recipient].inbox = payload
    return losses


def _dispersion(learners) -> float:
    flat = np.stack(
        [np.frombuffer(params_to_blob(lr.model), dtype="<f8") for lr in learners]
    )
    return float((flat.max(axis=0) - flat.min(axis=0)).max())


def run_gossip_training(
    learners: list[LearnerState],
    graph: Graph,
    rounds: int,
    rng: np.random.Generator,
    mode: str = "sync",
) -> list[RoundMetrics]:
    """Run ``rounds`` of collaborative training in place, with telemetry.

    mode "sync" sweeps every agent per round; "async" wakes one uniformly
    random agent per round and delivers its message immediately.
    """
    if mode not in ("sync", "async"):
        raise ValueError(f"unknown mode: {mode!r}")
    _check_learners(learners, graph)
    metrics = []
    for r in range(rounds):
        if mode == "sync":
            losses = gossip_round(learners, graph, rng)
        else:
            who = int(rng.integers(len(learners)))
            recipient, payload, loss = _act(learners[who], graph, rng)
            learners[recipient].inbox = payload
            losses = [loss]
        arr = np.asarray(losses, dtype=np.float64)
        mean_loss = float(np.nanmean(arr)) if np.isfinite(arr).any() else float("nan")
        metrics.append(
            RoundMetrics(round=r, mean_loss=mean_loss, dispersion=_dispersion(learners))
        )
    return metrics


def metrics_to_csv(metrics: list[RoundMetrics], path) -> None:
    with open(path, "w") as fh:
        fh.write("round,mean_loss,dispersion\n")
        for m in metrics:
            fh.write(f"{m.round},{repr(m.mean_loss)},{repr(m.dispersion)}\n")
