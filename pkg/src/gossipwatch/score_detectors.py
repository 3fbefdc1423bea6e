"""Threshold detectors built directly on the temporal and spatial scores.

Each detector reduces per-neighbor scores to a decision statistic and
compares it against a caller-chosen threshold.  Orientation is explicit:
greater-is-H1 statistics flag an attack when the score exceeds the
threshold, smaller-is-H1 when it falls below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gossipwatch.features import NeighborScores, SdScoreFeatures

GREATER_IS_H1 = "greater-is-H1"
SMALLER_IS_H1 = "smaller-is-H1"


@dataclass(frozen=True)
class ScoreVerdict:
    score: float
    threshold: float
    decision: str  # "H0" | "H1"
    orientation: str
    subject: int | None = None  # agent the verdict speaks about, when localized


def decide(score: float, threshold: float, orientation: str) -> str:
    if orientation == GREATER_IS_H1:
        return "H1" if score > threshold else "H0"
    if orientation == SMALLER_IS_H1:
        return "H1" if score < threshold else "H0"
    raise ValueError(f"unknown orientation: {orientation!r}")


def td_detection_score(xi_values: np.ndarray) -> float:
    """Mean absolute deviation of neighbor displacements from their mean."""
    xi = np.asarray(xi_values, dtype=np.float64)
    if xi.size == 0:
        raise ValueError("need at least one neighbor score")
    return float(np.abs(xi - xi.mean()).mean())


def td_localization_scores(xi_values: np.ndarray) -> np.ndarray:
    """|xi_ij| per neighbor; attackers barely move, so small means H1."""
    return np.abs(np.asarray(xi_values, dtype=np.float64))


def td_detect(scores: NeighborScores, delta: float) -> ScoreVerdict:
    """Neighborhood-level temporal detection at threshold delta."""
    y = td_detection_score(scores.values)
    return ScoreVerdict(
        score=y,
        threshold=delta,
        decision=decide(y, delta, GREATER_IS_H1),
        orientation=GREATER_IS_H1,
        subject=scores.agent,
    )


def td_localize(scores: NeighborScores, eps: float) -> list[ScoreVerdict]:
    """Per-neighbor temporal localization at threshold eps."""
    z = td_localization_scores(scores.values)
    return [
        ScoreVerdict(
            score=float(zj),
            threshold=eps,
            decision=decide(float(zj), eps, SMALLER_IS_H1),
            orientation=SMALLER_IS_H1,
            subject=int(j),
        )
        for zj, j in zip(z, scores.neighbor_ids)
    ]


def sd_detection_score(sd: SdScoreFeatures) -> float:
    """Mean of squared per-neighbor scalar spatial deviations."""
    scal = sd.detection.sum(axis=(0, 2)) / (sd.K * sd.d)
    return float((scal * scal).mean())


def sd_localization_scores(sd: SdScoreFeatures, include_self: bool = False) -> np.ndarray:
    """Squared scalar self-referenced deviations per neighbor.

    With include_self a final entry for j = i is appended, using
    phi_ii = -phibar_ii.
    """
    scal = sd.localization.sum(axis=(0, 2)) / (sd.K * sd.d)
    z = scal * scal
    if include_self:
        s = -sd.self_detection.sum() / (sd.K * sd.d)
        z = np.append(z, s * s)
    return z


def sd_detect(sd: SdScoreFeatures, delta: float) -> ScoreVerdict:
    """Neighborhood-level spatial detection at threshold delta."""
    y = sd_detection_score(sd)
    return ScoreVerdict(
        score=y,
        threshold=delta,
        decision=decide(y, delta, GREATER_IS_H1),
        orientation=GREATER_IS_H1,
        subject=sd.agent,
    )


def sd_localize(sd: SdScoreFeatures, eps: float) -> list[ScoreVerdict]:
    """Per-neighbor spatial localization at threshold eps."""
    z = sd_localization_scores(sd)
    return [
        ScoreVerdict(
            score=float(zj),
            threshold=eps,
            decision=decide(float(zj), eps, GREATER_IS_H1),
            orientation=GREATER_IS_H1,
            subject=int(j),
        )
        for zj, j in zip(z, sd.neighbor_ids)
    ]


# Row-level scoring over tailored feature vectors, for dataset evaluation.
# Slots carry xi (temporal rows) or chi (spatial rows); padded slots repeat
# the monitor's self value and are excluded where the statistic is a
# neighbor aggregate.


def td_row_detection(values: np.ndarray, padded: np.ndarray) -> float:
    return td_detection_score(np.asarray(values)[~np.asarray(padded, dtype=bool)])


def td_row_localization(values: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(values, dtype=np.float64))


def sd_row_detection(values: np.ndarray, padded: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64)[~np.asarray(padded, dtype=bool)]
    if v.size == 0:
        raise ValueError("need at least one neighbor score")
    return float((v * v).mean())


def sd_row_localization(values: np.ndarray, self_value: float) -> np.ndarray:
    # chi_ij - 2 chi_ii equals the scalar of phi_ij = S_j - 2 S_i + center,
    # so localization needs only the row slots and the self score.
    v = np.asarray(values, dtype=np.float64) - 2.0 * self_value
    return v * v
