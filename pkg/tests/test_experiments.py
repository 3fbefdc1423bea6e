"""Experiment config resolution, manifests, and run determinism."""

import json

import numpy as np
import pytest

from gossipwatch.experiments import (
    DEFAULTS,
    FAMILIES,
    ConfigError,
    apply_overrides,
    config_digest,
    resolve_config,
    run_family,
)


def test_known_families_all_have_defaults():
    assert set(FAMILIES) == set(DEFAULTS)
    assert "converge" in FAMILIES and "gossip-learning" in FAMILIES


def test_resolve_config_copies_defaults():
    cfg = resolve_config("converge")
    assert cfg == DEFAULTS["converge"]
    cfg["seeds"] = 99
    assert DEFAULTS["converge"]["seeds"] != 99


def test_unknown_family_and_unknown_field_raise():
    with pytest.raises(ConfigError, match="unknown experiment family"):
        resolve_config("warp-drive")
    with pytest.raises(ConfigError, match="converge.seedz"):
        resolve_config("converge", {"seedz": 10})
    # nested dotted path appears in the message
    with pytest.raises(ConfigError, match="one-attacker.train.etah"):
        resolve_config("one-attacker", {"train": {"etah": 0.5}})


def test_overrides_merge_deep_without_clobbering_siblings():
    cfg = resolve_config("one-attacker", {"train": {"epochs": 2}})
    assert cfg["train"]["epochs"] == 2
    assert cfg["train"]["eta"] == DEFAULTS["one-attacker"]["train"]["eta"]
    assert cfg["scale"] == DEFAULTS["one-attacker"]["scale"]
    # non-dict leaves replace wholesale
    cfg = resolve_config("one-attacker", {"temporal_setups": [[1, 1]]})
    assert cfg["temporal_setups"] == [[1, 1]]


def test_apply_overrides_does_not_touch_inputs():
    base = {"a": {"b": 1}, "c": 2}
    out = apply_overrides(base, {"a": {"b": 5}}, "fam")
    assert out == {"a": {"b": 5}, "c": 2}
    assert base == {"a": {"b": 1}, "c": 2}


def test_config_digest_is_order_insensitive_and_value_sensitive():
    a = {"x": 1, "y": {"z": [1, 2]}}
    b = {"y": {"z": [1, 2]}, "x": 1}
    assert config_digest(a) == config_digest(b)
    assert config_digest(a) != config_digest({"x": 2, "y": {"z": [1, 2]}})
    assert len(config_digest(a)) == 64


_TINY_CONVERGE = {"seeds": 2, "T": 60, "trace_seed": 0}


def test_run_family_writes_manifest_and_artifacts(tmp_path):
    out = tmp_path / "run"
    manifest = run_family("converge", out, _TINY_CONVERGE)
    assert manifest["family"] == "converge"
    assert manifest["config"]["seeds"] == 2
    assert manifest["digest"] == config_digest(manifest["config"])
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest
    assert "manifest.json" in manifest["artifacts"]
    for name in manifest["artifacts"]:
        assert (out / name).exists(), name
    # no timestamps or absolute paths leak into the manifest
    blob = json.dumps(manifest)
    assert str(tmp_path) not in blob


def test_run_family_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_family("converge", a, _TINY_CONVERGE)
    run_family("converge", b, _TINY_CONVERGE)
    names_a = sorted(p.name for p in a.iterdir())
    assert names_a == sorted(p.name for p in b.iterdir())
    for name in names_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_run_family_rejects_unknown_family(tmp_path):
    with pytest.raises(ConfigError):
        run_family("warp-drive", tmp_path / "x")


def test_converge_outputs_are_plausible(tmp_path):
    out = tmp_path / "run"
    manifest = run_family("converge", out, {"seeds": 2, "T": 400})
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "seed,f_gap,disagreement,attack_distance"
    assert len(report) == 3  # one row per seed
    traj = (out / "trajectory_clean.csv").read_text().splitlines()
    assert traj[0] == "t,f_gap,disagreement"
    assert len(traj) == 1 + 401
    rows = np.array([[float(v) for v in line.split(",")] for line in traj[1:]])
    # the optimality gap decays along the run
    assert rows[-1, 1] < 0.05 * rows[0, 1]
