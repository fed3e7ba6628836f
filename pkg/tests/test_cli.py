import json

import pytest

from ddgcn import cli, data, graph


def base_config(tmp_path, **overrides):
    doc = {
        "seed": 0,
        "topology": "toy5",
        "strategy": "activity",
        "stream": "joint",
        "output_dir": str(tmp_path / "out"),
        "model": {
            "window": [4, 5], "heads": 4, "kernel": 3, "groups": 4,
            "channels": [8, 8], "strides": [1, 1], "in_channels": 3,
        },
        "train": {"epochs": 4, "batch_size": 8, "base_lr": 0.005, "seed": 0},
        "data": {"synthetic": {"num_classes": 3, "samples_per_class": 2,
                               "frames": 8, "noise_std": 0.0, "seed": 5}},
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_train_writes_history_and_checkpoint(tmp_path, capsys):
    config = write_config(tmp_path, base_config(tmp_path))
    assert cli.main(["train", "--config", config]) == 0
    out = capsys.readouterr().out
    assert "train accuracy" in out
    assert (tmp_path / "out" / "history_joint.csv").exists()
    assert (tmp_path / "out" / "model_joint.ckpt").exists()


def test_train_is_byte_deterministic(tmp_path):
    config = write_config(tmp_path, base_config(tmp_path))
    assert cli.main(["train", "--config", config]) == 0
    first = (tmp_path / "out" / "history_joint.csv").read_bytes()
    assert cli.main(["train", "--config", config]) == 0
    assert (tmp_path / "out" / "history_joint.csv").read_bytes() == first


def test_eval_single_and_fused(tmp_path, capsys):
    config = write_config(tmp_path, base_config(tmp_path, stream="fusion"))
    assert cli.main(["train", "--config", config]) == 0
    joint = str(tmp_path / "out" / "model_joint.ckpt")
    bone = str(tmp_path / "out" / "model_bone.ckpt")
    capsys.readouterr()

    assert cli.main(["eval", "--config", config, "--set", "stream=joint",
                     "--checkpoint", joint]) == 0
    assert "top1_accuracy" in capsys.readouterr().out

    assert cli.main(["eval", "--config", config, "--checkpoint", joint,
                     "--checkpoint2", bone]) == 0
    assert "(fusion)" in capsys.readouterr().out


def test_eval_fusion_without_second_checkpoint_is_config_error(tmp_path):
    config = write_config(tmp_path, base_config(tmp_path, stream="fusion"))
    assert cli.main(["train", "--config", config]) == 0
    joint = str(tmp_path / "out" / "model_joint.ckpt")
    assert cli.main(["eval", "--config", config, "--checkpoint", joint]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


def test_unknown_config_key(tmp_path):
    doc = base_config(tmp_path)
    doc["windowing"] = 4
    config = write_config(tmp_path, doc)
    assert cli.main(["train", "--config", config]) == cli.EXIT_CONFIG


def test_invalid_stream_and_strategy(tmp_path):
    config = write_config(tmp_path, base_config(tmp_path, stream="video"))
    assert cli.main(["train", "--config", config]) == cli.EXIT_CONFIG
    config = write_config(tmp_path, base_config(tmp_path, strategy="banana"), "c2.json")
    assert cli.main(["train", "--config", config]) == cli.EXIT_CONFIG


def test_missing_dataset_file(tmp_path):
    doc = base_config(tmp_path)
    doc["data"] = {"file": str(tmp_path / "absent.jsonl"), "target_frames": 8}
    doc["model"]["num_classes"] = 3
    config = write_config(tmp_path, doc)
    assert cli.main(["train", "--config", config]) == cli.EXIT_DATA


def test_malformed_dataset_file(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{broken\n")
    doc = base_config(tmp_path)
    doc["data"] = {"file": str(bad), "target_frames": 8}
    doc["model"]["num_classes"] = 3
    config = write_config(tmp_path, doc)
    assert cli.main(["train", "--config", config]) == cli.EXIT_DATA


def test_train_from_jsonl_file(tmp_path):
    spec = data.SyntheticSpec(num_classes=2, samples_per_class=2, frames=8,
                              topology=graph.get_topology("toy5"), seed=3)
    path = tmp_path / "ds.jsonl"
    data.save_dataset(data.generate_synthetic(spec), path)
    doc = base_config(tmp_path)
    doc["data"] = {"file": str(path), "target_frames": 8}
    doc["model"]["num_classes"] = 2
    config = write_config(tmp_path, doc)
    assert cli.main(["train", "--config", config]) == 0


def test_set_overrides(tmp_path, capsys):
    config = write_config(tmp_path, base_config(tmp_path))
    assert cli.main(["train", "--config", config,
                     "--set", "train.epochs=2",
                     "--set", "output_dir=" + str(tmp_path / "other")]) == 0
    assert (tmp_path / "other" / "history_joint.csv").exists()
    history = (tmp_path / "other" / "history_joint.csv").read_text().strip().splitlines()
    assert len(history) == 3  # header + 2 epochs

    assert cli.main(["train", "--config", config, "--set", "not-an-override"]) == cli.EXIT_CONFIG


def test_gradcheck_passes_on_reduced_config(tmp_path, capsys):
    config = write_config(tmp_path, base_config(tmp_path))
    assert cli.main(["gradcheck", "--config", config]) == 0
    out = capsys.readouterr().out
    assert "gradcheck model" in out
    assert "FAIL" not in out


def test_inspect_partition_activity_toy2(tmp_path, capsys):
    doc = base_config(tmp_path, topology="toy2")
    doc["model"]["window"] = [4, 2]
    doc["model"]["num_classes"] = 3
    config = write_config(tmp_path, doc)
    csv_path = tmp_path / "masks.csv"
    assert cli.main(["inspect-partition", "--config", config,
                     "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    # the hub's only neighbor is a leaf, subset 0
    assert "root  0 (hub): self->1  1(tip)->0" in out
    assert "subset 0 normalized adjacency:" in out
    assert csv_path.exists()
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "subset,row,col,value"
    assert len(lines) == 1 + 3 * 4  # three subsets of a 2x2 matrix


def test_export_metrics_passthrough_and_merge(tmp_path, capsys):
    config = write_config(tmp_path, base_config(tmp_path))
    assert cli.main(["train", "--config", config]) == 0
    history = tmp_path / "out" / "history_joint.csv"

    merged = tmp_path / "merged.csv"
    assert cli.main(["export-metrics", "--in", str(history), "--out", str(merged)]) == 0
    assert merged.read_text() == history.read_text()

    both = tmp_path / "both.csv"
    assert cli.main(["export-metrics", "--in", str(history), "--in", str(history),
                     "--out", str(both)]) == 0
    lines = both.read_text().strip().splitlines()
    assert lines[0] == "epoch,lr,loss,accuracy,source"
    assert len(lines) == 1 + 2 * 4

    assert cli.main(["export-metrics", "--in", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path / "x.csv")]) == cli.EXIT_DATA


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
