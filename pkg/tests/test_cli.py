import json

import pytest

from resque.cli import main


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "seeds: [0]\n"
        "dataset: {num_classes: 3, samples_per_class: 12, height: 8, width: 8}\n"
        "model: {arch: mlp, hidden: [8]}\n"
        "train: {max_epochs: 2}\n"
        "retrain: {max_epochs: 1}\n"
        "timing: false\n"
        "noises: [{kind: gaussian, levels: [1, 5, 9]}]\n")
    return str(path)


def test_single_step_commands(tmp_path, config, capsys):
    d = str(tmp_path / "data.bin")
    ck = str(tmp_path / "model.bin")
    assert main(["gen-data", "--config", config, "--out", d, "--split"]) == 0
    assert main(["train", "--config", config, "--data", d + ".original", "--out", ck]) == 0
    capsys.readouterr()
    assert main(["shift", "--data", d + ".shifted", "--kind", "blur", "--level", "4",
                 "--seed", "1", "--out", str(tmp_path / "s.bin")]) == 0
    assert main(["resque-dist", "--checkpoint", ck, "--original", d + ".original",
                 "--shifted", str(tmp_path / "s.bin")]) == 0
    value = json.loads(capsys.readouterr().out)["resque_dist"]
    assert 0 <= value <= 3.1416
    assert main(["resque-task", "--config", config, "--checkpoint", ck, "--data", d]) == 0
    assert "index" in json.loads(capsys.readouterr().out)
    assert main(["retrain", "--config", config, "--checkpoint", ck, "--data",
                 str(tmp_path / "s.bin"), "--out", str(tmp_path / "m2.bin")]) == 0
    assert json.loads(capsys.readouterr().out)["epochs"] == 1


def test_suite_and_report(tmp_path, config, capsys):
    rec = str(tmp_path / "r.jsonl")
    assert main(["suite-dist", "--config", config, "--out", rec]) == 0
    assert main(["report", rec, "--out", str(tmp_path / "rep")]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["measure"] for r in rows][:2] == ["epochs", "total_grad_norm"]


def test_exit_codes(tmp_path, config):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense: true\n")
    assert main(["suite-dist", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert main(["report", str(empty)]) == 4

    d, ck = str(tmp_path / "d.bin"), str(tmp_path / "m.bin")
    main(["gen-data", "--config", config, "--out", d])
    main(["train", "--config", config, "--data", d, "--out", ck])
    diverge = tmp_path / "div.yaml"
    diverge.write_text("retrain: {optimizer: sgd, lr: 1.0e+200, max_epochs: 1}\n")
    assert main(["retrain", "--config", str(diverge), "--checkpoint", ck, "--data", d]) == 3
    assert main(["resque-task", "--config", str(diverge), "--checkpoint", ck, "--data", d]) == 3
