import json

import pytest

from crossmodal_il.cli import build_config, build_parser, main
from crossmodal_il.policy import PolicyParams
from crossmodal_il.tasks import load_tasks

FAST = ["--policy-dim", "4096", "--trials", "2", "--epochs-per-trial", "1",
        "--bc-epochs", "2", "--demo-tasks", "6"]


def run(*argv):
    return main([str(a) for a in argv])


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_gen_tasks(tmp_path):
    assert run("gen-tasks", "--tasks", 5, "--seed", 3, "--out", tmp_path) == 0
    tasks = load_tasks(tmp_path / "tasks.jsonl")
    assert len(tasks) == 5
    m = manifest(tmp_path)
    assert m["command"] == "gen-tasks" and m["task_seeds"] == [t.seed for t in tasks]
    assert m["version"]


def test_train_then_evaluate(tmp_path):
    train = tmp_path / "train"
    assert run("train", "--tasks", 2, "--out", train, "--no-timing", *FAST) == 0
    for name in ["params.json", "trial_log.jsonl", "curve.csv", "feedback.jsonl", "manifest.json"]:
        assert (train / name).exists()
    PolicyParams.load(train / "params.json")
    m = manifest(train)
    assert m["config"]["max_trials"] == 2 and m["demo_task_seeds"]
    assert "wallclock" not in (train / "trial_log.jsonl").read_text()

    ev = tmp_path / "eval"
    rc = run("evaluate", "--tasks", 3, "--seed", 50, "--params", train / "params.json", "--out", ev,
             "--train-manifest", train / "manifest.json", "--trajectories", "--policy-dim", 4096)
    assert rc == 0
    rep = json.loads((ev / "report.json").read_text())
    assert len(rep["perTask"]) == 3
    row = json.loads((ev / "trajectories.jsonl").read_text().splitlines()[0])
    assert len(row["s_v"]) == 256 and "s_l" in row

    # same tasks as training: the guard refuses
    rc = run("evaluate", "--tasks", 2, "--params", train / "params.json", "--out", ev,
             "--train-manifest", train / "manifest.json")
    assert rc == 2


def test_expert_evaluate(tmp_path, capsys):
    assert run("evaluate", "--agent", "expert", "--tasks", 4, "--seed", 9, "--out", tmp_path) == 0
    assert "success_rate=1.0000" in capsys.readouterr().out
    assert (tmp_path / "report.csv").read_text().startswith("task_id,")


def test_train_bc(tmp_path):
    assert run("train-bc", "--out", tmp_path, *FAST) == 0
    lines = (tmp_path / "bc_loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 3


def test_collect_demos(tmp_path):
    assert run("collect-demos", "--tasks", 2, "--out", tmp_path) == 0
    row = json.loads((tmp_path / "demos.jsonl").read_text().splitlines()[0])
    assert row["action"] in row["candidates"]


def test_noise_sweep_expert_text(tmp_path):
    rc = run("noise-sweep", "--channel", "expert-text", "--tasks", 3, "--rates", "0,0.3",
             "--seeds", "0", "--out", tmp_path)
    assert rc == 0
    assert (tmp_path / "noise.csv").read_text().count("\n") == 3


def test_noise_sweep_bad_rate(tmp_path):
    rc = run("noise-sweep", "--channel", "expert-text", "--rates", "0,1.2", "--out", tmp_path)
    assert rc == 2


def test_noise_sweep_student_needs_params(tmp_path):
    assert run("noise-sweep", "--channel", "student-visual", "--out", tmp_path) == 2


def test_ablate_and_paraphrase(tmp_path):
    tf = tmp_path / "tasks"
    run("gen-tasks", "--suite", "0", "--out", tf)
    ab = tmp_path / "ab"
    rc = run("ablate", "--variants", "default,ce", "--seeds", "0", "--tasks-file", tf / "tasks.jsonl",
             "--out", ab, *FAST)
    assert rc == 0
    lines = (ab / "ablation.csv").read_text().splitlines()
    assert lines[0] == "variant,seed,trial,success_rate" and len(lines) == 1 + 2 * 2

    p = tmp_path / "p.json"
    PolicyParams.zeros(4096).save(p)
    pp = tmp_path / "pp"
    assert run("paraphrase-eval", "--params", p, "--suite", "0", "--out", pp) == 0
    res = json.loads((pp / "paraphrase.json").read_text())
    assert len(res["instructions"]) == 6 and "drop" in res


def test_unknown_variant(tmp_path):
    assert run("ablate", "--variants", "nope", "--out", tmp_path) == 2


@pytest.mark.parametrize("argv", [["--beta", "-1"], ["--lr", "0"], ["--trials", "0"], ["--batch-size", "0"]])
def test_bad_config_exit_2(tmp_path, argv, capsys):
    assert run("train", "--out", tmp_path, *argv) == 2
    assert capsys.readouterr().err.startswith("config error")


def test_config_file_unknown_field(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("beta: 0.2\nwarp_factor: 9\n")
    assert run("train", "--config", cfg, "--out", tmp_path) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta": 0.2, "batch_size": 8}))
    args = build_parser().parse_args(["train", "--config", str(cfg), "--beta", "0.5"])
    c = build_config(args)
    assert c.beta == 0.5 and c.batch_size == 8


def test_missing_tasks_file(tmp_path):
    assert run("evaluate", "--agent", "expert", "--tasks-file", tmp_path / "none.jsonl", "--out", tmp_path) == 2
