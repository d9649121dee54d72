import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossmodal_il.harness import (
    IDENTITY_LEXICON,
    AblationTable,
    EvalReport,
    ExpertAgent,
    NoiseSweepReport,
    SeedOverlapError,
    StudentAgent,
    TaskResult,
    ablation_suite,
    evaluate,
    noise_sweep,
    paraphrase_instructions,
    run_episodes,
    trajectory_records,
    variant_name,
)
from crossmodal_il.policy import PolicyParams
from crossmodal_il.tasks import family_suite, generate_tasks, make_instance
from crossmodal_il.trainer import TrainConfig
from crossmodal_il.world import goal_reached

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def tasks():
    return generate_tasks(20, seed=41)


# ------------------------------------------------------------------ reports


rows = st.lists(st.tuples(st.booleans(), st.integers(1, 30)), min_size=1, max_size=40)


@settings(max_examples=100, deadline=None)
@given(rows=rows)
def test_report_aggregates_are_pure(rows):
    per = [TaskResult(f"t{i}", "PickPlace", s, n) for i, (s, n) in enumerate(rows)]
    rep = EvalReport(per, seed=0)
    assert rep.success_rate == sum(s for s, _ in rows) / len(rows)
    assert rep.avg_steps == pytest.approx(np.mean([n if s else 30 for s, n in rows]))
    assert EvalReport(list(per), seed=0).to_json() == rep.to_json()


def test_failures_charged_full_cap():
    rep = EvalReport([TaskResult("a", "PickPlace", True, 4), TaskResult("b", "PickPlace", False, 9)], 0)
    assert rep.avg_steps == 17.0
    assert rep.to_csv().splitlines() == ["task_id,task_type,success,steps", "a,PickPlace,1,4", "b,PickPlace,0,9"]


def test_expert_scores_perfectly(tasks):
    rep = evaluate(ExpertAgent(), tasks)
    assert rep.success_rate == 1.0
    assert rep.avg_steps < 30


def test_zero_policy_near_random(tasks):
    rep = evaluate(PolicyParams.zeros(4096), tasks)
    assert rep.success_rate <= 0.1


def test_empty_tasks_rejected():
    with pytest.raises(ValueError):
        evaluate(ExpertAgent(), [])


def test_seed_overlap_guard(tasks):
    with pytest.raises(SeedOverlapError):
        evaluate(ExpertAgent(), tasks, train_seeds=[tasks[3].seed])
    evaluate(ExpertAgent(), tasks[:2], train_seeds=[-1])


def test_evaluation_deterministic(tasks):
    p = PolicyParams(np.random.default_rng(1).normal(size=4096))
    a = evaluate(StudentAgent(p, visual_noise=0.2), tasks, seed=5)
    b = evaluate(StudentAgent(p, visual_noise=0.2), tasks, seed=5, workers=4)
    assert a.to_json() == b.to_json()


def test_episodes_do_not_mutate_tasks(tasks):
    before = [t.world.state_hash() for t in tasks[:4]]
    run_episodes(ExpertAgent(), tasks[:4], 0)
    assert [t.world.state_hash() for t in tasks[:4]] == before


def test_trajectory_records_carry_both_views():
    inst = make_instance(3, "kitchen")
    ep = run_episodes(ExpertAgent(), [inst], 0)[0]
    recs = list(trajectory_records(inst, ep))
    assert len(recs) == ep.steps + 1
    assert all(len(r["s_v"]) == 256 and isinstance(r["s_l"], str) for r in recs)
    assert recs[-1]["action"] is None
    json.dumps(recs)


# -------------------------------------------------------------- noise sweep


def test_zero_rate_matches_evaluate(tasks):
    p = PolicyParams(np.random.default_rng(2).normal(size=4096))
    rep = noise_sweep("student-visual", tasks, [0.0], [3], params=p)
    assert rep.success_by_rate == [evaluate(p, tasks, seed=3).success_rate]
    rep = noise_sweep("expert-text", tasks[:6], [0.0], [3])
    assert rep.success_by_rate == [evaluate(ExpertAgent(blind=True), tasks[:6], seed=3).success_rate]


def test_sweep_report_lengths(tasks):
    rep = noise_sweep("expert-text", tasks[:4], [0.0, 0.3], [0, 1])
    assert len(rep.rates) == len(rep.success_by_rate) == 2
    assert len(rep.per_seed) == 2
    assert rep.to_csv().count("\n") == 3
    with pytest.raises(ValueError):
        NoiseSweepReport([0.0, 0.1], [1.0], "text")


@pytest.mark.parametrize("rates", [[-0.1], [0.2, 1.5]])
def test_sweep_rejects_bad_rates(rates, tasks):
    with pytest.raises(ValueError):
        noise_sweep("expert-text", tasks, rates, [0])


def test_sweep_rejects_unknown_channel(tasks):
    with pytest.raises(ValueError):
        noise_sweep("student-text", tasks, [0.0], [0])


def test_full_visual_noise_no_better_than_random(tasks):
    zero = evaluate(PolicyParams.zeros(4096), tasks).success_rate
    p = PolicyParams(np.random.default_rng(4).normal(size=4096))
    rep = noise_sweep("student-visual", tasks, [1.0], [0, 1], params=p)
    assert rep.success_by_rate[0] <= zero + 0.05


# ----------------------------------------------------------------- ablation


def _tiny():
    return TrainConfig(max_trials=2, epochs_per_trial=1, policy_dim=4096)


def test_ablation_default_only():
    base = _tiny()
    suite = [make_instance(500, "kitchen", "PickPlace")]
    table = ablation_suite([base], suite, [0], PolicyParams.zeros(4096), base)
    assert list(table.curves()) == ["default"]
    assert len(table.curves()["default"]) == 2


def test_ablation_rows_cover_grid():
    base = _tiny()
    suite = [make_instance(501, "kitchen", "PickPlace")]
    variants = [base, replace(base, loss_mode="ce")]
    table = ablation_suite(variants, suite, [0, 1], PolicyParams.zeros(4096), base)
    assert len(table.rows) == 2 * 2 * 2
    assert table.to_csv().count("\n") == 1 + 8
    assert set(table.curves()) == {"default", "loss_mode=ce"}


def test_ablation_rejects_two_field_variant():
    base = _tiny()
    bad = replace(base, loss_mode="ce", retrospection=False)
    with pytest.raises(ValueError):
        ablation_suite([bad], [], [0], PolicyParams.zeros(4096), base)


def test_variant_name_ignores_seed():
    base = TrainConfig()
    assert variant_name(base, replace(base, seed=9)) == "default"
    assert variant_name(base, replace(base, bc_init=False)) == "bc_init=False"


def test_ablation_curves_average_seeds():
    t = AblationTable(2, [("a", 0, 1, 0.0), ("a", 1, 1, 1.0), ("a", 0, 2, 1.0), ("a", 1, 2, 1.0)])
    assert t.curves() == {"a": [0.5, 1.0]}


# --------------------------------------------------------------- paraphrase


def _suite():
    return family_suite(0) + family_suite(1)


def test_identity_lexicon_is_noop():
    ts = _suite()
    out = paraphrase_instructions(ts, IDENTITY_LEXICON)
    assert [t.task.instruction for t in out] == [t.task.instruction for t in ts]


def test_paraphrase_golden():
    ts = _suite()
    got = [[a.task.instruction, b.task.instruction] for a, b in zip(ts, paraphrase_instructions(ts, seed=0))]
    assert got == json.loads((DATA / "paraphrase_golden.json").read_text())


def test_paraphrase_changes_only_instruction():
    ts = _suite()
    for a, b in zip(ts, paraphrase_instructions(ts, seed=3)):
        assert b.task.instruction != a.task.instruction
        assert replace(b.task, instruction=a.task.instruction) == a.task
        assert b.world.state_hash() == a.world.state_hash()
        assert goal_reached(a.world, a.task) == goal_reached(b.world, b.task)


def test_missing_verb_passes_through(caplog):
    ts = _suite()
    lex = {k: v for k, v in IDENTITY_LEXICON.items() if k != "look"}
    lex["put"] = ["place"]
    with caplog.at_level(logging.INFO):
        out = paraphrase_instructions(ts, lex)
    for a, b in zip(ts, out):
        if a.task.task_type.value == "LookInLight":
            assert b is a
        elif a.task.task_type.value in ("PickPlace", "PickTwoPlace"):
            assert "place" in b.task.instruction
    assert any("left unchanged" in r.message for r in caplog.records)


def test_paraphrase_deterministic():
    ts = _suite()
    a = [t.task.instruction for t in paraphrase_instructions(ts, seed=7)]
    b = [t.task.instruction for t in paraphrase_instructions(ts, seed=7)]
    assert a == b
