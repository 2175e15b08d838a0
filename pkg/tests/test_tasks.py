from __future__ import annotations

import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varapps.config import build_config
from varapps.env import Env, EnvRequest
from varapps.state import TodoItem, canonicalize, init_state
from varapps.tasks import (
    DEFAULT_HORIZON,
    SINGLE_GOAL_TASKS,
    TaskError,
    UnknownTask,
    all_tasks,
    apply_ops,
    episode_outcome,
    evaluate,
    expected_state,
    get_task,
    multi_step_tasks,
    parse_tasks,
    ref_values,
    sample_goal,
    single_goal_tasks,
)

import mutations


def test_registry_covers_the_single_goal_set():
    ids = [t.id for t in single_goal_tasks()]
    assert sorted(ids) == sorted(SINGLE_GOAL_TASKS) and len(ids) == 15
    assert all(len(t.prompts) >= 2 for t in single_goal_tasks())
    per_app = Counter(app for t in single_goal_tasks() for app in t.relevant_apps if app != "cart")
    assert set(per_app) == {"calendar", "todo", "messenger", "maps", "codeeditor", "shop"}
    assert min(per_app.values()) >= 2


def test_multi_step_registry():
    tasks = multi_step_tasks()
    assert len(tasks) >= 10
    assert all(t.total_steps >= 2 for t in tasks)
    assert set(all_tasks()) == set(SINGLE_GOAL_TASKS) | {t.id for t in tasks}


def test_unknown_task():
    with pytest.raises(UnknownTask):
        get_task("FlyToTheMoonTask")


def test_bad_op_rejected():
    with pytest.raises(TaskError):
        parse_tasks("- id: T\n  relevant_apps: [todo]\n  prompts: [x]\n  ops: [{op: teleport}]\n")


# ---------------------------------------------------------------------------
# Goals


def test_message_prompt_seed_zero():
    assert sample_goal("MessageXTask", 0) == "Ask Bob 'Are we playing basketball on Saturday?'"


@pytest.mark.parametrize("task_id", sorted(all_tasks()))
def test_goals_are_deterministic_round_robin(task_id, s0):
    task = get_task(task_id)
    n = len(task.prompts)
    goals = [sample_goal(task, seed, s0) for seed in range(2 * n)]
    assert goals == [sample_goal(task, seed, s0) for seed in range(2 * n)]
    assert goals[:n] == goals[n:]
    assert len(set(goals[:n])) == n
    assert all("{" not in g for g in goals)


def test_prompts_follow_content_variation():
    de = init_state(build_config(["german"]))
    en_goal = sample_goal("MarkItemAsDoneTask", 0)
    de_goal = sample_goal("MarkItemAsDoneTask", 0, de)
    assert en_goal != de_goal and de.todos[1].text in de_goal


# ---------------------------------------------------------------------------
# Rewards


def test_add_todo_reward(s0):
    st_ = replace(s0, todos=s0.todos + (TodoItem("Buy milk"),))
    assert evaluate(s0, st_, "AddItem2ToDoListTask").reward == 1.0
    assert evaluate(s0, s0, "AddItem2ToDoListTask").reward == 0.0
    wrong = replace(s0, todos=s0.todos + (TodoItem("Buy milk", True),))
    assert evaluate(s0, wrong, "AddItem2ToDoListTask").reward == 0.0


def test_entered_text_is_trimmed():
    env = Env(EnvRequest("AddItem2ToDoListTask"))
    for text in ("click('4')", "fill('12', '  Buy milk ')", "click('13')"):
        env.step(text)
    assert env.status == "succeeded"


@pytest.mark.parametrize("task_id", [t for t in SINGLE_GOAL_TASKS if t != "NavigateToPageTask"])
def test_untouched_state_scores_zero(s0, task_id):
    assert evaluate(s0, s0, task_id).reward == 0.0


@pytest.mark.parametrize("task_id", sorted(all_tasks()))
def test_expected_state_scores_full(s0, task_id):
    result = evaluate(s0, expected_state(s0, task_id), task_id)
    assert result.reward == 1.0 and result.success and result.at_least_one_step


def test_navigation_reads_route(s0):
    on_todo = replace(s0, nav=replace(s0.nav, route="todo"))
    on_maps = replace(s0, nav=replace(s0.nav, route="maps"))
    assert evaluate(s0, on_todo, "NavigateToPageTask").reward == 1.0
    assert evaluate(s0, on_maps, "NavigateToPageTask").reward == 0.0
    target = expected_state(s0, "AddItem2ToDoListTask")
    assert evaluate(s0, replace(target, nav=replace(target.nav, route="maps")), "AddItem2ToDoListTask").success


def test_transient_ui_state_is_ignored(s0):
    target = expected_state(s0, "AddEventTask")
    noisy = replace(target, nav=replace(target.nav, scroll_offset=120, open_dialog="x", pending_form=(("f", "v"),)))
    assert evaluate(s0, noisy, "AddEventTask").success


@pytest.mark.parametrize("task_id", SINGLE_GOAL_TASKS)
def test_side_effects_zero_the_reward(s0, task_id):
    rng = random.Random(task_id)
    target = expected_state(s0, task_id)
    keep_route = get_task(task_id).reads_route
    text = canonicalize(target).text if keep_route else canonicalize(target).without_route().text
    hits = 0
    for _ in range(40):
        bad = mutations.mutate(target, rng, with_route=keep_route)
        canon = canonicalize(bad)
        if (canon.text if keep_route else canon.without_route().text) == text:
            continue
        assert evaluate(s0, bad, task_id).reward == 0.0
        hits += 1
    assert hits >= 30


@settings(max_examples=60)
@given(st.sampled_from(SINGLE_GOAL_TASKS), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_reward_implies_exact_target(s0, task_id, seed, n_mutations):
    # Any state that scores 1 must canonically equal the target state.
    rng = random.Random(seed)
    target = expected_state(s0, task_id)
    state = target
    for _ in range(n_mutations):
        state = mutations.mutate(state, rng, with_route=get_task(task_id).reads_route)
    if evaluate(s0, state, task_id).success:
        a, b = canonicalize(state), canonicalize(target)
        assert (a.text if get_task(task_id).reads_route else a.without_route().text) == (
            b.text if get_task(task_id).reads_route else b.without_route().text
        )


# ---------------------------------------------------------------------------
# Trajectories


def test_first_hit_then_undo_still_succeeds(s0):
    target = expected_state(s0, "AddItem2ToDoListTask")
    outcome = episode_outcome([s0, s0, target, s0, s0], "AddItem2ToDoListTask")
    assert outcome.success and outcome.reward == 1.0
    assert outcome.achieved_step == 2 and outcome.steps_taken == 2


def test_noop_trajectory_uses_horizon(s0):
    outcome = episode_outcome([s0] * (DEFAULT_HORIZON + 5), "AddEventTask")
    assert outcome.reward == 0.0 and not outcome.success
    assert outcome.steps_taken == DEFAULT_HORIZON and outcome.achieved_step is None


def test_success_after_horizon_does_not_count(s0):
    target = expected_state(s0, "AddEventTask")
    states = [s0] * 6 + [target]
    assert episode_outcome(states, "AddEventTask", horizon=5).reward == 0.0
    assert episode_outcome(states, "AddEventTask", horizon=6).success


def test_empty_trajectory_rejected():
    with pytest.raises(TaskError):
        episode_outcome([], "AddEventTask")


# ---------------------------------------------------------------------------
# Multi-step


def test_partial_credit_add_two_todos(s0):
    task = get_task("AddTwoTodosTask")
    first = apply_ops(s0, task.steps[0])
    both = expected_state(s0, task)
    assert evaluate(s0, first, task).reward == 0.5
    assert evaluate(s0, first, task).at_least_one_step
    assert evaluate(s0, both, task).reward == 1.0
    spoiled = replace(first, places=first.places[1:])
    assert evaluate(s0, spoiled, task).reward == 0.0


@pytest.mark.parametrize("task_id", [t.id for t in multi_step_tasks()])
def test_partial_credit_counts_completed_steps(s0, task_id):
    task = get_task(task_id)
    values = ref_values(task, s0)
    rewards = [evaluate(s0, s0, task).reward]
    for k in range(1, task.total_steps + 1):
        state = apply_ops(s0, [op for step in task.steps[:k] for op in step], values)
        result = evaluate(s0, state, task)
        assert result.steps_completed == k
        rewards.append(result.reward)
    assert rewards == sorted(rewards) and rewards[0] == 0.0 and rewards[-1] == 1.0
    assert rewards == [k / task.total_steps for k in range(task.total_steps + 1)]


def test_best_partial_credit_reported_with_first_step(s0):
    task = get_task("AddTwoTodosTask")
    first = apply_ops(s0, task.steps[0])
    outcome = episode_outcome([s0, first, first, s0], task, horizon=3)
    assert outcome.reward == 0.5 and outcome.achieved_step == 1 and not outcome.success
