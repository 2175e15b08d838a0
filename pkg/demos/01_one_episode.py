"""Walk through one episode by hand: observe, act, read the reward.

    python demos/01_one_episode.py
"""

from __future__ import annotations

from varapps.env import Env, EnvRequest

env = Env(EnvRequest("AddItem2ToDoListTask", seed=0))
print("goal:", env.goal)
print(env.observe().ax_tree)

# The home page links to each app. Bid 4 is the To-Do List link.
for text in ["finished()", "click('4')", "fill('12', 'Buy milk')", "click('13')"]:
    step = env.step(text)
    outcome = "ok" if step.parsed.ok else f"invalid ({step.parsed.category})"
    print(f"{step.index}: {text:<28} {outcome:<24} route={step.route:<8} reward={step.reward.reward}")

print("status:", env.status)
print("result:", env.result().to_dict())
