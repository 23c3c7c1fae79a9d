"""How one agent's observation turns into a state, an action and a reward.

Walks a single snapshot by hand: bin the measured throughput and delay, pick a
weight nudge, and score the SLA outcome the way the learners see it.

    python demos/reward_walkthrough.py
"""

from smartqueue.env import MBPS, ObservationBounds, Thresholds, action_signs, apply_action, compute_reward, get_discrete_state
from smartqueue.env import state_features

th = Thresholds(throughput=(12 * MBPS, 8 * MBPS, 6 * MBPS), delay=(0.15, 0.3, 0.4))
bounds = ObservationBounds.for_delay_cap(20 * MBPS, 1.0)

# gold is comfortably served, silver is just short, bronze is nearly starved
obs = (13.2 * MBPS, 0.04, 7.4 * MBPS, 0.21, 1.1 * MBPS, 0.93)
bins = get_discrete_state(obs, bounds.low, bounds.high)
print("observation  ", [f"{x / MBPS:.1f} Mbps" if i % 2 == 0 else f"{x:.2f} s" for i, x in enumerate(obs)])
print("bins         ", bins.tolist())
print("net features ", [round(float(f), 3) for f in state_features(bins)])

tp, delay = obs[0::2], obs[1::2]
r, best = compute_reward((0, 1, 2), tp, delay, th, congested=[True, True, True])
print(f"\nreward {r:+.1f} of a possible {best:+.1f}; done = {r >= best}")

weights = (0.55, 0.30, 0.15)
print("\naction  signs (g, s, b)  next weights")
for a in range(8):
    print(f"  {a}     {action_signs(a)!s:<17} {apply_action(weights, a)}")
print("\nshifting capacity towards silver and bronze means taking it from gold: action 3 (-, +, +)")
