"""Train DGN on the desk-scale SD-WAN and put it next to strict priority.

Three branches send gold, silver and bronze UDP traffic over congested
uplinks to HQ. After training, both policies run the same 60 snapshots and
the script prints how often each met every group's SLA.

    python demos/desk_experiment.py            # full 3000-step run, ~15 min
    python demos/desk_experiment.py --steps 600
"""

import argparse
import time

from smartqueue.agents import TrainConfig, make_policy, train
from smartqueue.env import EnvConfig, QueueingEnv
from smartqueue.harness import load_scenario, run_campaign

ap = argparse.ArgumentParser()
ap.add_argument("--steps", type=int, default=3000)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

sc = load_scenario("sdwan-desk")
dgn = make_policy("dgn", sc.n_agents, seed=args.seed)
env = QueueingEnv(sc, EnvConfig(snapshot=sc.snapshot, seed=args.seed))
t0 = time.time()
res = train(env, dgn, TrainConfig(steps=args.steps, seed=args.seed))
curve = res.loss_curve()
print(f"trained {args.steps} steps in {time.time() - t0:.0f} s; loss first/last 100: "
      f"{curve[:100].mean():.3f} / {curve[-100:].mean():.3f}")

eval_seed = 1000 + args.seed
for policy in (dgn, make_policy("pq", sc.n_agents)):
    sla = run_campaign(sc, policy, sc.snapshots, seed=eval_seed).sla()
    tp = "  ".join(f"{g} {sla['throughput'][g]:.2f}" for g in ("gold", "silver", "bronze"))
    d = "  ".join(f"{g} {sla['delay'][g]:.2f}" for g in ("gold", "silver", "bronze"))
    print(f"{policy.name:<5} throughput met (congested): {tp}   delay met: {d}")
