"""Three saturating traffic classes on one 10 Mbps link, scheduled two ways.

Under WFQ each class gets capacity in proportion to its weight. Under strict
priority gold and silver take what they want and bronze is left with the rest.

    python demos/wfq_vs_priority.py
"""

import math

from smartqueue.netsim import FlowGroup, FlowSpec, Link, RateProfile, Simulator, Topology, Transport

MBPS = 1e6


def shares(scheduler, weights=(0.5, 0.3, 0.2), demand=(4.5, 4.5, 4.5), seconds=10.0):
    topo = Topology(["a", "b"], [Link("a", "b", 10 * MBPS, 0.01, True)])
    # a very long period with phase pi/2 keeps the on-off source flat at its peak
    flows = [
        FlowSpec(g, FlowGroup(g), "a", "b", (0,), RateProfile(d * MBPS, 1e6, math.pi / 2), Transport.OPEN_LOOP)
        for g, d in enumerate(demand)
    ]
    sim = Simulator(topo, flows, weights={0: weights}, scheduler=scheduler)
    sim.run(seconds)
    m = sim.collect_snapshot()
    return [t / MBPS for t in m.group_throughput], m.group_delay


if __name__ == "__main__":
    print("offered 4.5 Mbps per class on a 10 Mbps link\n")
    for name, kw in [("wfq 0.5/0.3/0.2", {"scheduler": "wfq"}),
                     ("wfq 0.2/0.3/0.5", {"scheduler": "wfq", "weights": (0.2, 0.3, 0.5)}),
                     ("strict priority", {"scheduler": "pq"})]:
        tp, delay = shares(**kw)
        cells = "  ".join(f"{lab} {t:5.2f} Mbps {1000 * d:7.1f} ms" for lab, t, d in zip(("gold", "silver", "bronze"), tp, delay))
        print(f"{name:<17} {cells}")
