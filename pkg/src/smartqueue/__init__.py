"""Adaptive weighted fair queuing with multi-agent deep Q-learning.

Subpackages: ``nn`` (numpy network core), ``netsim`` (packet simulator),
``agents`` (DGN, MADQN and PQ policies) and ``harness`` (scenarios,
campaigns, result files). ``env`` couples agents to the simulator.
"""

__version__ = "0.1.0"
