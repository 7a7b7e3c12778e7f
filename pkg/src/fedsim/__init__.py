"""Deterministic federated optimization simulator.

Implements FedaGrac (calibrated local SGD with a two-phase orientation
exchange) and the FedAvg, FedNova, FedProx and SCAFFOLD baselines on
desk-scale convex objectives, together with the analytic oracles used to
check them.
"""

__version__ = "0.1.0"
