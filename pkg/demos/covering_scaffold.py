"""Strongly adaptive covering: restarts at every dyadic scale at once.

The doubling learner restarts when the observed path outruns its budget,
but it must be fed path increments.  The covering scaffold needs no side
information at all: it spawns a fresh base learner on every dyadic
interval of the horizon and mixes the awake ones with sleeping-expert
Prod weights, so some base always happens to have restarted near the
latest drift.  This run compares a single untuned adaptive arm with the
scaffold across drift budgets and reports the scale-free regret ratio
regret / sqrt(T * D * (C_T + D)), which should stay flat as drift grows.
"""

import math

import numpy as np

from driftlab.combiners import LossRange, Scaffold
from driftlab.envs import DriftingQuadraticEnv
from driftlab.geometry import Interval, euclidean_geometry
from driftlab.learners import AdaptiveSchedule, DynamicIOMD

GEOM = euclidean_geometry(Interval(-1.0, 1.0))
D = math.sqrt(GEOM.diameter_sq)
T = 1024


def regret(learner, tau):
    env = DriftingQuadraticEnv(T, seed=29, tau=tau)
    losses, us = env.losses(), env.comparators()
    total, active_max = 0.0, 0
    for loss, u in zip(losses, us):
        row = learner.update(loss)
        total += row["value"] - loss.value(u)
        active_max = max(active_max, row.get("active", 0))
    ct = float(np.sum(np.abs(np.diff(us, axis=0))))
    return total, ct, active_max


print(f"T = {T}, interval diameter D = {D:g}")
print(f"{'tau':>6s} {'C_T':>8s} {'single':>9s} {'scaffold':>9s} "
      f"{'ratio':>7s} {'bases':>6s}")
for tau in (0.0, 2.0, 8.0, 32.0, 128.0):
    single = DynamicIOMD(GEOM, AdaptiveSchedule(beta_sq=GEOM.diameter_sq))
    reg_single, _, _ = regret(single, tau)

    scaffold = Scaffold(
        lambda _iv: DynamicIOMD(GEOM, AdaptiveSchedule(beta_sq=GEOM.diameter_sq)),
        horizon=T, loss_range=LossRange(0.0, 2.0))
    reg_scaf, ct, active_max = regret(scaffold, tau)

    ratio = reg_scaf / math.sqrt(T * D * (ct + D))
    print(f"{tau:6.1f} {ct:8.2f} {reg_single:9.2f} {reg_scaf:9.2f} "
          f"{ratio:7.3f} {active_max:6d}")
print()
print("the scaffold pays a fixed hedging overhead (visible at tau = 0) but its")
print("ratio stays flat as C_T grows, and at the largest drift it overtakes")
print("the single arm.  It keeps log2(T) + 1 bases awake at any round.")
