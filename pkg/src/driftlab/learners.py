"""Online learners built on the implicit update.

Every learner exposes ``play()`` (the point paying this round's loss) and
``update(loss, path_increment=0.0)`` which advances the state and returns a
flat dict of per-round diagnostics (progress certificate delta, weight lam,
dual gradient norm at the play, solver label).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ball, Box, ClippedSimplex, Geometry, Interval
from .losses import LinearLoss, Loss
from .prox import implicit_update


class ConfigError(ValueError):
    pass


def domain_center(domain) -> np.ndarray:
    if isinstance(domain, Interval):
        return np.array([0.5 * (domain.lo + domain.hi)])
    if isinstance(domain, Box):
        return 0.5 * (domain.lo + domain.hi)
    if isinstance(domain, ClippedSimplex):
        return np.full(domain.d, 1.0 / domain.d)
    if isinstance(domain, Ball):
        return domain.center.copy()
    raise ConfigError(f"no default start point for domain {domain.kind!r}")


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedSchedule:
    """Pre-materialized positive non-increasing step sizes eta_1..eta_T."""

    etas: np.ndarray

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float)
        if etas.ndim != 1 or etas.size == 0:
            raise ConfigError("fixed schedule needs a 1-d array of steps")
        if np.any(etas <= 0) or np.any(np.diff(etas) > 1e-15):
            raise ConfigError("fixed schedule must be positive and non-increasing")
        object.__setattr__(self, "etas", etas)

    def lam(self, t: int) -> float:
        if t > self.etas.size:
            raise ConfigError(
                f"fixed schedule exhausted: round {t} exceeds horizon {self.etas.size}"
            )
        return 1.0 / float(self.etas[t - 1])


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Self-tuning weights lam_t = (sum of past deltas) / beta_sq.

    ``tau`` is the comparator path-length budget the run is configured for;
    it feeds the bound checks, not the update itself.
    """

    beta_sq: float
    tau: float = 0.0

    def __post_init__(self):
        if not (self.beta_sq > 0):
            raise ConfigError("adaptive schedule needs beta_sq > 0")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")


def fixed_schedule(shape: str, scale: float, horizon: int) -> FixedSchedule:
    if scale <= 0 or horizon < 1:
        raise ConfigError("schedule scale must be positive and horizon >= 1")
    t = np.arange(1, horizon + 1, dtype=float)
    if shape == "constant":
        etas = np.full(horizon, scale)
    elif shape == "inv_sqrt":
        etas = scale / np.sqrt(t)
    elif shape == "inv_t":
        etas = scale / t
    else:
        raise ConfigError(f"unknown schedule shape {shape!r}")
    return FixedSchedule(etas)


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------


class Learner:
    """Interface: play() then update(loss) once per round."""

    geom: Geometry

    def play(self) -> np.ndarray:
        raise NotImplementedError

    def update(self, loss: Loss, path_increment: float = 0.0) -> dict:
        raise NotImplementedError


def _round_row(geom, loss, x, res, lam) -> dict:
    g = loss.subgradient(x)
    row = {
        "value": loss.value(x),
        "gnorm_dual": geom.dual_norm(g),
        "delta": res.delta,
        "lam": lam,
        "solver": res.solver,
    }
    if geom.mirror == "entropy" and isinstance(loss, LinearLoss):
        row["eg2"] = float(x @ (loss.g * loss.g))
    return row


class Greedy(Learner):
    """Follow the leader of the last round: minimize the previous loss."""

    name = "greedy"

    def __init__(self, geom: Geometry, x0=None):
        self.geom = geom
        self.x = np.asarray(x0, dtype=float) if x0 is not None else domain_center(geom.domain)

    def play(self):
        return self.x

    def update(self, loss, path_increment: float = 0.0):
        res = implicit_update(loss, self.geom, self.x, 0.0)
        row = _round_row(self.geom, loss, self.x, res, 0.0)
        self.x = res.x_next
        return row


class DynamicIOMD(Learner):
    """Implicit mirror descent with a fixed or self-tuning weight sequence.

    With an adaptive schedule the round weight is
    lam_t = (delta_1 + ... + delta_{t-1}) / beta_sq, so the first round is a
    pure loss minimization and the weights never decrease.
    """

    name = "diomd"

    def __init__(self, geom: Geometry, schedule, x0=None):
        if not isinstance(schedule, (FixedSchedule, AdaptiveSchedule)):
            raise ConfigError(f"unsupported schedule {schedule!r}")
        self.geom = geom
        self.schedule = schedule
        self.x = np.asarray(x0, dtype=float) if x0 is not None else domain_center(geom.domain)
        self.t = 1
        self.delta_sum = 0.0
        self.lam = 0.0 if isinstance(schedule, AdaptiveSchedule) else None

    @property
    def adaptive(self) -> bool:
        return isinstance(self.schedule, AdaptiveSchedule)

    @property
    def lam_final(self) -> float:
        """Weight that the next round would use (lam_{T+1} after T rounds)."""
        if self.adaptive:
            return self.lam
        return 1.0 / float(self.schedule.etas[min(self.t, self.schedule.etas.size) - 1])

    def play(self):
        return self.x

    def update(self, loss, path_increment: float = 0.0):
        lam = self.lam if self.adaptive else self.schedule.lam(self.t)
        res = implicit_update(loss, self.geom, self.x, lam)
        row = _round_row(self.geom, loss, self.x, res, lam)
        self.delta_sum += res.delta
        if self.adaptive:
            new_lam = self.delta_sum / self.schedule.beta_sq
            # deltas are nonnegative, so the weight sequence never decreases
            self.lam = max(self.lam, new_lam)
        self.x = res.x_next
        self.t += 1
        return row


class DoublingIOMD(Learner):
    """Self-tuning implicit mirror descent with path-length doubling restarts.

    Tracks the comparator path inside the current epoch; when it exceeds the
    epoch budget Q_i = sqrt(2) * D * 2^i the learner opens epoch i+1 with
    budget doubled, weight reset to zero and the iterate carried over
    unchanged (no prox solve on a restart round).
    """

    name = "diomd-doubling"

    def __init__(self, geom: Geometry, x0=None):
        self.geom = geom
        self.x = np.asarray(x0, dtype=float) if x0 is not None else domain_center(geom.domain)
        self.diameter = math.sqrt(geom.diameter_sq)
        self.epoch = 0
        self.Q = math.sqrt(2.0) * self.diameter
        self.beta_sq = geom.diameter_sq + geom.gamma * self.Q
        self.lam = 0.0
        self.delta_sum = 0.0
        self.path_in_epoch = 0.0
        self.t = 1

    def play(self):
        return self.x

    def update(self, loss, path_increment: float = 0.0):
        if path_increment is None or path_increment < 0:
            raise ConfigError("doubling learner needs nonnegative path increments")
        self.path_in_epoch += path_increment
        if self.path_in_epoch > self.Q:
            self.epoch += 1
            self.Q = math.sqrt(2.0) * self.diameter * 2.0 ** self.epoch
            self.beta_sq = self.geom.diameter_sq + self.geom.gamma * self.Q
            self.lam = 0.0
            self.delta_sum = 0.0
            self.path_in_epoch = 0.0
            g = loss.subgradient(self.x)
            row = {
                "value": loss.value(self.x),
                "gnorm_dual": self.geom.dual_norm(g),
                "delta": 0.0,
                "lam": self.lam,
                "solver": "restart",
                "restart": True,
                "epoch": self.epoch,
            }
            self.t += 1
            return row
        res = implicit_update(loss, self.geom, self.x, self.lam)
        row = _round_row(self.geom, loss, self.x, res, self.lam)
        row["restart"] = False
        row["epoch"] = self.epoch
        # same accumulation as the plain adaptive learner, reset per epoch
        self.delta_sum += res.delta
        self.lam = max(self.lam, self.delta_sum / self.beta_sq)
        self.x = res.x_next
        self.t += 1
        return row


class OGD(Learner):
    """Projected online gradient descent baseline (euclidean only)."""

    name = "ogd"

    def __init__(self, geom: Geometry, etas, x0=None):
        if geom.mirror != "euclidean":
            raise ConfigError("ogd runs on euclidean geometry only")
        self.geom = geom
        self.etas = np.asarray(etas, dtype=float)
        if self.etas.ndim != 1 or np.any(self.etas <= 0):
            raise ConfigError("ogd needs a 1-d array of positive steps")
        self.x = np.asarray(x0, dtype=float) if x0 is not None else domain_center(geom.domain)
        self.t = 1

    def play(self):
        return self.x

    def update(self, loss, path_increment: float = 0.0):
        if self.t > self.etas.size:
            raise ConfigError(
                f"ogd schedule exhausted: round {self.t} exceeds horizon {self.etas.size}"
            )
        g = loss.subgradient(self.x)
        row = {
            "value": loss.value(self.x),
            "gnorm_dual": self.geom.dual_norm(g),
            "delta": None,
            "lam": None,
            "solver": "gradient-step",
        }
        self.x = self.geom.project(self.x - self.etas[self.t - 1] * g)
        self.t += 1
        return row
