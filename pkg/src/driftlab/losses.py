"""Structured convex losses: values, subgradients, drift and path metrics.

Every loss is a small immutable object with ``value`` and ``subgradient``.
At kinks (absolute loss at zero residual, hinge at margin one, L1 at zero
coordinates) the zero element of the subdifferential is returned whenever it
belongs to it, so stationary points report a zero subgradient.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .geometry import Ball, Box, ClippedSimplex, Domain, Interval, _as_vector


class LossError(ValueError):
    pass


class Loss:
    kind = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def value(self, x) -> float:
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class LinearLoss(Loss):
    """x -> <g, x>."""

    kind = "linear"

    def __init__(self, g):
        self.g = _as_vector(g)
        self.g.setflags(write=False)

    @property
    def dim(self):
        return self.g.shape[0]

    def value(self, x):
        return float(self.g @ _as_vector(x))

    def subgradient(self, x):
        return self.g.copy()

    def to_dict(self):
        return {"kind": self.kind, "g": self.g.tolist()}

    def __repr__(self):
        return f"LinearLoss(g={self.g.tolist()})"


class QuadraticLoss(Loss):
    """x -> 0.5 * (<a, x> - y)^2."""

    kind = "quadratic"

    def __init__(self, a, y: float):
        self.a = _as_vector(a)
        self.y = float(y)
        self.a.setflags(write=False)

    @property
    def dim(self):
        return self.a.shape[0]

    def residual(self, x) -> float:
        return float(self.a @ _as_vector(x)) - self.y

    def value(self, x):
        r = self.residual(x)
        return 0.5 * r * r

    def subgradient(self, x):
        return self.residual(x) * self.a

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "y": self.y}

    def __repr__(self):
        return f"QuadraticLoss(a={self.a.tolist()}, y={self.y})"


class AbsoluteLoss(Loss):
    """x -> |<a, x> - y|."""

    kind = "absolute"

    def __init__(self, a, y: float):
        self.a = _as_vector(a)
        self.y = float(y)
        self.a.setflags(write=False)

    @property
    def dim(self):
        return self.a.shape[0]

    def residual(self, x) -> float:
        return float(self.a @ _as_vector(x)) - self.y

    def value(self, x):
        return abs(self.residual(x))

    def subgradient(self, x):
        r = self.residual(x)
        if r == 0.0:
            return np.zeros_like(self.a)
        return np.sign(r) * self.a

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "y": self.y}

    def __repr__(self):
        return f"AbsoluteLoss(a={self.a.tolist()}, y={self.y})"


class HingeLoss(Loss):
    """x -> max(0, 1 - y * <a, x>) with label y in {-1, +1}."""

    kind = "hinge"

    def __init__(self, a, y: float):
        self.a = _as_vector(a)
        self.y = float(y)
        if self.y not in (-1.0, 1.0):
            raise LossError("hinge label must be -1 or +1")
        self.a.setflags(write=False)

    @property
    def dim(self):
        return self.a.shape[0]

    def margin(self, x) -> float:
        return self.y * float(self.a @ _as_vector(x))

    def value(self, x):
        return max(0.0, 1.0 - self.margin(x))

    def subgradient(self, x):
        if self.margin(x) < 1.0:
            return -self.y * self.a
        return np.zeros_like(self.a)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "y": self.y}

    def __repr__(self):
        return f"HingeLoss(a={self.a.tolist()}, y={self.y})"


class CompositeLoss(Loss):
    """Smooth-ish base loss plus an L1 penalty l1_weight * ||x||_1."""

    kind = "composite"

    def __init__(self, base: Loss, l1_weight: float):
        if isinstance(base, CompositeLoss):
            raise LossError("composite base must not itself be composite")
        if l1_weight < 0:
            raise LossError("l1_weight must be nonnegative")
        self.base = base
        self.l1_weight = float(l1_weight)

    @property
    def dim(self):
        return self.base.dim

    def value(self, x):
        x = _as_vector(x)
        return self.base.value(x) + self.l1_weight * float(np.sum(np.abs(x)))

    def variable_value(self, x) -> float:
        """Value of the time-varying part only (the base loss)."""
        return self.base.value(x)

    def subgradient(self, x):
        x = _as_vector(x)
        return self.base.subgradient(x) + self.l1_weight * np.sign(x)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "l1_weight": self.l1_weight}

    def __repr__(self):
        return f"CompositeLoss(base={self.base!r}, l1_weight={self.l1_weight})"


_LOSS_KINDS = {
    "linear": LinearLoss,
    "quadratic": QuadraticLoss,
    "absolute": AbsoluteLoss,
    "hinge": HingeLoss,
}


def loss_from_dict(spec: dict) -> Loss:
    kind = spec.get("kind")
    if kind == "linear":
        return LinearLoss(spec["g"])
    if kind == "quadratic":
        return QuadraticLoss(spec["a"], spec["y"])
    if kind == "absolute":
        return AbsoluteLoss(spec["a"], spec["y"])
    if kind == "hinge":
        return HingeLoss(spec["a"], spec["y"])
    if kind == "composite":
        return CompositeLoss(loss_from_dict(spec["base"]), spec["l1_weight"])
    raise LossError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# path length
# ---------------------------------------------------------------------------


def path_length(points, norm: str = "l2") -> float:
    """Total variation sum ||u_t - u_{t-1}|| over a comparator sequence.

    ``points`` is array-like of shape (T, dim); a length-T scalar sequence is
    treated as (T, 1).  An empty or single-point sequence has zero path.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        return 0.0
    diffs = np.diff(pts, axis=0)
    if norm == "l2":
        steps = np.linalg.norm(diffs, axis=1)
    elif norm == "l1":
        steps = np.sum(np.abs(diffs), axis=1)
    else:
        raise LossError(f"unknown norm {norm!r}")
    return float(np.sum(steps))


# ---------------------------------------------------------------------------
# temporal variability
# ---------------------------------------------------------------------------


class Variability(NamedTuple):
    """Drift total with an exactness flag (False means a grid lower estimate)."""

    value: float
    exact: bool

    def __float__(self):
        return self.value


def temporal_variability(losses, domain: Domain, mode: str = "absolute",
                         grid_points: int = 10_000) -> Variability:
    """Sum over t >= 2 of the largest round-to-round loss change on the domain.

    ``mode="absolute"`` takes sup |l_t - l_{t-1}|; ``mode="signed"`` takes
    sup (l_t - l_{t-1}) clamped at zero from below per term, which is the
    variant the per-run regret bounds consume.  Linear losses over simplexes,
    boxes and balls and arbitrary one-dimensional pairs are handled in closed
    form; other shapes fall back to a dense grid and are flagged inexact.

    For losses over a clipped simplex the supremum is taken over the full
    simplex (the bounds compare against unclipped corners), which can only
    enlarge the total and keeps every checked inequality valid.
    """
    if mode not in ("absolute", "signed"):
        raise LossError(f"unknown mode {mode!r}")
    losses = list(losses)
    if not losses:
        raise LossError("temporal variability needs at least one loss")
    total = 0.0
    exact_all = True
    for prev, cur in zip(losses[:-1], losses[1:]):
        sup_pos, sup_neg, exact = _pair_sup(cur, prev, domain, grid_points)
        if mode == "absolute":
            term = max(sup_pos, sup_neg)
        else:
            term = max(0.0, sup_pos)
        total += term
        exact_all = exact_all and exact
    return Variability(total, exact_all)


def _strip_matching_l1(cur: Loss, prev: Loss) -> tuple[Loss, Loss]:
    # a shared L1 penalty cancels in the difference
    if (isinstance(cur, CompositeLoss) and isinstance(prev, CompositeLoss)
            and cur.l1_weight == prev.l1_weight):
        return cur.base, prev.base
    return cur, prev


def _pair_sup(cur: Loss, prev: Loss, domain: Domain, grid_points: int):
    """Return (sup of cur-prev, sup of prev-cur, exact_flag) over the domain."""
    cur, prev = _strip_matching_l1(cur, prev)
    if isinstance(cur, LinearLoss) and isinstance(prev, LinearLoss):
        dg = cur.g - prev.g
        if isinstance(domain, ClippedSimplex):
            return float(np.max(dg)), float(np.max(-dg)), True
        if isinstance(domain, (Box, Interval)):
            if isinstance(domain, Interval):
                lo = np.array([domain.lo])
                hi = np.array([domain.hi])
            else:
                lo, hi = domain.lo, domain.hi
            pos = float(np.sum(np.maximum(dg * lo, dg * hi)))
            neg = float(np.sum(np.maximum(-dg * lo, -dg * hi)))
            return pos, neg, True
        if isinstance(domain, Ball):
            mid = float(dg @ domain.center)
            rad = domain.radius * float(np.linalg.norm(dg))
            return mid + rad, -mid + rad, True
    if isinstance(domain, Interval):
        return _interval_pair_sup(cur, prev, domain)
    return _grid_pair_sup(cur, prev, domain, grid_points)


# -- exact one-dimensional difference ---------------------------------------


def _pieces_1d(loss: Loss, lo: float, hi: float):
    """Piecewise-quadratic form of a scalar loss: (a2, a1, a0) per segment.

    Returns (breaks, coeffs) where breaks has k+1 edges covering [lo, hi] and
    coeffs[i] applies on [breaks[i], breaks[i+1]].
    """
    if isinstance(loss, CompositeLoss):
        breaks, coeffs = _pieces_1d(loss.base, lo, hi)
        out_breaks, out_coeffs = _split_at(breaks, coeffs, 0.0)
        for i in range(len(out_coeffs)):
            mid = 0.5 * (out_breaks[i] + out_breaks[i + 1])
            sign = 1.0 if mid >= 0 else -1.0
            a2, a1, a0 = out_coeffs[i]
            out_coeffs[i] = (a2, a1 + sign * loss.l1_weight, a0)
        return out_breaks, out_coeffs
    if isinstance(loss, LinearLoss):
        return [lo, hi], [(0.0, float(loss.g[0]), 0.0)]
    if isinstance(loss, QuadraticLoss):
        a, y = float(loss.a[0]), loss.y
        return [lo, hi], [(0.5 * a * a, -a * y, 0.5 * y * y)]
    if isinstance(loss, AbsoluteLoss):
        a, y = float(loss.a[0]), loss.y
        if a == 0.0:
            return [lo, hi], [(0.0, 0.0, abs(y))]
        kink = y / a
        breaks, coeffs = _split_at([lo, hi], [None], kink)
        out = []
        for i in range(len(coeffs)):
            mid = 0.5 * (breaks[i] + breaks[i + 1])
            s = 1.0 if a * mid - y >= 0 else -1.0
            out.append((0.0, s * a, -s * y))
        return breaks, out
    if isinstance(loss, HingeLoss):
        a, y = float(loss.a[0]), loss.y
        if a == 0.0:
            return [lo, hi], [(0.0, 0.0, 1.0)]
        kink = 1.0 / (y * a)
        breaks, coeffs = _split_at([lo, hi], [None], kink)
        out = []
        for i in range(len(coeffs)):
            mid = 0.5 * (breaks[i] + breaks[i + 1])
            if 1.0 - y * a * mid > 0:
                out.append((0.0, -y * a, 1.0))
            else:
                out.append((0.0, 0.0, 0.0))
        return breaks, out
    raise LossError(f"no 1-d piecewise form for {loss.kind!r}")


def _split_at(breaks, coeffs, point):
    """Insert a breakpoint, duplicating the segment coefficients it lands in."""
    breaks = list(breaks)
    coeffs = list(coeffs)
    if point <= breaks[0] or point >= breaks[-1]:
        return breaks, coeffs
    for i in range(len(breaks) - 1):
        if breaks[i] < point < breaks[i + 1]:
            breaks.insert(i + 1, point)
            coeffs.insert(i, coeffs[i])
            break
    return breaks, coeffs


def _interval_pair_sup(cur: Loss, prev: Loss, domain: Interval):
    lo, hi = domain.lo, domain.hi
    b1, c1 = _pieces_1d(cur, lo, hi)
    b2, c2 = _pieces_1d(prev, lo, hi)
    edges = sorted(set(b1) | set(b2))

    def seg_coeff(breaks, coeffs, x):
        for i in range(len(coeffs)):
            if breaks[i] <= x <= breaks[i + 1]:
                return coeffs[i]
        return coeffs[-1]

    sup_pos = -np.inf
    sup_neg = -np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        p2, p1, p0 = seg_coeff(b1, c1, mid)
        q2, q1, q0 = seg_coeff(b2, c2, mid)
        d2, d1, d0 = p2 - q2, p1 - q1, p0 - q0
        cand = [a, b]
        if d2 != 0.0:
            v = -d1 / (2.0 * d2)
            if a < v < b:
                cand.append(v)
        for x in cand:
            f = d2 * x * x + d1 * x + d0
            sup_pos = max(sup_pos, f)
            sup_neg = max(sup_neg, -f)
    return float(sup_pos), float(sup_neg), True


# -- grid fallback ----------------------------------------------------------


def _domain_grid(domain: Domain, grid_points: int) -> np.ndarray:
    if isinstance(domain, Interval):
        return np.linspace(domain.lo, domain.hi, grid_points)[:, None]
    if isinstance(domain, Box) and domain.dim <= 2:
        if domain.dim == 1:
            return np.linspace(domain.lo[0], domain.hi[0], grid_points)[:, None]
        side = max(2, int(np.sqrt(grid_points)))
        xs = np.linspace(domain.lo[0], domain.hi[0], side)
        ys = np.linspace(domain.lo[1], domain.hi[1], side)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])
    if isinstance(domain, ClippedSimplex) and domain.d == 2:
        s = np.linspace(domain.floor, 1.0 - domain.floor, grid_points)
        return np.column_stack([s, 1.0 - s])
    if isinstance(domain, ClippedSimplex) and domain.d == 3:
        side = max(2, int(np.sqrt(grid_points)))
        s1 = np.linspace(domain.floor, 1.0 - 2 * domain.floor, side)
        s2 = np.linspace(domain.floor, 1.0 - 2 * domain.floor, side)
        g1, g2 = np.meshgrid(s1, s2)
        g3 = 1.0 - g1 - g2
        keep = g3 >= domain.floor
        return np.column_stack([g1[keep], g2[keep], g3[keep]])
    # high-dimensional fallback: seeded member sample, explicitly inexact
    rng = np.random.Generator(np.random.PCG64(0))
    return domain.sample(rng, grid_points)


def _grid_pair_sup(cur: Loss, prev: Loss, domain: Domain, grid_points: int):
    pts = _domain_grid(domain, grid_points)
    diffs = np.array([cur.value(p) - prev.value(p) for p in pts])
    return float(np.max(diffs)), float(np.max(-diffs)), False
