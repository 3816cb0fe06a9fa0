"""Mirror geometries: bounded domains, Bregman divergences, projections.

A geometry couples a mirror map with a bounded convex domain and carries the
two constants every regret bound in this package consumes: the squared
Bregman diameter ``diameter_sq`` and the drift sensitivity ``gamma`` (how much
the divergence to a fixed anchor can change when the reference point moves one
unit in the primal norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MEMBERSHIP_TOL = 1e-9

EUCLIDEAN = "euclidean"
ENTROPY = "entropy"


class GeometryError(ValueError):
    """Raised for invalid geometry configurations or inputs."""


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise GeometryError(f"expected a 1-d point, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("point has NaN or infinite coordinates")
    return x


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


class Domain:
    """Base class for bounded convex domains.

    Points are dense float vectors; scalars are accepted for one-dimensional
    domains and treated as length-1 vectors.
    """

    kind = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n member points, shape (n, dim). Used by tests and oracles."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Domain):
    lo: float
    hi: float
    kind = "interval"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise GeometryError(f"bad interval [{self.lo}, {self.hi}]")

    @property
    def dim(self) -> int:
        return 1

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = _as_vector(x)
        return x.shape == (1,) and self.lo - tol <= x[0] <= self.hi + tol

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def l2_diameter(self) -> float:
        return self.hi - self.lo

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, 1))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


class Box(Domain):
    """Axis-aligned box given by coordinate-wise bounds."""

    kind = "box"

    def __init__(self, lo, hi):
        lo = _as_vector(lo)
        hi = _as_vector(hi)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise GeometryError("box bounds must satisfy lo < hi coordinate-wise")
        self.lo = lo
        self.hi = hi
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = _as_vector(x)
        if x.shape != self.lo.shape:
            return False
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def l2_diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        return hash((self.kind, self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True)
class ClippedSimplex(Domain):
    """Probability simplex with a coordinate floor alpha/d.

    Members satisfy x_i >= alpha/d and sum(x) == 1.  The floor keeps the
    negative-entropy divergence finite: the induced squared diameter is
    log(d / alpha).
    """

    d: int
    alpha: float
    kind = "clipped-simplex"

    def __post_init__(self):
        if self.d < 2:
            raise GeometryError("clipped simplex needs d >= 2")
        if not (0.0 < self.alpha < 1.0):
            raise GeometryError("alpha must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return self.d

    @property
    def floor(self) -> float:
        return self.alpha / self.d

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = _as_vector(x)
        if x.shape != (self.d,):
            return False
        return bool(np.all(x >= self.floor - tol) and abs(float(np.sum(x)) - 1.0) <= tol)

    def sample(self, rng, n):
        # floor plus a Dirichlet spread of the free mass stays feasible
        w = rng.dirichlet(np.ones(self.d), size=n)
        return self.floor + (1.0 - self.alpha) * w

    def to_dict(self):
        return {"kind": self.kind, "d": self.d, "alpha": self.alpha}


class Ball(Domain):
    """Euclidean ball of given center and radius."""

    kind = "ball"

    def __init__(self, center, radius: float):
        center = _as_vector(center)
        if not (np.isfinite(radius) and radius > 0):
            raise GeometryError("ball radius must be positive and finite")
        self.center = center
        self.radius = float(radius)
        self.center.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = _as_vector(x)
        if x.shape != self.center.shape:
            return False
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def l2_diameter(self) -> float:
        return 2.0 * self.radius

    def sample(self, rng, n):
        g = rng.normal(size=(n, self.dim))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        return self.center + r * g

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    def __eq__(self, other):
        return (
            isinstance(other, Ball)
            and self.radius == other.radius
            and np.array_equal(self.center, other.center)
        )

    def __hash__(self):
        return hash((self.kind, self.center.tobytes(), self.radius))


_DOMAIN_KINDS = {
    "interval": Interval,
    "box": Box,
    "clipped-simplex": ClippedSimplex,
    "ball": Ball,
}


def domain_from_dict(spec: dict) -> Domain:
    kind = spec.get("kind")
    if kind == "interval":
        return Interval(float(spec["lo"]), float(spec["hi"]))
    if kind == "box":
        return Box(spec["lo"], spec["hi"])
    if kind == "clipped-simplex":
        return ClippedSimplex(int(spec["d"]), float(spec["alpha"]))
    if kind == "ball":
        return Ball(spec["center"], float(spec["radius"]))
    raise GeometryError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def derive_constants(mirror: str, domain: Domain) -> tuple[float, float]:
    """Return (diameter_sq, gamma) for a mirror/domain pairing.

    Entropy over the clipped simplex: both constants equal log(d / alpha),
    the KL diameter of the floored simplex.  Euclidean over an interval, box
    or ball: diameter_sq is half the squared l2 diameter and
    gamma = sqrt(2 * diameter_sq), the worst-case change of the half-squared
    distance to an anchor per unit movement of the reference point.
    """
    if mirror == ENTROPY:
        if not isinstance(domain, ClippedSimplex):
            raise GeometryError("entropy mirror pairs only with the clipped simplex")
        d2 = math.log(domain.d / domain.alpha)
        return d2, d2
    if mirror == EUCLIDEAN:
        if isinstance(domain, ClippedSimplex):
            raise GeometryError("euclidean mirror does not pair with the clipped simplex")
        diam = domain.l2_diameter()
        d2 = 0.5 * diam * diam
        return d2, math.sqrt(2.0 * d2)
    raise GeometryError(f"unknown mirror {mirror!r}")


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


class Geometry:
    """Mirror map + domain + norms + derived constants.

    The primal norm is pinned by the mirror (euclidean -> l2, entropy -> l1)
    and the dual norm is its conjugate.  Instances are immutable.
    """

    def __init__(self, mirror: str, domain: Domain, diameter_sq: float | None = None,
                 gamma: float | None = None):
        if mirror not in (EUCLIDEAN, ENTROPY):
            raise GeometryError(f"unknown mirror {mirror!r}")
        d2, g = derive_constants(mirror, domain)
        self.mirror = mirror
        self.domain = domain
        self.primal_norm = "l2" if mirror == EUCLIDEAN else "l1"
        self.diameter_sq = float(diameter_sq) if diameter_sq is not None else d2
        self.gamma = float(gamma) if gamma is not None else g
        if self.diameter_sq <= 0 or self.gamma <= 0:
            raise GeometryError("diameter_sq and gamma must be positive")

    def __repr__(self):
        return (f"Geometry({self.mirror}, {self.domain!r}, "
                f"D2={self.diameter_sq:.6g}, gamma={self.gamma:.6g})")

    # -- norms ------------------------------------------------------------

    def norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.primal_norm == "l2":
            return float(np.linalg.norm(v))
        return float(np.sum(np.abs(v)))

    def dual_norm(self, g) -> float:
        g = np.asarray(g, dtype=float)
        if self.primal_norm == "l2":
            return float(np.linalg.norm(g))
        return float(np.max(np.abs(g))) if g.size else 0.0

    # -- divergence -------------------------------------------------------

    def bregman(self, x, y) -> float:
        """Bregman divergence B(x, y) of the mirror map.

        Euclidean: 0.5 * ||x - y||_2^2.  Entropy: KL(x, y) with the
        convention 0 * log 0 = 0; y must have strictly positive coordinates.
        """
        x = _as_vector(x)
        y = _as_vector(y)
        if x.shape != y.shape:
            raise GeometryError("bregman arguments must share a shape")
        if self.mirror == EUCLIDEAN:
            d = x - y
            return 0.5 * float(d @ d)
        if np.any(y <= 0.0):
            raise GeometryError("entropy divergence needs y > 0 coordinate-wise")
        # fused per-term form x*log1p((x-y)/y) - (x-y): the absolute float
        # error scales with |x-y|, so lam * B stays meaningful at huge lam
        d = x - y
        with np.errstate(divide="ignore"):
            terms = np.where(x > 0.0, x * np.log1p(np.where(x > 0.0, d, 0.0) / y) - d, y)
        return float(np.sum(terms))

    # -- projection -------------------------------------------------------

    def project(self, p) -> np.ndarray:
        """Bregman-project p onto the domain.

        Euclidean: coordinate clipping for intervals and boxes, radial
        scaling for balls.  Clipped simplex: KL projection of a positive
        weight vector by capping floored coordinates and renormalizing the
        rest (at most d passes).
        """
        p = _as_vector(p)
        dom = self.domain
        if isinstance(dom, (Interval, Box)):
            return dom.clip(p)
        if isinstance(dom, Ball):
            r = p - dom.center
            nr = float(np.linalg.norm(r))
            if nr <= dom.radius:
                return p.copy()
            return dom.center + (dom.radius / nr) * r
        if isinstance(dom, ClippedSimplex):
            return _kl_project_clipped_simplex(p, dom)
        raise GeometryError(f"no projection for domain {dom.kind!r}")


def _kl_project_clipped_simplex(p: np.ndarray, dom: ClippedSimplex) -> np.ndarray:
    """KL projection of a positive vector onto the floored simplex.

    The minimizer has the form x_i = max(floor, c * p_i) with c chosen so the
    coordinates sum to one.  Renormalizing the un-floored coordinates only
    shrinks c, so floored coordinates never unfloor: the loop ends within d
    passes.
    """
    if p.shape != (dom.d,):
        raise GeometryError(f"expected {dom.d} coordinates, got {p.shape}")
    if np.any(p <= 0.0):
        raise GeometryError("simplex projection needs strictly positive weights")
    floor = dom.floor
    floored = np.zeros(dom.d, dtype=bool)
    x = np.empty(dom.d)
    for _ in range(dom.d):
        free = ~floored
        c = (1.0 - floor * floored.sum()) / float(np.sum(p[free]))
        x[free] = c * p[free]
        x[floored] = floor
        newly = free & (x < floor)
        if not newly.any():
            break
        floored |= newly
    x[floored] = floor
    return x


def euclidean_geometry(domain: Domain) -> Geometry:
    return Geometry(EUCLIDEAN, domain)


def entropy_geometry(domain: ClippedSimplex) -> Geometry:
    return Geometry(ENTROPY, domain)
