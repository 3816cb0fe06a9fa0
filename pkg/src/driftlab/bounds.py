"""Per-run certificate checks: every regret guarantee as a realized inequality.

``evaluate_bounds`` consumes a completed run and emits one row per applicable
inequality with the realized left and right sides.  Rows never weaken the
stated guarantee: when a premise fails (for example the comparator path
exceeds the configured budget) the row is marked inapplicable instead of
passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry
from .losses import CompositeLoss, LinearLoss, Loss, path_length, temporal_variability

DELTA_FLOOR = -1e-8
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool
    status: str = "checked"  # "checked" | "inapplicable"
    note: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
            "status": self.status,
            "note": self.note,
        }


@dataclass
class RunRecord:
    """Everything a bound check can see about one finished run."""

    algorithm: str
    geom: Geometry
    losses: list
    plays: np.ndarray
    x_final: np.ndarray
    comparators: np.ndarray | None = None
    values: np.ndarray | None = None
    deltas: np.ndarray | None = None
    lams: np.ndarray | None = None
    gnorms: np.ndarray | None = None
    lam_final: float | None = None
    epochs: int | None = None
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.losses)

    def comparator_values(self) -> np.ndarray:
        return np.array(
            [l.value(u) for l, u in zip(self.losses, self.comparators)]
        )

    def regret(self) -> float:
        return float(np.sum(self.values) - np.sum(self.comparator_values()))

    def path_len(self) -> float:
        return path_length(self.comparators, self.geom.primal_norm)

    def endpoint_gap(self) -> float:
        """First-round value at the first play minus last loss at the final iterate."""
        return float(self.values[0]) - self.losses[-1].value(self.x_final)


# ---------------------------------------------------------------------------
# scalar helpers
# ---------------------------------------------------------------------------


def first_order_bound(b: float, c: float) -> float:
    """Largest-x certificate for x - b * sqrt(x) - c <= 0: x <= c + b^2 + b*sqrt(c)."""
    if b < 0 or c < 0:
        raise ValueError("first_order_bound needs b, c >= 0")
    return c + b * b + b * math.sqrt(c)


@dataclass(frozen=True)
class RecursionCheck:
    applicable: bool
    holds: bool
    lhs: float
    rhs: float
    violated_at: int | None = None


def check_recursion_bound(a_seq, b_seq, c: float, d: float, deltas) -> RecursionCheck:
    """Verify the incremental recursion and its closed-form consequence.

    Given nonnegative weights a_t, b_t and constants c, d >= 0, a sequence
    with Delta_1 = 0 and
    Delta_{t+1} <= Delta_t + min(d * b_t, c * a_t^2 / (2 * Delta_t))
    (division by zero reads as the first branch) must end below
    sqrt(d^2 * sum b_t^2 + c * sum a_t^2).  Returns whether the premise held
    step by step and, if so, whether the final bound does.
    """
    a = np.asarray(a_seq, dtype=float)
    b = np.asarray(b_seq, dtype=float)
    dl = np.asarray(deltas, dtype=float)
    if a.shape != b.shape or dl.shape != (a.size + 1,):
        raise ValueError("need len(deltas) == len(a) + 1 == len(b) + 1")
    if c < 0 or d < 0 or np.any(a < 0) or np.any(b < 0):
        raise ValueError("weights and constants must be nonnegative")
    if abs(dl[0]) > 1e-12:
        return RecursionCheck(False, False, dl[-1], 0.0, violated_at=0)
    for t in range(a.size):
        cap = d * b[t]
        if dl[t] > 0:
            cap = min(cap, c * a[t] * a[t] / (2.0 * dl[t]))
        tol = 1e-9 * max(1.0, abs(dl[t]) + cap)
        if dl[t + 1] > dl[t] + cap + tol:
            return RecursionCheck(False, False, dl[-1], 0.0, violated_at=t + 1)
    rhs = math.sqrt(d * d * float(b @ b) + c * float(a @ a))
    holds = dl[-1] <= rhs + 1e-9 * max(1.0, rhs)
    return RecursionCheck(True, bool(holds), float(dl[-1]), rhs)


# ---------------------------------------------------------------------------
# bound rows
# ---------------------------------------------------------------------------


def _vt_signed(rec: RunRecord) -> float:
    return temporal_variability(rec.losses, rec.geom.domain, mode="signed").value


def _row(name, lhs, rhs, tol, note="", applicable=True):
    return BoundCheck(name, float(lhs), float(rhs), bool(lhs <= rhs + tol),
                      status="checked" if applicable else "inapplicable", note=note)


def _premise_row(name, ok, lhs, rhs, note=""):
    return BoundCheck(name, float(lhs), float(rhs), bool(ok),
                      status="checked" if ok else "inapplicable", note=note)


def evaluate_bounds(rec: RunRecord, tol: float = DEFAULT_TOL) -> list[BoundCheck]:
    alg = rec.algorithm
    if alg == "greedy":
        return _greedy_rows(rec, tol)
    if alg == "diomd":
        if rec.params.get("schedule_kind") == "fixed":
            return _fixed_rows(rec, tol)
        return _adaptive_rows(rec, tol)
    if alg == "diomd-doubling":
        return _doubling_rows(rec, tol)
    if alg == "abprod":
        return _abprod_rows(rec, tol)
    if alg == "adapt-ml-prod":
        return _mlprod_rows(rec, tol)
    return []


def _greedy_rows(rec, tol):
    vt = _vt_signed(rec)
    rhs = rec.endpoint_gap() + vt
    return [_row("greedy-drift-bound", rec.regret(), rhs, tol,
                 note="regret <= first value - final value + signed drift")]


def _fixed_rows(rec, tol):
    lams = rec.lams
    incs = np.linalg.norm(np.diff(rec.comparators, axis=0), axis=1) \
        if rec.geom.primal_norm == "l2" \
        else np.sum(np.abs(np.diff(rec.comparators, axis=0)), axis=1)
    rhs = (rec.geom.diameter_sq * lams[-1]
           + rec.geom.gamma * float(np.sum(lams[1:] * incs))
           + float(np.sum(rec.deltas)))
    rows = [_row("fixed-schedule-bound", rec.regret(), rhs, tol,
                 note="regret <= D^2/eta_T + gamma * sum ||du||/eta_t + sum delta")]
    rows.append(_delta_floor_row(rec))
    return rows


def _delta_floor_row(rec):
    worst = float(np.min(rec.deltas)) if rec.deltas is not None and len(rec.deltas) else 0.0
    return BoundCheck("delta-floor", worst, DELTA_FLOOR, worst >= DELTA_FLOOR,
                      note="every progress certificate above -1e-8")


def _lam_rows(rec):
    lams = np.append(rec.lams, rec.lam_final)
    worst = float(np.min(np.diff(lams)))
    rows = [BoundCheck("lam-monotone", worst, 0.0, worst >= -1e-12,
                       note="adaptive weights never decrease")]
    beta_sq = rec.params["beta_sq"]
    gsq = float(np.sum(np.asarray(rec.gnorms) ** 2))
    cap = math.sqrt((2.0 * rec.geom.diameter_sq / beta_sq ** 2 + 1.0 / beta_sq) * gsq)
    rows.append(_row("lam-cap", rec.lam_final, cap, 1e-9,
                     note="final weight below the recursion cap"))
    g = np.asarray(rec.gnorms, dtype=float)
    rc = check_recursion_bound(
        g, g, beta_sq, math.sqrt(2.0 * rec.geom.diameter_sq),
        beta_sq * np.append(rec.lams, rec.lam_final),
    )
    rows.append(BoundCheck(
        "lam-recursion", rc.lhs, rc.rhs,
        rc.holds if rc.applicable else False,
        status="checked" if rc.applicable else "inapplicable",
        note="scaled weights satisfy the two-branch recursion"
        if rc.applicable else f"recursion premise failed at step {rc.violated_at}",
    ))
    return rows


def _adaptive_rows(rec, tol):
    style = rec.params.get("bound_style") or (
        "expert" if rec.geom.mirror == "entropy" else "drift"
    )
    if any(isinstance(l, CompositeLoss) for l in rec.losses):
        style = rec.params.get("bound_style", "composite")
    rows = [_delta_floor_row(rec)]
    rows.extend(_lam_rows(rec))
    tau = rec.params.get("tau", 0.0)
    beta_sq = rec.params["beta_sq"]
    D2, g = rec.geom.diameter_sq, rec.geom.gamma
    gsq = float(np.sum(np.asarray(rec.gnorms) ** 2))
    regret = rec.regret()
    ct = rec.path_len()

    if style == "drift":
        ok = ct <= tau + 1e-9
        rows.append(_premise_row("path-budget", ok, ct, tau,
                                 note="comparator path within configured budget"))
        vt = _vt_signed(rec)
        rows.append(_row("drift-arm-endpoint", regret,
                         2.0 * (rec.endpoint_gap() + vt), tol, applicable=ok,
                         note="regret <= 2 * (endpoint gap + signed drift)"))
        rows.append(_row("drift-arm-gradient", regret,
                         2.0 * math.sqrt((3.0 * D2 + g * tau) * gsq), tol, applicable=ok,
                         note="regret <= 2 * sqrt((3 D^2 + gamma tau) sum ||g||*^2)"))
    elif style == "static":
        vt = _vt_signed(rec)
        factor = 2.0 + g * ct / D2
        arm = min(rec.endpoint_gap() + vt, math.sqrt(3.0 * D2 * gsq))
        rows.append(_row("static-mode-bound", regret, factor * arm, tol,
                         note="beta^2 = D^2 checker mode"))
    elif style == "expert":
        rows.extend(_expert_rows(rec, tol, regret, gsq))
    elif style == "composite":
        ok = ct <= tau + 1e-9
        rows.append(_premise_row("path-budget", ok, ct, tau,
                                 note="comparator path within configured budget"))
        vt = _vt_signed(rec)  # shared L1 part cancels in consecutive differences
        first = float(rec.values[0])
        last = rec.losses[-1].value(rec.x_final)
        rows.append(_row("composite-arm-endpoint", regret,
                         2.0 * (first - last + vt), tol, applicable=ok,
                         note="variable-part drift, full-loss endpoints"))
        rows.append(_row("composite-arm-gradient", regret,
                         2.0 * math.sqrt((3.0 * D2 + g * tau) * gsq), tol,
                         applicable=ok))
    elif style == "composite-static":
        vt = _vt_signed(rec)
        rhs = min(2.0 * (rec.endpoint_gap() + vt),
                  2.0 * math.sqrt(D2) * math.sqrt(3.0 * gsq))
        rows.append(_row("composite-static-bound", regret, rhs, tol))
    return rows


def _expert_rows(rec, tol, regret, gsq):
    rows = []
    tau = rec.params.get("tau", 0.0)
    alpha = rec.params["alpha"]
    l_inf = rec.params.get("loss_sup", 1.0)
    T = rec.T
    gs = np.array([l.g for l in rec.losses])
    range_ok = bool(np.all(gs >= -1e-12) and float(np.max(gs)) <= l_inf + 1e-12)
    rows.append(_premise_row("gradient-range", range_ok,
                             float(np.max(np.abs(gs))), l_inf,
                             note="losses within [0, L_inf]"))
    ct = rec.path_len()
    path_ok = ct <= tau + 1e-9
    rows.append(_premise_row("path-budget", path_ok, ct, tau))
    ok = range_ok and path_ok
    clip_term = 2.0 * l_inf * T * alpha
    vt = _vt_signed(rec)
    rows.append(_row("expert-arm-endpoint", regret,
                     2.0 * (rec.endpoint_gap() + vt) + clip_term, tol, applicable=ok,
                     note="includes the simplex clipping term"))
    eg2 = float(np.sum(rec.extras["eg2"]))
    lnT = math.log(T)
    rows.append(_row("expert-arm-gradient", regret,
                     2.0 * math.sqrt((1.0 + (1.0 + tau) * lnT) * eg2) + clip_term, tol,
                     applicable=ok, note="local-norm arm"))
    # first-order corollary: learner loss bounded via its own total
    lt = float(np.sum(rec.values))
    ltu = float(np.sum(rec.comparator_values()))
    b = 2.0 * math.sqrt(l_inf * (1.0 + (1.0 + tau) * lnT))
    rows.append(_row("expert-first-order", lt,
                     first_order_bound(b, max(0.0, ltu) + clip_term), tol,
                     applicable=ok, note="small-loss form via first_order_bound"))
    return rows


def _doubling_rows(rec, tol):
    rows = [_delta_floor_row(rec)]
    D2, g = rec.geom.diameter_sq, rec.geom.gamma
    D = math.sqrt(D2)
    ct = rec.path_len()
    n = int(rec.epochs or 0)
    cap_arg = ct / (math.sqrt(2.0) * D) + 1.0
    rows.append(_row("epoch-count", n, math.log2(cap_arg), 1e-12,
                     note="restarts bounded by the path budget doublings"))
    vt = _vt_signed(rec)
    arm_a = rec.endpoint_gap() + vt
    arm_b = math.inf
    note = ""
    if ct > 0:
        inner = 3.0 * D2 * (math.log2(ct / (math.sqrt(2.0) * D)) + 1.0) + g * ct
        if inner > 0:
            gsq = float(np.sum(np.asarray(rec.gnorms) ** 2))
            arm_b = math.sqrt(inner * gsq)
        else:
            note = "gradient arm vacuous below one epoch of path"
    else:
        note = "gradient arm vacuous at zero path"
    c = math.sqrt(2.0) / (D + g * math.sqrt(2.0))
    rhs = (2.0 + c) * min(arm_a, arm_b)
    rows.append(_row("doubling-regret", rec.regret(), rhs, tol, note=note))
    return rows


def _abprod_rows(rec, tol):
    ex = rec.extras
    p = np.asarray(ex["p_a"])
    la = np.asarray(ex["loss_a"])
    lb = np.asarray(ex["loss_b"])
    r = np.asarray(ex["r"])
    k_final = float(ex["k_acc"][-1])
    mix = float(np.sum(p * la + (1.0 - p) * lb))
    two_ln2 = 2.0 * math.log(2.0)
    rows = [
        _row("prod-vs-benchmark", mix - float(np.sum(lb)),
             two_ln2 + 2.0 * math.log(k_final), tol,
             note="mixture loss tracks the benchmark learner"),
        _row("prod-vs-candidate", mix - float(np.sum(la)),
             two_ln2 + (2.0 + math.log(k_final)) * math.sqrt(1.0 + float(r @ r)), tol,
             note="mixture loss tracks the candidate learner"),
    ]
    return rows


def _mlprod_rows(rec, tol):
    from .combiners import AdaptMLProd, LossRange

    d = rec.losses[0].dim
    rng_cfg = rec.params.get("loss_range", (0.0, 1.0))
    comb = AdaptMLProd(d, LossRange(*rng_cfg))
    lhat_sum = 0.0
    unit_losses = np.empty((rec.T, d))
    weighted_rsq = np.zeros(d)
    for t, loss in enumerate(rec.losses):
        if not isinstance(loss, LinearLoss):
            return [BoundCheck("mlprod-replay", 0.0, 0.0, False,
                               status="inapplicable", note="needs linear losses")]
        g = np.array([comb.range.unit(v) for v in loss.g])
        unit_losses[t] = g
        p = comb.weights()
        lhat = float(p @ g)
        lhat_sum += lhat
        eta_old = comb.eta.copy()
        comb.update(loss)
        weighted_rsq += eta_old * (lhat - g) ** 2
    k_final = comb.k_acc
    rows = []
    col = np.sum(unit_losses, axis=0)
    for i in range(d):
        rhs = (2.0 * math.log(d)
               + float(weighted_rsq[i])
               + math.log(k_final) / float(comb.eta[i]))
        rows.append(_row(f"mlprod-expert-{i}", lhat_sum - float(col[i]), rhs, tol,
                         note="excess over this expert within its prod budget"))
    return rows
