"""Minimal-deviation quadratic-program safety filter.

Each control step assembles one linear row per barrier constraint plus the
actuation box, then solves

    minimize   0.5 * ||u - u_des||^2
    subject to A u >= b,  u_min <= u <= u_max

exactly with a primal active-set iteration (Hessian = identity, so every
equality-constrained subproblem is a projection). Safe commands pass through
bitwise unchanged; unsafe commands are minimally modified. If the rows and
box admit no feasible point the filter falls back to the box point that
minimizes the maximum row violation and says so loudly in the result status.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .barrier import BarrierConstraint, cbf_row
from .dynamics import ControlInput, PlantModel, PlantState
from .errors import SolverStall, StructurallyInfeasible

PASSTHROUGH = "passthrough"
MODIFIED = "modified"
INFEASIBLE_FALLBACK = "infeasible_fallback"

_DEP_TOL = 1e-12  # rank test for adding a row to the working set
_FEAS_TOL = 1e-11  # violation considered zero inside the iteration


@dataclass(frozen=True)
class QpProblem:
    """Assembled filter problem: rows mean a . u >= b."""

    u_des: np.ndarray
    rows_a: np.ndarray  # shape (m, control_dim)
    rows_b: np.ndarray  # shape (m,)
    row_ids: tuple[str, ...]
    box: np.ndarray  # shape (control_dim, 2)

    @property
    def control_dim(self) -> int:
        return self.u_des.shape[0]


@dataclass(frozen=True)
class FilterResult:
    u_out: ControlInput
    intervened: bool
    deviation: float
    active_row_ids: tuple[str, ...]
    status: str
    solve_time: float


def assemble_qp(
    constraints: list[BarrierConstraint],
    model: PlantModel,
    state: PlantState,
    u_des: ControlInput,
) -> QpProblem:
    """One row per constraint via cbf_row; box from the model bounds.

    Rows with a = 0 are insensitive to control: vacuous when b <= 0 (dropped),
    structurally infeasible when b > 0 (no command can help; raised).
    """
    rows_a = []
    rows_b = []
    row_ids = []
    for constraint in constraints:
        a, b = cbf_row(constraint, model, state)
        if not a.any():
            if b > 0.0:
                raise StructurallyInfeasible(constraint.id)
            continue
        rows_a.append(a)
        rows_b.append(b)
        row_ids.append(constraint.id)
    m = len(rows_a)
    d = model.control_dim
    return QpProblem(
        u_des=np.asarray(u_des.u, dtype=float),
        rows_a=np.asarray(rows_a, dtype=float).reshape(m, d),
        rows_b=np.asarray(rows_b, dtype=float),
        row_ids=tuple(row_ids),
        box=model.control_bounds,
    )


def solve_qp(qp: QpProblem) -> tuple[np.ndarray, tuple[int, ...], str]:
    """Exact minimizer of 0.5||u - u_des||^2 under rows and box.

    Returns (u_star, active row indices into qp.rows_a, status). Starts from
    the box-clamped u_des; if that already satisfies every row it is optimal
    (passthrough when it equals u_des bitwise). Otherwise iterates an active
    set, adding the most-violated constraint (lowest index on ties) and
    dropping negative-multiplier members, each subproblem solved by
    projection. An empty feasible set yields the least-max-violation box
    point with status infeasible_fallback.
    """
    d = qp.control_dim
    m = qp.rows_a.shape[0]

    if d == 1:
        lo0 = qp.box[0, 0]
        hi0 = qp.box[0, 1]
        ud = qp.u_des[0]
        u0 = lo0 if ud < lo0 else (hi0 if ud > hi0 else ud)
        violated = False
        active = []
        for i in range(m):
            slack = qp.rows_b[i] - qp.rows_a[i, 0] * u0
            if slack > 0.0:
                violated = True
                break
            if slack == 0.0:
                active.append(i)
        if not violated:
            if u0 == ud:
                return qp.u_des, (), PASSTHROUGH
            return np.array([u0]), tuple(active), MODIFIED
        return _solve_interval(qp, float(lo0), float(hi0))

    lo = qp.box[:, 0]
    hi = qp.box[:, 1]
    u0 = np.clip(qp.u_des, lo, hi)
    slack0 = qp.rows_b - qp.rows_a @ u0 if m else np.empty(0)
    if not np.any(slack0 > 0.0):
        if np.array_equal(u0, qp.u_des):
            return qp.u_des, (), PASSTHROUGH
        active = tuple(int(i) for i in np.nonzero(slack0 == 0.0)[0])
        return u0, active, MODIFIED

    # General constraint list as scalar triples (a0, a1, b) meaning
    # a0*u0 + a1*u1 >= b: rows first, then box faces, so row indices stay
    # stable for reporting.
    cons: list[tuple[float, float, float]] = []
    max_b = 0.0
    for i in range(m):
        bi = float(qp.rows_b[i])
        cons.append((float(qp.rows_a[i, 0]), float(qp.rows_a[i, 1]), bi))
        max_b = max(max_b, abs(bi))
    for j in range(d):
        e0, e1 = (1.0, 0.0) if j == 0 else (0.0, 1.0)
        cons.append((e0, e1, float(lo[j])))
        cons.append((-e0, -e1, -float(hi[j])))
        max_b = max(max_b, abs(float(lo[j])), abs(float(hi[j])))

    ud0 = float(qp.u_des[0])
    ud1 = float(qp.u_des[1])
    feas_tol = _FEAS_TOL * (1.0 + max_b + abs(ud0) + abs(ud1))
    cap = (d + m + 8) ** 2
    working: list[int] = []
    u0c, u1c = ud0, ud1
    lam: list[float] = []

    for _ in range(cap):
        u0c, u1c, lam = _project2(ud0, ud1, cons, working)
        if lam and min(lam) < -feas_tol:
            worst = min(range(len(lam)), key=lambda k: lam[k])
            working.pop(worst)
            continue
        worst_violation = 0.0
        j = -1
        for i, (a0, a1, b) in enumerate(cons):
            if i in working:
                continue
            v = b - a0 * u0c - a1 * u1c
            if v > worst_violation:
                worst_violation = v
                j = i
        if worst_violation <= feas_tol:
            active = tuple(sorted(i for i in working if i < m))
            return np.array([u0c, u1c]), active, MODIFIED
        # Make room for the entering row j: while its normal lies in the span
        # of the working set, a member must leave (dual step) or the problem
        # is infeasible in this direction. j stays the entering candidate
        # through the drops, otherwise the add/drop pair can cycle.
        infeasible = False
        while not _independent2(cons, working, j, d):
            drop = _dual_drop2(cons, working, lam, j)
            if drop is None:
                infeasible = True
                break
            working.pop(drop)
            _u0, _u1, lam = _project2(ud0, ud1, cons, working)
        if infeasible:
            return _fallback(qp, lo, hi, feas_tol)
        working.append(j)

    # Cap exhausted: certify feasibility exactly before declaring a bug.
    u_fb, active, status = _fallback(qp, lo, hi, feas_tol)
    worst = qp.rows_b - qp.rows_a @ u_fb
    if float(np.max(worst)) > feas_tol:
        return u_fb, active, status
    raise SolverStall(f"active-set iteration cap {cap} exceeded on a feasible problem")


def _solve_interval(qp: QpProblem, lo: float, hi: float) -> tuple[np.ndarray, tuple[int, ...], str]:
    """One control axis: the feasible set of halflines and box is an interval,
    so the minimizer is the direct projection of u_des onto it. Reached only
    when the clamped u_des violates some row, so the result is a genuine
    modification or a fallback."""
    u_des = float(qp.u_des[0])
    lower, lower_idx = lo, -1
    upper, upper_idx = hi, -1
    for i in range(qp.rows_a.shape[0]):
        a = qp.rows_a[i, 0]
        bound = qp.rows_b[i] / a
        if a > 0.0:
            if bound > lower:
                lower, lower_idx = bound, i
        elif bound < upper:
            upper, upper_idx = bound, i
    if lower <= upper:
        active = []
        if u_des <= lower:
            u_star = lower
            if lower_idx >= 0:
                active.append(lower_idx)
        else:
            u_star = upper
            if upper_idx >= 0:
                active.append(upper_idx)
        return np.array([u_star]), tuple(active), MODIFIED
    u_fb = _least_max_violation(qp, qp.rows_a, qp.rows_b, np.array([lo]), np.array([hi]))
    worst = qp.rows_b - qp.rows_a @ u_fb
    top = float(np.max(worst))
    active = tuple(int(i) for i in np.nonzero(worst >= top - _FEAS_TOL * (1.0 + abs(top)))[0])
    return u_fb, active, INFEASIBLE_FALLBACK


def _project2(ud0, ud1, cons, working):
    """Two-axis projection of u_des onto the working-set equalities."""
    k = len(working)
    if k == 0:
        return ud0, ud1, []
    if k == 1:
        a0, a1, b = cons[working[0]]
        lam = (b - a0 * ud0 - a1 * ud1) / (a0 * a0 + a1 * a1)
        return ud0 + lam * a0, ud1 + lam * a1, [lam]
    p0, p1, pb = cons[working[0]]
    q0, q1, qb = cons[working[1]]
    g11 = p0 * p0 + p1 * p1
    g12 = p0 * q0 + p1 * q1
    g22 = q0 * q0 + q1 * q1
    det = g11 * g22 - g12 * g12
    r0 = pb - p0 * ud0 - p1 * ud1
    r1 = qb - q0 * ud0 - q1 * ud1
    l0 = (g22 * r0 - g12 * r1) / det
    l1 = (g11 * r1 - g12 * r0) / det
    return ud0 + l0 * p0 + l1 * q0, ud1 + l0 * p1 + l1 * q1, [l0, l1]


def _independent2(cons, working, j, control_dim) -> bool:
    a0, a1, _ = cons[j]
    norm = math.hypot(a0, a1)
    if not working:
        return norm > _DEP_TOL
    if len(working) >= control_dim:
        return False
    w0, w1, _ = cons[working[0]]
    cross = w0 * a1 - w1 * a0
    return abs(cross) > _DEP_TOL * max(1.0, norm) * math.hypot(w0, w1)


def _dual_drop2(cons, working, lam, j):
    """Pick the working-set member to drop so the violated (dependent) row can
    enter; None when no member helps, which certifies infeasibility."""
    a0, a1, _ = cons[j]
    if len(working) == 1:
        w0, w1, _ = cons[working[0]]
        r = [(w0 * a0 + w1 * a1) / (w0 * w0 + w1 * w1)]
    else:
        p0, p1, _ = cons[working[0]]
        q0, q1, _ = cons[working[1]]
        g11 = p0 * p0 + p1 * p1
        g12 = p0 * q0 + p1 * q1
        g22 = q0 * q0 + q1 * q1
        det = g11 * g22 - g12 * g12
        c0 = p0 * a0 + p1 * a1
        c1 = q0 * a0 + q1 * a1
        r = [(g22 * c0 - g12 * c1) / det, (g11 * c1 - g12 * c0) / det]
    candidates = [(lam[k] / r[k], k) for k in range(len(working)) if r[k] > _DEP_TOL]
    if not candidates:
        return None
    return min(candidates, key=lambda t: (t[0], working[t[1]]))[1]


def _fallback(qp, lo, hi, feas_tol):
    u_fb = _least_max_violation(qp, qp.rows_a, qp.rows_b, lo, hi)
    worst = qp.rows_b - qp.rows_a @ u_fb
    top = float(np.max(worst))
    active = tuple(int(i) for i in np.nonzero(worst >= top - feas_tol)[0])
    return u_fb, active, INFEASIBLE_FALLBACK


def _least_max_violation(qp, rows_a, rows_b, lo, hi) -> np.ndarray:
    """Exact minimizer of max_i (b_i - a_i . u) over the box; ties broken by
    distance to u_des, then lexicographically. The max of affine functions is
    piecewise linear and convex, so the minimum over the box is attained at a
    box corner, at a pairwise equal-value point, or where equal-value loci
    cross box faces; all candidates are enumerated.
    """
    d = lo.shape[0]
    m = rows_a.shape[0]
    candidates = []
    if d == 1:
        candidates.extend([np.array([lo[0]]), np.array([hi[0]])])
        for i, j in combinations(range(m), 2):
            da = rows_a[i, 0] - rows_a[j, 0]
            if da != 0.0:
                u = (rows_b[i] - rows_b[j]) / da
                if lo[0] <= u <= hi[0]:
                    candidates.append(np.array([u]))
    else:
        for cx in (lo[0], hi[0]):
            for cy in (lo[1], hi[1]):
                candidates.append(np.array([cx, cy]))
        # pair equal-value line crossed with each box face
        for i, j in combinations(range(m), 2):
            da = rows_a[i] - rows_a[j]
            db = rows_b[i] - rows_b[j]
            for axis in (0, 1):
                other = 1 - axis
                if da[other] == 0.0:
                    continue
                for fixed in (lo[axis], hi[axis]):
                    val = (db - da[axis] * fixed) / da[other]
                    if lo[other] <= val <= hi[other]:
                        u = np.empty(2)
                        u[axis] = fixed
                        u[other] = val
                        candidates.append(u)
        # triples: two pair equal-value lines
        for i, j, k in combinations(range(m), 3):
            A2 = np.array([rows_a[i] - rows_a[j], rows_a[i] - rows_a[k]])
            b2 = np.array([rows_b[i] - rows_b[j], rows_b[i] - rows_b[k]])
            det = A2[0, 0] * A2[1, 1] - A2[0, 1] * A2[1, 0]
            if abs(det) < 1e-14:
                continue
            u = np.linalg.solve(A2, b2)
            if np.all(u >= lo - 1e-12) and np.all(u <= hi + 1e-12):
                candidates.append(np.clip(u, lo, hi))
    best = None
    for u in candidates:
        phi = float(np.max(rows_b - rows_a @ u))
        dev = float(np.linalg.norm(u - qp.u_des))
        key = (phi, dev, tuple(u))
        if best is None or key < best[0]:
            best = (key, u)
    return best[1]


def filter_control(
    constraints: list[BarrierConstraint],
    model: PlantModel,
    state: PlantState,
    u_des: ControlInput,
) -> FilterResult:
    """Assemble and solve the filter QP; never hides an infeasible fallback."""
    start = time.perf_counter()
    qp = assemble_qp(constraints, model, state, u_des)
    u_star, active_idx, status = solve_qp(qp)
    elapsed = time.perf_counter() - start
    if status == PASSTHROUGH:
        deviation = 0.0
        u_out = u_des
    else:
        deviation = math.sqrt(float(np.square(u_star - qp.u_des).sum()))
        u_out = ControlInput(np.clip(u_star, qp.box[:, 0], qp.box[:, 1]), qp.box)
    return FilterResult(
        u_out=u_out,
        intervened=status != PASSTHROUGH,
        deviation=deviation,
        active_row_ids=tuple(qp.row_ids[i] for i in active_idx),
        status=status,
        solve_time=elapsed,
    )


def check_kkt(qp: QpProblem, u_star: np.ndarray, tol: float = 1e-8) -> dict:
    """Residuals of the KKT system at u_star for the full problem (rows plus
    box). Multipliers are recovered by nonnegative least squares on the
    active rows; used by tests and the solver's own validation evidence.
    """
    lo = qp.box[:, 0]
    hi = qp.box[:, 1]
    m = qp.rows_a.shape[0]
    d = qp.control_dim
    cons_a = np.zeros((m + 2 * d, d))
    cons_b = np.zeros(m + 2 * d)
    if m:
        cons_a[:m] = qp.rows_a
        cons_b[:m] = qp.rows_b
    for j in range(d):
        cons_a[m + 2 * j, j] = 1.0
        cons_b[m + 2 * j] = lo[j]
        cons_a[m + 2 * j + 1, j] = -1.0
        cons_b[m + 2 * j + 1] = -hi[j]
    slack = cons_a @ u_star - cons_b
    primal = float(max(0.0, -np.min(slack))) if slack.size else 0.0
    active = np.nonzero(slack <= tol * 10)[0]
    grad = u_star - qp.u_des
    if active.size:
        A = cons_a[active]
        lam, *_ = np.linalg.lstsq(A.T, grad, rcond=None)
        lam = np.maximum(lam, 0.0)
        stationarity = float(np.linalg.norm(grad - A.T @ lam))
        comp = float(np.max(np.abs(lam * slack[active]))) if lam.size else 0.0
    else:
        stationarity = float(np.linalg.norm(grad))
        comp = 0.0
    return {"stationarity": stationarity, "primal": primal, "complementarity": comp}
