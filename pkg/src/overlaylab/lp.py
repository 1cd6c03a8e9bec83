"""Bounded-variable linear programming with dual extraction.

Maximizes c.x subject to A x <= b and per-variable bounds, returning both the
primal optimum and the duals of the inequality rows.  The implementation is a
dense two-phase tableau simplex: desk-scale instances (tens of rows, up to a
few tens of thousands of columns) do not justify sparse machinery.

Pricing uses Dantzig's rule with index tie-breaks for speed, and switches to
Bland's rule after a run of degenerate pivots so cycling cannot occur.  The
pivot sequence is a pure function of the input, so repeated solves of the same
program give bit-identical answers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
STALL_LIMIT = 200  # degenerate pivots before falling back to Bland's rule


class LpInputError(ValueError):
    """Malformed program: NaN/Inf coefficients or inconsistent shapes."""


class LpSolverError(RuntimeError):
    """The solver could not certify an answer (iteration cap, drift)."""


@dataclass
class LinearProgram:
    """maximize c.x  s.t.  A x <= b,  lo <= x <= hi (hi may be +inf)."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.ndim != 2:
            raise LpInputError("A must be 2-D")
        m, n = self.a.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise LpInputError("inconsistent dimensions")
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float)
        self.hi = np.full(n, INF) if self.hi is None else np.asarray(self.hi, dtype=float)
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise LpInputError("inconsistent bound dimensions")
        for arr in (self.c, self.a, self.b):
            if not np.all(np.isfinite(arr)):
                raise LpInputError("NaN or Inf in program data")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise LpInputError("NaN in bounds")
        if np.any(self.lo > self.hi):
            raise LpInputError("lo > hi for some variable")
        if not np.all(np.isfinite(self.lo)):
            raise LpInputError("lower bounds must be finite")


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None  # y_i >= 0 per inequality row
    reduced_costs: np.ndarray | None = None  # c_j - y.A_j per variable
    iterations: int = 0


def solve_lp(lp: LinearProgram, max_iterations: int = 50_000) -> LpSolution:
    """Solve the program; optimal solutions carry row duals and reduced costs.

    Raises LpSolverError instead of returning a silently wrong answer when the
    iteration cap is hit or the final tableau fails verification.
    """
    m, n = lp.a.shape

    # Shift lower bounds to zero and fold finite upper bounds into extra rows,
    # so internally the problem is max c.x', A' x' <= b', x' >= 0.
    shift = lp.lo
    b_rows = lp.b - lp.a @ shift
    a_rows = lp.a
    ub_idx = np.flatnonzero(np.isfinite(lp.hi))
    if len(ub_idx):
        ub_a = np.zeros((len(ub_idx), n))
        ub_a[np.arange(len(ub_idx)), ub_idx] = 1.0
        a_rows = np.vstack([a_rows, ub_a])
        b_rows = np.concatenate([b_rows, lp.hi[ub_idx] - shift[ub_idx]])

    status, x_shifted, y_all, iters = _simplex(lp.c, a_rows, b_rows, max_iterations)
    if status != "optimal":
        return LpSolution(status=status, iterations=iters)

    x = x_shifted + shift
    duals = y_all[:m]
    reduced = lp.c - y_all @ a_rows  # includes upper-bound rows in the price
    objective = float(lp.c @ x)

    _verify(lp, x, duals, reduced, objective, y_all, b_rows, x_shifted, a_rows)
    return LpSolution("optimal", x, objective, duals, reduced, iters)


def _verify(lp, x, duals, reduced, objective, y_all, b_rows, x_shifted, a_rows):
    scale = 1.0 + max(
        float(np.max(np.abs(lp.b), initial=0.0)), float(np.max(np.abs(x), initial=0.0))
    )
    slack = lp.b - lp.a @ x
    if np.min(slack, initial=0.0) < -FEAS_TOL * scale:
        raise LpSolverError("primal feasibility lost in final tableau")
    if np.min(duals, initial=0.0) < -FEAS_TOL:
        raise LpSolverError("negative dual in final tableau")
    gap = abs(objective - float(y_all @ b_rows) - float(lp.c @ lp.lo))
    if gap > FEAS_TOL * (1.0 + abs(objective)) + FEAS_TOL:
        raise LpSolverError(f"strong duality gap {gap:g} exceeds tolerance")
    cs = np.abs(y_all[: len(lp.b)] * slack)
    if np.max(cs, initial=0.0) > FEAS_TOL * scale * 10:
        raise LpSolverError("complementary slackness violated in final tableau")


def _simplex(c, a, b, max_iterations):
    """Two-phase tableau simplex for max c.x, A x <= b, x >= 0."""
    m, n = a.shape
    # Flip rows with negative rhs and give them artificial variables.
    neg = b < 0
    a = a.copy()
    b = b.copy()
    a[neg] *= -1.0
    b[neg] *= -1.0
    n_art = int(np.count_nonzero(neg))

    # Column layout: [structural (n) | slacks (m) | artificials (n_art)]
    total = n + m + n_art
    T = np.zeros((m, total + 1))
    T[:, :n] = a
    T[:, n : n + m] = np.eye(m)
    # A flipped row's slack enters with -1 (it was  a.x - s = b  originally).
    for i in np.flatnonzero(neg):
        T[i, n + i] = -1.0
    art_cols = {}
    j = n + m
    for i in np.flatnonzero(neg):
        T[i, j] = 1.0
        art_cols[i] = j
        j += 1
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = art_cols.get(i, n + i)

    iters = 0

    def run_phase(obj, allowed, iters):
        """Price with obj over allowed columns; pivot until optimal."""
        z = obj[basis] @ T - _embed(obj, total + 1)
        stall = 0
        last_obj = -INF
        while True:
            red = -z[:total]
            red[~allowed] = -INF
            if stall < STALL_LIMIT:
                col = int(np.argmax(red))
                if red[col] <= PIVOT_TOL:
                    return z, iters, True
            else:  # Bland: first improving index
                pos = np.flatnonzero(red > PIVOT_TOL)
                if len(pos) == 0:
                    return z, iters, True
                col = int(pos[0])
            colvec = T[:, col]
            mask = colvec > PIVOT_TOL
            if not mask.any():
                return z, iters, False  # unbounded in this phase
            ratios = np.full(m, INF)
            ratios[mask] = T[mask, -1] / colvec[mask]
            best = np.min(ratios)
            # deterministic tie-break: smallest basis column id among ties
            ties = np.flatnonzero(ratios <= best + 1e-12)
            row = int(ties[np.argmin(basis[ties])])
            _pivot(T, row, col)
            z = z - z[col] * T[row]
            z[col] = 0.0  # exact after pivot
            basis[row] = col
            iters += 1
            if iters > max_iterations:
                raise LpSolverError("simplex iteration cap exceeded")
            cur = float(z[-1])
            if cur <= last_obj + 1e-12:
                stall += 1
            else:
                stall = 0
            last_obj = cur

    allowed = np.ones(total, dtype=bool)
    if n_art:
        phase1 = np.zeros(total)
        phase1[n + m :] = -1.0  # maximize -(sum of artificials)
        z1, iters, ok = run_phase(phase1, allowed, iters)
        if float(z1[-1]) < -FEAS_TOL:
            return "infeasible", None, None, iters
        # Drive any artificial still in the basis out (degenerate rows).
        for i in range(m):
            if basis[i] >= n + m:
                row_vals = np.abs(T[i, : n + m])
                cand = np.flatnonzero(row_vals > PIVOT_TOL)
                if len(cand):
                    _pivot(T, i, int(cand[0]))
                    basis[i] = int(cand[0])
        allowed[n + m :] = False

    obj = np.zeros(total)
    obj[:n] = c
    z2, iters, bounded = run_phase(obj, allowed, iters)
    if not bounded:
        return "unbounded", None, None, iters

    x = np.zeros(total)
    x[basis] = T[:, -1]
    # Row duals: the z-row entry at each slack column equals the dual of the
    # original row (the slack column carries the flip sign, so no adjustment).
    y = z2[n : n + m].copy()
    y[np.abs(y) < PIVOT_TOL] = 0.0
    np.maximum(y, 0.0, out=y)
    return "optimal", x[:n], y, iters


def _embed(obj, width):
    out = np.zeros(width)
    out[: len(obj)] = obj
    return out


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
