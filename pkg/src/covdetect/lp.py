"""Phase-one simplex feasibility solver for sign-constrained equality systems.

Solves "find x with A_eq x = b_eq, x_i >= 0 / x_i <= 0 / x_i free" by the
classic phase-1 method: non-positive variables are negated, free variables
are split into differences of non-negatives, one artificial variable is
added per equality row, and the sum of the artificials is minimized with
the simplex method (Dantzig entering rule with a lexicographic ratio test
for anti-cycling on degenerate pivots). The system is declared feasible iff
the phase-1 optimum is below tolerance.

Rows and columns are equilibrated (scaled to unit infinity norm) before
solving; feasibility status is invariant under positive row/column scaling,
and the witness is mapped back to the original variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NONNEG = "nonneg"
NONPOS = "nonpos"
FREE = "free"

_PIVOT_EPS = 1e-11


class LpError(Exception):
    """Solver failure (iteration cap, numerical breakdown); distinct from infeasible."""


@dataclass
class FeasibilityProblem:
    A_eq: np.ndarray            # (m, n) real
    b_eq: np.ndarray            # (m,)
    sign: list                  # per-variable tag: "nonneg" | "nonpos" | "free"

    def __post_init__(self):
        self.A_eq = np.asarray(self.A_eq, dtype=float)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        if self.A_eq.ndim != 2:
            raise ValueError("A_eq must be 2-D")
        m, n = self.A_eq.shape
        if m < 1 or n < 1:
            raise ValueError("need m >= 1 and n >= 1")
        if self.b_eq.shape != (m,):
            raise ValueError("b_eq length mismatch")
        if len(self.sign) != n:
            raise ValueError("sign length mismatch")
        if not (np.all(np.isfinite(self.A_eq)) and np.all(np.isfinite(self.b_eq))):
            raise ValueError("non-finite entries")
        for s in self.sign:
            if s not in (NONNEG, NONPOS, FREE):
                raise ValueError(f"unknown sign tag {s!r}")


@dataclass
class LpOutcome:
    status: str                         # "feasible" | "infeasible"
    witness: np.ndarray | None = None   # length-n vector when feasible
    certificate_residual: float = 0.0   # ||A x - b||_inf for the witness


def _lexicographic_leave(tableau, col, cand, width) -> int:
    """Lexicographic tie-break for the leaving row.

    Among the rows tied in the minimum-ratio test, pick the one whose
    (rhs, row)/pivot-entry vector is lexicographically smallest. The initial
    rows carry distinct unit vectors from the artificial identity block, so
    ties always resolve uniquely and the simplex cannot cycle.
    """
    if cand.size == 1:
        return int(cand[0])
    live = cand
    # Compare rhs first, then the tableau columns left to right.
    for j in [-1, *range(width)]:
        vals = tableau[live, j] / col[live]
        lo = np.min(vals)
        live = live[vals <= lo + 1e-12 * max(1.0, abs(lo))]
        if live.size == 1:
            break
    return int(live[0])


def _dump_tableau(path, tableau, basis, it):
    with open(path, "a") as f:
        f.write(f"# iteration {it}, basis {list(basis)}\n")
        np.savetxt(f, tableau, fmt="%.6e")


def solve_feasibility(problem: FeasibilityProblem, tol: float = 1e-9,
                      max_iter: int | None = None,
                      dump_path: str | None = None) -> LpOutcome:
    """Decide feasibility of the sign-constrained equality system.

    Returns an LpOutcome; raises LpError if the simplex iteration cap
    (default 50*(m+n)) is exceeded, which is reported distinctly from
    infeasibility.
    """
    A = problem.A_eq.copy()
    b = problem.b_eq.copy()
    n = A.shape[1]

    # Drop all-zero rows: 0 = b_i is trivially satisfied or trivially infeasible.
    row_norm = np.max(np.abs(A), axis=1)
    zero_rows = row_norm == 0.0
    if np.any(zero_rows):
        if np.any(np.abs(b[zero_rows]) > tol):
            return LpOutcome(status="infeasible")
        A = A[~zero_rows]
        b = b[~zero_rows]
        row_norm = row_norm[~zero_rows]
    if A.shape[0] == 0:
        # Only trivial rows: the zero vector works.
        return LpOutcome(status="feasible", witness=np.zeros(n),
                         certificate_residual=float(np.max(np.abs(problem.b_eq))))

    # Equilibrate rows and columns to unit infinity norm.
    A = A / row_norm[:, None]
    b = b / row_norm
    col_scale = np.max(np.abs(A), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    A = A / col_scale[None, :]
    m = A.shape[0]

    # Variable transform: A2 columns are all non-negative variables.
    cols = []
    colmap = []  # (orig_index, multiplier)
    for j, s in enumerate(problem.sign):
        if s == NONNEG:
            cols.append(A[:, j])
            colmap.append((j, 1.0))
        elif s == NONPOS:
            cols.append(-A[:, j])
            colmap.append((j, -1.0))
        else:  # free: x_j = x+ - x-
            cols.append(A[:, j])
            colmap.append((j, 1.0))
            cols.append(-A[:, j])
            colmap.append((j, -1.0))
    A2 = np.column_stack(cols)
    n2 = A2.shape[1]

    # Flip rows so the right-hand side is non-negative, then add artificials.
    neg = b < 0
    A2[neg] *= -1.0
    b2 = np.where(neg, -b, b)

    # Tableau: [A2 | I | rhs]; last row holds reduced costs and -objective.
    tableau = np.zeros((m + 1, n2 + m + 1))
    tableau[:m, :n2] = A2
    tableau[:m, n2:n2 + m] = np.eye(m)
    tableau[:m, -1] = b2
    # Phase-1 cost: sum of artificials; with the artificial basis the reduced
    # cost of structural column j is -sum_i A2[i, j].
    tableau[m, :n2] = -A2.sum(axis=0)
    tableau[m, -1] = -b2.sum()
    basis = list(range(n2, n2 + m))

    if max_iter is None:
        max_iter = 50 * (m + n2)
    for it in range(max_iter + 1):
        if dump_path is not None:
            _dump_tableau(dump_path, tableau, basis, it)
        costs = tableau[m, :n2 + m]
        # Dantzig's rule; the lexicographic ratio test below rules out cycling.
        enter = int(np.argmin(costs))
        if costs[enter] >= -_PIVOT_EPS:
            break
        col = tableau[:m, enter]
        pos = col > _PIVOT_EPS
        if not np.any(pos):
            raise LpError("phase-1 objective unbounded (numerical breakdown)")
        ratios = np.full(m, np.inf)
        ratios[pos] = tableau[:m, -1][pos] / col[pos]
        best = np.min(ratios)
        cand = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        leave = _lexicographic_leave(tableau, col, cand, n2 + m)
        piv = tableau[leave, enter]
        pivot_row = tableau[leave] / piv
        factors = tableau[:, enter].copy()
        tableau -= np.outer(factors, pivot_row)
        tableau[leave] = pivot_row
        basis[leave] = enter
    else:
        raise LpError(f"iteration cap {max_iter} exceeded")

    objective = -tableau[m, -1]
    if objective > tol:
        return LpOutcome(status="infeasible")

    # Read the witness off the basis and map back to original variables.
    y = np.zeros(n2 + m)
    for i, bj in enumerate(basis):
        y[bj] = max(tableau[i, -1], 0.0)
    x = np.zeros(n)
    for k, (j, mult) in enumerate(colmap):
        x[j] += mult * y[k]
    x /= col_scale

    residual = float(np.max(np.abs(problem.A_eq @ x - problem.b_eq)))
    _check_witness(problem, x, tol)
    return LpOutcome(status="feasible", witness=x, certificate_residual=residual)


def _check_witness(problem, x, tol):
    """Soundness check: the witness must satisfy its own problem to tolerance
    (on the row-equilibrated system)."""
    scale = np.max(np.abs(problem.A_eq), axis=1)
    scale[scale == 0.0] = 1.0
    res = np.max(np.abs((problem.A_eq @ x - problem.b_eq) / scale))
    if res > 100 * tol:
        raise LpError(f"witness residual {res:.3e} exceeds tolerance")
    for j, s in enumerate(problem.sign):
        if s == NONNEG and x[j] < -tol:
            raise LpError("witness violates non-negativity")
        if s == NONPOS and x[j] > tol:
            raise LpError("witness violates non-positivity")
