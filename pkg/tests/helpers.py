"""Shared test utilities: instance builders and independent oracles."""

from fractions import Fraction
from itertools import combinations

import numpy as np

from covdetect import lp
from covdetect.model import (SystemConfig, build_network, generate_signatures,
                             sample_activity, simulate_received,
                             sample_covariance_set, ideal_covariance_set)


def draw_instance(cfg, seed, ideal=False):
    """(net, sigs, act, cov_set) with everything drawn from one seeded stream."""
    rng = np.random.default_rng(seed)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    if ideal:
        covs = ideal_covariance_set(net, sigs, act, cfg.noise_variance)
    else:
        ys = simulate_received(net, sigs, act, cfg, rng)
        covs = sample_covariance_set(ys, cfg.noise_variance)
    return net, sigs, act, covs


# ---------------------------------------------------------------------------
# Exact rational feasibility oracle for sign-constrained equality systems
# ---------------------------------------------------------------------------

def _to_standard_form(A, b, sign):
    """All-nonnegative standard form over Fractions (negate nonpos, split free)."""
    m = len(b)
    cols = []
    for j, s in enumerate(sign):
        col = [Fraction(A[i][j]) for i in range(m)]
        if s == lp.NONNEG:
            cols.append(col)
        elif s == lp.NONPOS:
            cols.append([-v for v in col])
        else:
            cols.append(col)
            cols.append([-v for v in col])
    rhs = [Fraction(v) for v in b]
    return cols, rhs


def _solve_exact(cols, subset, rhs):
    """Solve sum_{j in subset} x_j cols[j] = rhs exactly by Gaussian elimination.

    Returns the solution list if the chosen columns are linearly independent
    and the system is consistent, else None.
    """
    m = len(rhs)
    k = len(subset)
    aug = [[cols[j][i] for j in subset] + [rhs[i]] for i in range(m)]
    pivots = []
    row = 0
    for col in range(k):
        pivot = next((r for r in range(row, m) if aug[r][col] != 0), None)
        if pivot is None:
            return None  # dependent columns: not a vertex support
        aug[row], aug[pivot] = aug[pivot], aug[row]
        pv = aug[row][col]
        aug[row] = [v / pv for v in aug[row]]
        for r in range(m):
            if r != row and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * p for a, p in zip(aug[r], aug[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    if len(pivots) < k:
        return None
    # Consistency: remaining rows must be all-zero = 0.
    for r in range(row, m):
        if any(aug[r][c] != 0 for c in range(k)) or aug[r][k] != 0:
            return None
    return [aug[i][k] for i in range(k)]


def exact_feasibility(A, b, sign):
    """Exact feasibility of {A x = b, sign constraints} by vertex enumeration.

    The standard-form polyhedron {A2 y = b, y >= 0} contains no line, so it
    is nonempty iff it has a vertex, whose support is a set of linearly
    independent columns of size <= m. All such supports are enumerated with
    rational arithmetic.
    """
    cols, rhs = _to_standard_form(A, b, sign)
    m = len(rhs)
    n2 = len(cols)
    if all(v == 0 for v in rhs):
        return True  # y = 0
    for size in range(1, min(m, n2) + 1):
        for subset in combinations(range(n2), size):
            sol = _solve_exact(cols, subset, rhs)
            if sol is not None and all(v >= 0 for v in sol):
                return True
    return False


def random_feasibility_problem(rng, max_n=6, max_m=4):
    """Random small integer problem exercising all three sign tags."""
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    b = rng.integers(-3, 4, size=m).astype(float)
    tags = [lp.NONNEG, lp.NONPOS, lp.FREE]
    sign = [tags[int(rng.integers(0, 3))] for _ in range(n)]
    return A, b, sign


def equal_error_oracle(scores, truth):
    """Independent brute-force equal-error operating point.

    Scans every threshold between consecutive distinct scores (plus the two
    infinite endpoints) and returns (|p_md - p_fa|, p_e) of the best point
    under the (|diff|, p_e) ordering.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth).astype(bool)
    uniq = np.unique(scores)
    cuts = [-np.inf, np.inf]
    cuts += [0.5 * (uniq[i] + uniq[i + 1]) for i in range(len(uniq) - 1)]
    best = None
    for t in cuts:
        md = np.mean(scores[truth] <= t) if truth.any() else 0.0
        fa = np.mean(scores[~truth] > t) if (~truth).any() else 0.0
        key = (abs(md - fa), 0.5 * (md + fa))
        if best is None or key < best:
            best = key
    return best
