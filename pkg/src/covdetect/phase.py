"""Phase-transition analysis: Fisher information, real Khatri-Rao expansions,
and LP-based consistency verdicts for all detection regimes.

Consistency of the maximum-likelihood estimates in the many-antenna limit
holds iff the Fisher-information null space meets the feasible cone only at
zero. The null space is the real kernel of an L^2-row expansion built from
the columnwise self Khatri-Rao product of the signature matrix (optionally
gain-scaled), and the cone intersection test reduces to infeasibility of a
small linear program.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import lp
from .model import SystemConfig, SignatureSet, build_network, generate_signatures, sample_activity

REGIME_SINGLE_KNOWN = "single_known"
REGIME_SINGLE_UNKNOWN = "single_unknown"
REGIME_MULTICELL = "multicell"


@dataclass
class FisherInfo:
    matrix: np.ndarray     # real symmetric, per-antenna (the M factor is omitted)
    regime: str


@dataclass
class RealExpansion:
    matrix: np.ndarray     # real, L^2 x (N or B*N)
    L: int

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


@dataclass
class ConditionVerdict:
    holds: bool
    lp_status: str
    support_rank_ok: bool = True


def khatri_rao_real_rows(S: np.ndarray, gains: np.ndarray | None = None) -> RealExpansion:
    """Real row expansion of the columnwise self Khatri-Rao product of S.

    Rows come in two sets built from the rows r_i of S:
    symmetric (i <= j):     Re(r_i)*Re(r_j) + Im(r_i)*Im(r_j)
    antisymmetric (i < j):  Re(r_i)*Im(r_j) - Im(r_i)*Re(r_j)
    for a total of exactly L^2 rows. If `gains` is given the columns are
    scaled by the per-device power gains.
    """
    S = np.asarray(S)
    L = S.shape[0]
    re, im = S.real, S.imag
    rows = []
    for i in range(L):
        for j in range(i, L):
            rows.append(re[i] * re[j] + im[i] * im[j])
    for i in range(L):
        for j in range(i + 1, L):
            rows.append(re[i] * im[j] - im[i] * re[j])
    mat = np.array(rows)
    if gains is not None:
        gains = np.asarray(gains, dtype=float)
        if np.any(gains <= 0):
            raise ValueError("gains must be positive")
        mat = mat * gains[None, :]
    return RealExpansion(matrix=mat, L=L)


def fisher_info_unknown_lsf(S: np.ndarray, gamma_truth: np.ndarray,
                            noise_var: float) -> FisherInfo:
    """Per-antenna Fisher information of the combined coefficients:
    J = |P|^2 elementwise with P = S^H Sigma^{-1} S."""
    Sigma = (S * np.asarray(gamma_truth)[None, :]) @ S.conj().T \
        + noise_var * np.eye(S.shape[0])
    P = S.conj().T @ np.linalg.inv(Sigma) @ S
    J = np.real(P * P.conj())
    return FisherInfo(matrix=0.5 * (J + J.T), regime=REGIME_SINGLE_UNKNOWN)


def fisher_info_known_lsf(S: np.ndarray, gains: np.ndarray, a_truth: np.ndarray,
                          noise_var: float) -> FisherInfo:
    """J = |Q|^2 elementwise with Q = G^(1/2) S^H Sigma^{-1} S G^(1/2)."""
    g = np.asarray(gains, dtype=float)
    Sigma = (S * (np.asarray(a_truth) * g)[None, :]) @ S.conj().T \
        + noise_var * np.eye(S.shape[0])
    root = np.sqrt(g)
    Q = root[:, None] * (S.conj().T @ np.linalg.inv(Sigma) @ S) * root[None, :]
    J = np.real(Q * Q.conj())
    return FisherInfo(matrix=0.5 * (J + J.T), regime=REGIME_SINGLE_KNOWN)


def fisher_info_multicell(sigs: SignatureSet, gains: np.ndarray, a_truth: np.ndarray,
                          noise_var: float) -> FisherInfo:
    """J = sum_b |Q_b|^2 over the stacked B*N activity vector; gains has shape
    (B, B, N) and a_truth (B, N)."""
    stacked = sigs.stacked
    B = gains.shape[0]
    a_flat = np.asarray(a_truth).reshape(-1)
    J = np.zeros((stacked.shape[1], stacked.shape[1]))
    for b in range(B):
        g_b = gains[b].reshape(-1)
        Sigma = (stacked * (a_flat * g_b)[None, :]) @ stacked.conj().T \
            + noise_var * np.eye(stacked.shape[0])
        root = np.sqrt(g_b)
        Q = root[:, None] * (stacked.conj().T @ np.linalg.inv(Sigma) @ stacked) * root[None, :]
        J += np.real(Q * Q.conj())
    return FisherInfo(matrix=0.5 * (J + J.T), regime=REGIME_MULTICELL)


def _row_basis(matrix: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Orthonormal basis of the row space plus its rank; {x : Ax = 0} is
    unchanged but the LP loses the redundant rows that stall phase-1 on
    degenerate pivots."""
    _, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return matrix[:1] * 0.0, 0
    rank = int(np.sum(s > rtol * s[0]))
    return vt[:max(rank, 1)], rank


def _sign_cone_outcome(matrix: np.ndarray, norm_row: np.ndarray,
                       sign: list) -> lp.LpOutcome:
    """Feasibility of {Ax = 0, norm_row . x = 1, sign constraints}.

    When A has full column rank the null space is {0}, so the normalization
    row cannot be met and the system is infeasible with no search needed.
    Otherwise the verdict comes from the Farkas alternative system, whose
    all-ones right-hand side sidesteps the degeneracy of the cone LP (every
    equality row there has a zero right-hand side); exactly one of the two
    systems is feasible. The cone LP itself is kept as a fallback in case
    the alternative exhausts its iteration budget.

    Columns are normalized to unit length first: positive per-column scaling
    preserves both the sign pattern of any cone point and the per-coordinate
    strict positivity of the alternative system, while removing the orders-
    of-magnitude spread the gain scaling otherwise leaves in the tableau.
    """
    col_norms = np.linalg.norm(matrix, axis=0)
    matrix = matrix / np.where(col_norms > 0.0, col_norms, 1.0)[None, :]
    basis, rank = _row_basis(matrix)
    n = matrix.shape[1]
    if rank == n:
        return lp.LpOutcome(status="infeasible", witness=None,
                            certificate_residual=0.0)
    try:
        alt_feasible = _farkas_alternative(basis, sign)
        status = "infeasible" if alt_feasible else "feasible"
        return lp.LpOutcome(status=status, witness=None, certificate_residual=0.0)
    except lp.LpError:
        A = np.vstack([basis, norm_row])
        b = np.zeros(A.shape[0])
        b[-1] = 1.0
        return lp.solve_feasibility(lp.FeasibilityProblem(A_eq=A, b_eq=b, sign=sign))


def _farkas_alternative(basis: np.ndarray, sign: list) -> bool:
    """Feasibility of the alternative system for the sign cone.

    The cone {Ax = 0, sign constraints, x != 0 (normalized)} is nonempty iff
    there is NO y with (A^T y)_i >= 1 on the sign-constrained coordinates
    (after flipping nonpos columns) and (A^T y)_i = 0 on the free ones.
    Returns True when such a y exists, i.e. when the cone LP is infeasible.
    """
    m, n = basis.shape
    mult = np.array([1.0 if s == lp.NONNEG else -1.0 if s == lp.NONPOS else 0.0
                     for s in sign])
    constrained = mult != 0.0
    At = basis.T * np.where(constrained, np.where(mult < 0, -1.0, 1.0), 1.0)[:, None]
    n_con = int(np.sum(constrained))
    # Rows: constrained coords get (A^T y)_i - s_i = 1; free coords (A^T y)_i = 0.
    A_eq = np.zeros((n, m + n_con))
    A_eq[:, :m] = np.vstack([At[constrained], At[~constrained]])
    A_eq[:n_con, m:] = -np.eye(n_con)
    b_eq = np.concatenate([np.ones(n_con), np.zeros(n - n_con)])
    signs = [lp.FREE] * m + [lp.NONNEG] * n_con
    out = lp.solve_feasibility(lp.FeasibilityProblem(A_eq=A_eq, b_eq=b_eq, sign=signs))
    return out.status == "feasible"


def _inactive_mask(n_cols: int, inactive) -> np.ndarray:
    mask = np.zeros(n_cols, dtype=bool)
    mask[list(inactive)] = True
    return mask


def condition_known_lsf(expansion: RealExpansion, inactive) -> ConditionVerdict:
    """Known-fading consistency verdict for the inactive index set.

    Holds iff the sign-cone feasibility LP on the gain-scaled expansion is
    infeasible.
    """
    mask = _inactive_mask(expansion.n_cols, inactive)
    norm_row = np.where(mask, 1.0, -1.0)
    sign = [lp.NONNEG if mask[i] else lp.NONPOS for i in range(expansion.n_cols)]
    try:
        out = _sign_cone_outcome(expansion.matrix, norm_row, sign)
    except lp.LpError as exc:
        raise lp.LpError(f"condition LP failed: {exc}") from exc
    return ConditionVerdict(holds=out.status == "infeasible", lp_status=out.status)


def condition_unknown_lsf(expansion: RealExpansion, inactive) -> ConditionVerdict:
    """Unknown-fading consistency verdict (uses the unscaled expansion).

    The cone constrains only the inactive coordinates (x_i >= 0 on I, the
    rest free), so the LP normalization sum_I x_i = 1 cannot represent null
    directions supported entirely off I; those are covered by a rank check
    on the active columns of the expansion.
    """
    mask = _inactive_mask(expansion.n_cols, inactive)
    n = expansion.n_cols
    norm_row = np.where(mask, 1.0, 0.0)
    sign = [lp.NONNEG if mask[i] else lp.FREE for i in range(n)]
    out = _sign_cone_outcome(expansion.matrix, norm_row, sign)
    active_cols = expansion.matrix[:, ~mask]
    rank_ok = (active_cols.shape[1] == 0
               or np.linalg.matrix_rank(active_cols) == active_cols.shape[1])
    return ConditionVerdict(holds=out.status == "infeasible" and rank_ok,
                            lp_status=out.status, support_rank_ok=rank_ok)


def condition_multicell(expansion: RealExpansion, inactive) -> ConditionVerdict:
    """Multi-cell known-fading verdict on the stacked B*L^2-row expansion."""
    return condition_known_lsf(expansion, inactive)


def multicell_expansion(sigs: SignatureSet, gains: np.ndarray) -> RealExpansion:
    """Stack the per-BS gain-scaled expansions [D G_1; ...; D G_B]."""
    base = khatri_rao_real_rows(sigs.stacked)
    B = gains.shape[0]
    blocks = [base.matrix * gains[b].reshape(-1)[None, :] for b in range(B)]
    return RealExpansion(matrix=np.vstack(blocks), L=sigs.L)


def _normalized_gains(gains: np.ndarray) -> np.ndarray:
    """Scale gains so the largest is 1; verdicts are invariant to a global
    positive scale but the LP conditioning is much better."""
    return gains / np.max(gains)


def evaluate_condition(regime: str, sigs: SignatureSet, gains: np.ndarray,
                       act_flat: np.ndarray) -> ConditionVerdict:
    """Evaluate the regime's consistency condition for one instance.

    gains: (B, B, N) network gains; act_flat: stacked B*N binary truth.
    """
    inactive = np.flatnonzero(act_flat == 0)
    g = _normalized_gains(gains)
    if regime == REGIME_SINGLE_KNOWN:
        exp = khatri_rao_real_rows(sigs.matrices[0], g[0, 0])
        return condition_known_lsf(exp, inactive)
    if regime == REGIME_SINGLE_UNKNOWN:
        exp = khatri_rao_real_rows(sigs.matrices[0])
        return condition_unknown_lsf(exp, inactive)
    if regime == REGIME_MULTICELL:
        exp = multicell_expansion(sigs, g)
        return condition_multicell(exp, inactive)
    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class SweepCell:
    L: int
    K: int
    l2_over_n: float
    k_over_n: float
    freq: float
    n_trials: int
    all_hold: bool
    none_hold: bool


def phase_sweep(cfg: SystemConfig, L_values, K_values, trials: int, regime: str,
                seed: int = 0, fixed_positions: bool = False) -> list[SweepCell]:
    """Satisfaction frequency of the consistency condition over an (L, K) grid.

    Each trial draws fresh signatures, activity patterns, and (unless
    fixed_positions) device positions. Cells with K > N are skipped with a
    warning.
    """
    results = []
    fixed_net = None
    if fixed_positions:
        fixed_net = build_network(cfg, np.random.default_rng(seed))
    for L in L_values:
        for K in K_values:
            if K > cfg.N:
                warnings.warn(f"skipping grid cell L={L}, K={K}: K > N={cfg.N}")
                continue
            hold = 0
            for t in range(trials):
                rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=seed, spawn_key=(L, K, t)))
                trial_cfg = SystemConfig(**{**cfg.__dict__, "L": int(L), "K": int(K)})
                net = fixed_net if fixed_positions else build_network(trial_cfg, rng)
                sigs = generate_signatures(trial_cfg, rng)
                act = sample_activity(trial_cfg, rng)
                verdict = evaluate_condition(regime, sigs, net.gains, act.flat)
                hold += int(verdict.holds)
            freq = hold / trials
            n_cols = cfg.N if regime != REGIME_MULTICELL else cfg.B * cfg.N
            results.append(SweepCell(L=int(L), K=int(K),
                                     l2_over_n=L * L / cfg.N, k_over_n=K / cfg.N,
                                     freq=freq, n_trials=trials,
                                     all_hold=hold == trials, none_hold=hold == 0))
    return results


def boundary_50(cells: list[SweepCell]) -> dict:
    """Linear interpolation of the 50% crossing in K at each L.

    Returns {L: K_at_half} for L values where the frequency crosses 0.5 as K
    increases (cells must be sorted or sortable by K).
    """
    out = {}
    by_l = {}
    for c in cells:
        by_l.setdefault(c.L, []).append(c)
    for L, row in by_l.items():
        row.sort(key=lambda c: c.K)
        for lo, hi in zip(row[:-1], row[1:]):
            if (lo.freq - 0.5) * (hi.freq - 0.5) <= 0 and lo.freq != hi.freq:
                frac = (lo.freq - 0.5) / (lo.freq - hi.freq)
                out[L] = lo.K + frac * (hi.K - lo.K)
                break
    return out


def sweep_to_csv(cells: list[SweepCell], path: str) -> None:
    with open(path, "w") as f:
        f.write("L,K,L2_over_N,K_over_N,freq,n_trials,all_hold,none_hold\n")
        for c in cells:
            f.write(f"{c.L},{c.K},{float(c.l2_over_n)!r},{float(c.k_over_n)!r},"
                    f"{float(c.freq)!r},"
                    f"{c.n_trials},{int(c.all_hold)},{int(c.none_hold)}\n")
