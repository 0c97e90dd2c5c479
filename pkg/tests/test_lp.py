"""Feasibility solver: contract examples, soundness, and an exact oracle."""

import numpy as np
import pytest

from covdetect import lp
from helpers import exact_feasibility, random_feasibility_problem


def test_sum_zero_with_normalization_infeasible():
    prob = lp.FeasibilityProblem(A_eq=[[1.0, 1.0], [1.0, 1.0]],
                                 b_eq=[0.0, 1.0],
                                 sign=[lp.NONNEG, lp.NONNEG])
    assert lp.solve_feasibility(prob).status == "infeasible"


def test_difference_zero_with_normalization_feasible():
    prob = lp.FeasibilityProblem(A_eq=[[1.0, -1.0], [1.0, 1.0]],
                                 b_eq=[0.0, 1.0],
                                 sign=[lp.NONNEG, lp.NONNEG])
    out = lp.solve_feasibility(prob)
    assert out.status == "feasible"
    assert np.allclose(out.witness, [0.5, 0.5], atol=1e-9)


def test_single_variable_normalization():
    prob = lp.FeasibilityProblem(A_eq=[[1.0]], b_eq=[1.0], sign=[lp.NONNEG])
    out = lp.solve_feasibility(prob)
    assert out.status == "feasible"
    assert np.allclose(out.witness, [1.0], atol=1e-9)


def test_nonpos_variable():
    # x <= 0 with x = -2 required.
    prob = lp.FeasibilityProblem(A_eq=[[1.0]], b_eq=[-2.0], sign=[lp.NONPOS])
    out = lp.solve_feasibility(prob)
    assert out.status == "feasible"
    assert out.witness[0] == pytest.approx(-2.0, abs=1e-9)
    # x <= 0 with x = +2 required is impossible.
    prob = lp.FeasibilityProblem(A_eq=[[1.0]], b_eq=[2.0], sign=[lp.NONPOS])
    assert lp.solve_feasibility(prob).status == "infeasible"


def test_free_variable():
    prob = lp.FeasibilityProblem(A_eq=[[1.0, 1.0]], b_eq=[-5.0],
                                 sign=[lp.FREE, lp.NONNEG])
    out = lp.solve_feasibility(prob)
    assert out.status == "feasible"


def test_zero_rows_handling():
    prob = lp.FeasibilityProblem(A_eq=[[0.0, 0.0], [1.0, 0.0]], b_eq=[0.0, 1.0],
                                 sign=[lp.NONNEG, lp.NONNEG])
    assert lp.solve_feasibility(prob).status == "feasible"
    prob = lp.FeasibilityProblem(A_eq=[[0.0, 0.0]], b_eq=[1.0],
                                 sign=[lp.NONNEG, lp.NONNEG])
    assert lp.solve_feasibility(prob).status == "infeasible"


def test_validation_errors():
    with pytest.raises(ValueError):
        lp.FeasibilityProblem(A_eq=np.zeros((2, 2, 2)), b_eq=[0, 0], sign=["nonneg"] * 2)
    with pytest.raises(ValueError):
        lp.FeasibilityProblem(A_eq=[[1.0]], b_eq=[0.0, 1.0], sign=[lp.NONNEG])
    with pytest.raises(ValueError):
        lp.FeasibilityProblem(A_eq=[[1.0]], b_eq=[0.0], sign=["bogus"])
    with pytest.raises(ValueError):
        lp.FeasibilityProblem(A_eq=[[np.nan]], b_eq=[0.0], sign=[lp.NONNEG])


def test_iteration_cap_raises_distinct_error():
    prob = lp.FeasibilityProblem(A_eq=[[1.0, -1.0], [1.0, 1.0]],
                                 b_eq=[0.0, 1.0],
                                 sign=[lp.NONNEG, lp.NONNEG])
    with pytest.raises(lp.LpError):
        lp.solve_feasibility(prob, max_iter=0)


def test_witness_soundness_on_random_feasible_problems():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 60:
        A, b, sign = random_feasibility_problem(rng)
        out = lp.solve_feasibility(lp.FeasibilityProblem(A_eq=A, b_eq=b, sign=sign))
        if out.status != "feasible":
            continue
        x = out.witness
        assert np.max(np.abs(A @ x - b)) <= 1e-7 * max(1.0, np.max(np.abs(b)))
        for j, s in enumerate(sign):
            if s == lp.NONNEG:
                assert x[j] >= -1e-9
            elif s == lp.NONPOS:
                assert x[j] <= 1e-9
        checked += 1


def test_scale_invariance():
    rng = np.random.default_rng(11)
    for _ in range(40):
        A, b, sign = random_feasibility_problem(rng)
        base = lp.solve_feasibility(
            lp.FeasibilityProblem(A_eq=A, b_eq=b, sign=sign)).status
        scale = rng.uniform(0.01, 100.0, size=len(b))
        scaled = lp.solve_feasibility(lp.FeasibilityProblem(
            A_eq=A * scale[:, None], b_eq=b * scale, sign=sign)).status
    assert scaled == base


def test_agreement_with_exact_vertex_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(150):
        A, b, sign = random_feasibility_problem(rng)
        expected = exact_feasibility(A, b, sign)
        got = lp.solve_feasibility(
            lp.FeasibilityProblem(A_eq=A, b_eq=b, sign=sign)).status
        assert got == ("feasible" if expected else "infeasible"), \
            f"disagreement on A={A}, b={b}, sign={sign}"
