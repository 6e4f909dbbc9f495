import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrsplit.linalg import qr_thin, svd_full
from lrsplit.lowrank import (
    LowRankState,
    project_tangent,
    random_state,
    reorthonormalize,
    tangent_residual,
    to_dense,
    truncate_to_rank,
)
from lrsplit.problems import preset_reaction_diffusion

from conftest import rel


def test_truncate_exact_rank_one(rng):
    a, b = rng.standard_normal(7), rng.standard_normal(7)
    X = np.outer(a, b)
    Y, delta = truncate_to_rank(X, 1, return_delta=True)
    assert delta < 1e-14 * np.linalg.norm(X)
    assert rel(to_dense(Y), X) < 1e-12


def test_truncate_diagonal_eckart_young():
    _, delta = truncate_to_rank(np.diag([3.0, 2.0, 1.0]), 2, return_delta=True)
    assert delta == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("m", [3, 8, 17])
def test_separable_initial_grid_has_rank_one(m):
    X0 = preset_reaction_diffusion(max(m, 4)).X0
    _, delta = truncate_to_rank(X0, 1, return_delta=True)
    assert delta < 1e-13 * np.linalg.norm(X0)


def test_to_dense_single_entry():
    e1 = np.zeros((4, 1))
    e1[0] = 1.0
    X = to_dense(LowRankState(e1, np.array([[2.0]]), e1))
    expected = np.zeros((4, 4))
    expected[0, 0] = 2.0
    np.testing.assert_array_equal(X, expected)


def test_round_trip(rng):
    Y = random_state(rng, 16, 3)
    Z = truncate_to_rank(to_dense(Y), 3)
    assert rel(to_dense(Z), to_dense(Y)) < 1e-12


def test_random_state_rank(rng):
    Y = random_state(rng, 16, 3)
    s = svd_full(to_dense(Y))[1]
    assert int(np.sum(s > 1e-12 * s[0])) == 3


def test_reorthonormalize_fixed_point(rng):
    Y = random_state(rng, 10, 3)
    Z = reorthonormalize(Y.U, Y.S, Y.V)
    np.testing.assert_allclose(Z.S, Y.S, atol=1e-13)


def test_reorthonormalize_scalar_pull_through(rng):
    Y = random_state(rng, 10, 3)
    Z = reorthonormalize(2.0 * Y.U, Y.S, Y.V)
    np.testing.assert_allclose(Z.S, 2.0 * Y.S, atol=1e-13)


def test_reorthonormalize_preserves_matrix(rng):
    Uraw, Vraw = rng.standard_normal((12, 4)), rng.standard_normal((12, 4))
    S = rng.standard_normal((4, 4))
    Z = reorthonormalize(Uraw, S, Vraw)
    assert rel(to_dense(Z), Uraw @ S @ Vraw.T) < 1e-12
    Z.check()


def test_projection_fixes_tangent_elements(rng):
    Y = random_state(rng, 12, 2)
    B = Y.U @ rng.standard_normal((2, 2)) @ Y.V.T
    assert rel(project_tangent(Y, B), B) < 1e-12


def test_projection_annihilates_normal_component(rng):
    Y = random_state(rng, 12, 2)
    Pu = np.eye(12) - Y.U @ Y.U.T
    Pv = np.eye(12) - Y.V @ Y.V.T
    B = Pu @ rng.standard_normal((12, 12)) @ Pv
    assert np.linalg.norm(project_tangent(Y, B)) <= 1e-12 * np.linalg.norm(B)
    assert tangent_residual(Y, B) == pytest.approx(np.linalg.norm(B), rel=1e-12)


def test_projection_keeps_quadratic_riccati_term(rng):
    Y = random_state(rng, 12, 2)
    M = rng.standard_normal((12, 12))
    K = M + M.T
    Yd = to_dense(Y)
    B = Yd @ K @ Yd
    assert rel(project_tangent(Y, B), B) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 14), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_projection_idempotent_and_orthogonal(m, r, seed):
    rng = np.random.default_rng(seed)
    Y = random_state(rng, m, min(r, m))
    B = rng.standard_normal((m, m))
    PB = project_tangent(Y, B)
    assert np.linalg.norm(project_tangent(Y, PB) - PB) <= 1e-12 * np.linalg.norm(PB)
    assert abs(np.sum((B - PB) * PB)) <= 1e-10 * np.linalg.norm(B) ** 2


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_eckart_young_tail(m, seed):
    X = np.random.default_rng(seed).standard_normal((m, m))
    s = svd_full(X)[1]
    for r in range(1, m + 1):
        Y = truncate_to_rank(X, r)
        tail = np.linalg.norm(s[r:])
        assert np.linalg.norm(X - to_dense(Y)) == pytest.approx(tail, rel=1e-11, abs=1e-13 * s[0])


def test_truncate_rejects_bad_rank():
    with pytest.raises(ValueError):
        truncate_to_rank(np.eye(3), 0)
    with pytest.raises(ValueError):
        truncate_to_rank(np.eye(3), 4)


def test_check_flags_non_orthonormal(rng):
    Y = random_state(rng, 6, 2)
    with pytest.raises(ValueError):
        LowRankState(2 * Y.U, Y.S, Y.V).check()
