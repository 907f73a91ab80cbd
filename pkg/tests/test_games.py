import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noregret.errors import CapacityError, ContractError, ParameterError, StructuralError
from noregret.games import (
    Game,
    as_strategy,
    bimatrix_game,
    canonical_game,
    expected_loss_vector,
    load_game,
    random_game,
    realized_loss,
    save_game,
    smooth_congestion_game,
    smoothness_violation,
)

A = np.array([[1.0, -1.0], [-1.0, 1.0]])


def test_canonical_matrices():
    g1 = canonical_game("matching_pennies_G1")
    assert np.array_equal(g1.losses[0], A)
    assert np.array_equal(g1.losses[1], [[-1, 1], [1, -1]])
    assert np.array_equal(canonical_game("invariant_G2").losses[1], np.ones((2, 2)))
    assert np.array_equal(canonical_game("cooperation_G3").losses[1], A)
    with pytest.raises(ParameterError):
        canonical_game("prisoners_dilemma")


def test_unit_map_on_matching_pennies():
    g = canonical_game("matching_pennies_G1")
    assert np.allclose(expected_loss_vector(g, 0, [[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])
    # row player's raw losses against y = (1, 0) are column 0 of A
    assert np.array_equal(expected_loss_vector(g, 0, [[0.5, 0.5], [1.0, 0.0]], raw=True), [1, -1])
    assert np.array_equal(expected_loss_vector(g, 0, [[0.5, 0.5], [1.0, 0.0]]), [1, 0])
    assert np.allclose(realized_loss(g, [[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])
    assert np.allclose(realized_loss(g, [[0.5, 0.5], [0.5, 0.5]], raw=True), [0, 0])


def test_invariant_game_column_loss_is_one():
    g = canonical_game("invariant_G2")
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.dirichlet([1, 1])
        assert realized_loss(g, [x, [0.4, 0.6]], raw=True)[1] == pytest.approx(1.0, abs=1e-15)


def test_three_player_expected_loss_matches_enumeration():
    g = random_game(3, 4, seed=3)
    u = np.full(4, 0.25)
    for i in range(3):
        got = expected_loss_vector(g, i, [u, u, u])
        want = np.zeros(4)
        for a in range(4):
            for rest in itertools.product(range(4), repeat=2):
                prof = list(rest)
                prof.insert(i, a)
                want[a] += g.losses[(i, *prof)] / 16
        assert np.allclose(got, want, atol=1e-14)


def test_pure_profile_is_tensor_lookup():
    g = random_game(3, 3, seed=5)
    e = np.eye(3)
    for prof in itertools.product(range(3), repeat=3):
        xs = [e[s] for s in prof]
        for i in range(3):
            vec = expected_loss_vector(g, i, xs)
            for a in range(3):
                key = list(prof)
                key[i] = a
                assert vec[a] == g.losses[(i, *key)]
        assert np.array_equal(realized_loss(g, xs), [g.losses[(i, *prof)] for i in range(3)])


def test_random_game_deterministic_and_shaped():
    assert np.array_equal(random_game(2, 2, 7).losses, random_game(2, 2, 7).losses)
    g = random_game(3, 4, 1)
    assert g.losses.size == 3 * 4**3
    assert g.losses.min() >= 0 and g.losses.max() <= 1


def test_game_validation():
    with pytest.raises(StructuralError):
        Game(np.zeros((2, 2, 3)))
    with pytest.raises(ContractError):
        Game(np.full((2, 2, 2), 1.5))
    with pytest.raises(CapacityError):
        random_game(8, 10, 0)
    with pytest.raises(ParameterError):
        as_strategy([0.5, 0.6])
    with pytest.raises(StructuralError):
        expected_loss_vector(random_game(2, 3, 0), 0, [[1, 0, 0], [0.5, 0.5]])


def test_game_json_round_trip(tmp_path):
    g = canonical_game("cooperation_G3")
    save_game(g, tmp_path / "g.json")
    h = load_game(tmp_path / "g.json")
    assert np.array_equal(g.losses, h.losses) and h.scale == "raw" and h.name == g.name


def test_congestion_identical_resources_split_players():
    spec = smooth_congestion_game(2, 2, seed=0, costs=[[1.0, 0.0], [1.0, 0.0]])
    assert sorted(spec.optimal_profile) == [0, 1]
    assert (spec.lam, spec.mu) == (5 / 3, 1 / 3)


@pytest.mark.parametrize("seed", range(5))
def test_congestion_smoothness_spot_check(seed):
    spec = smooth_congestion_game(3, 3, seed)
    assert smoothness_violation(spec, 1000, seed) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1))
def test_expected_loss_linear_in_opponent(seed, w):
    rng = np.random.default_rng(seed)
    g = random_game(3, 3, seed)
    x0, x2 = rng.dirichlet(np.ones(3), 2)
    a, b = rng.dirichlet(np.ones(3), 2)
    mixed = expected_loss_vector(g, 0, [x0, w * a + (1 - w) * b, x2])
    parts = w * expected_loss_vector(g, 0, [x0, a, x2]) + (1 - w) * expected_loss_vector(g, 0, [x0, b, x2])
    assert np.allclose(mixed, parts, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_affine_map_preserves_best_action(seed):
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1, 1, (2, 3, 3))
    g = Game(raw, "raw")
    ys = rng.dirichlet(np.ones(3), 30)
    raw_cum = sum(expected_loss_vector(g, 0, [np.ones(3) / 3, y], raw=True) for y in ys)
    unit_cum = sum(expected_loss_vector(g, 0, [np.ones(3) / 3, y]) for y in ys)
    assert np.argmin(raw_cum) == np.argmin(unit_cum)
    assert np.allclose(g.to_unit(raw_cum / 30), unit_cum / 30, atol=1e-12)


def test_bimatrix_orientation():
    g = bimatrix_game([[0.1, 0.2], [0.3, 0.4]], [[0.5, 0.6], [0.7, 0.8]])
    # column player's loss vector against row strategy x indexes B by column
    assert np.allclose(expected_loss_vector(g, 1, [[1, 0], [0.5, 0.5]]), [0.5, 0.6])
    assert np.allclose(expected_loss_vector(g, 0, [[0.5, 0.5], [0, 1]]), [0.2, 0.4])
