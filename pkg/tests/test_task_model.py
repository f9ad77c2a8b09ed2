import math

import numpy as np
import pytest

from causalstack import physics
from causalstack.ppl import importance_query, run_model
from causalstack.task_model import (
    Action,
    NoiseParams,
    Observation,
    TaskState,
    action_prior,
    action_site,
    block_site,
    do_action,
    full_step_model,
    latent_state_model,
    stable_query,
    stable_site,
    transition_model,
)

from conftest import HALF, cube, normal_cdf, tower_from_xy


def obs_of(xys):
    return Observation(tower_from_xy(xys).blocks)


def test_zero_observation_noise_reproduces_observation():
    obs = obs_of([(0, 0), (1.2, -0.4)])
    tr = run_model(latent_state_model(obs, NoiseParams(0.0, 0.0)), rng_seed=5)
    assert tr.return_value == obs.as_tower()


def test_latent_spread_matches_sigma_z():
    obs = obs_of([(0, 0)])
    model = latent_state_model(obs, NoiseParams(0.469, 0.0))
    rng = np.random.default_rng(1)
    xs = np.array([run_model(model, rng_seed=rng)[block_site(0, 0, "s", "x")] for _ in range(4000)])
    assert abs(xs.std(ddof=1) - 0.469) < 0.469 * 0.05
    assert abs(xs.mean()) < 4 * 0.469 / math.sqrt(4000)


def test_offset_tower_unstable_fraction_matches_closed_form():
    # relative offset of two independently perturbed blocks has sd sigma*sqrt(2)
    sigma, off, n = 0.469, 3.7, 4000
    s = sigma * math.sqrt(2)
    p_stable = (normal_cdf((HALF - off) / s) - normal_cdf((-HALF - off) / s)) * (
        normal_cdf(HALF / s) - normal_cdf(-HALF / s)
    )
    model = latent_state_model(obs_of([(0, 0), (off, 0)]), NoiseParams(sigma, 0.0))
    est = importance_query(model, lambda tr: float(physics.is_stable(tr.return_value).stable), n, rng_seed=3).estimate
    se = math.sqrt(p_stable * (1 - p_stable) / n)
    assert abs((1 - est) - (1 - p_stable)) < 3 * se


def test_noiseless_transition_examples():
    latent = tower_from_xy([(0, 0)])
    q = cube(9)
    noise = NoiseParams(0.0, 0.0)
    succ, ok = run_model(transition_model(latent, q, Action(0.0, 0.0), noise)).return_value
    assert ok and succ.top_block.z == pytest.approx(11.25)
    _, ok = run_model(transition_model(latent, q, Action(4.0, 0.0), noise)).return_value
    assert not ok


def test_centered_placement_with_actuation_noise():
    # stable iff |wa_x| and |wa_y| both fall within half a face width
    sigma_a, n = 1.57, 20000
    expected = (2 * normal_cdf(HALF / sigma_a) - 1) ** 2
    assert expected == pytest.approx(0.96645, abs=5e-5)
    model = full_step_model(obs_of([(0, 0)]), cube(9), NoiseParams(0.0, sigma_a))
    est = importance_query(model, stable_query, n, interventions=do_action(Action(0, 0)), rng_seed=11).estimate
    assert abs(est - expected) < 3 * math.sqrt(expected * (1 - expected) / n)


@pytest.mark.parametrize("a", [(0, 0), (3.0, 0), (3.8, 1.0), (-2.0, -3.7), (10.0, 0)])
def test_zero_noise_full_step_equals_oracle(a):
    tower = tower_from_xy([(0, 0), (1.0, 0.5)])
    q = cube(9)
    expected = physics.is_stable(
        physics.settle(tower.with_block(q.moved_to(a[0], a[1], 0.0)))
    ).stable
    model = full_step_model(Observation(tower.blocks), q, NoiseParams(0.0, 0.0))
    est = importance_query(model, stable_query, 10, interventions=do_action(Action(*a))).estimate
    assert est == float(expected)


def test_do_and_condition_on_action_agree():
    model = full_step_model(obs_of([(0, 0), (1.5, 0)]), cube(9), NoiseParams(0.469, 1.57))
    a = do_action(Action(1.0, -0.5))
    est_do = importance_query(model, stable_query, 2000, interventions=a, rng_seed=4).estimate
    est_cond = importance_query(model, stable_query, 2000, conditions=a, rng_seed=4).estimate
    assert abs(est_do - est_cond) < 1e-12


def test_phi_decreases_with_offset_under_common_random_numbers():
    model = full_step_model(obs_of([(0, 0)]), cube(9), NoiseParams(0.469, 1.57))
    offsets = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    phis = [
        importance_query(model, stable_query, 3000, interventions=do_action(Action(d, 0.0)), rng_seed=8).estimate
        for d in offsets
    ]
    assert all(a >= b for a, b in zip(phis, phis[1:]))
    # relative offset per axis has sd sqrt(sigma_a^2 + sigma_z^2)
    s = math.hypot(1.57, 0.469)
    py = 2 * normal_cdf(HALF / s) - 1
    for d, phi in zip(offsets, phis):
        p = (normal_cdf((HALF - d) / s) - normal_cdf((-HALF - d) / s)) * py
        assert abs(phi - p) < 4 * math.sqrt(p * (1 - p) / 3000)


def test_trace_contains_every_site():
    obs = obs_of([(0, 0), (0.5, 0)])
    tr = run_model(full_step_model(obs, cube(7), NoiseParams(0.1, 0.1)), interventions=do_action(Action(0, 0)))
    for bid in (0, 1):
        for axis in "xyz":
            for kind in ("z", "wz", "s"):
                assert block_site(0, bid, kind, axis) in tr
    assert block_site(1, 7, "wa") in tr
    assert action_site(1, "x") in tr and action_site(1, "y") in tr
    assert "t1/stable" in tr and tr[stable_site(1)] == tr.return_value
    assert tr.site(action_site(1, "x")).role == "intervened"


def test_action_prior_bounds():
    px, py = action_prior(cube(0, x=2.0, y=-1.0))
    assert (px.lo, px.hi) == (2.0 - 11.25, 2.0 + 11.25)
    assert (py.lo, py.hi) == (-1.0 - 11.25, -1.0 + 11.25)


def test_validation():
    with pytest.raises(ValueError):
        NoiseParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        Action(float("nan"), 0.0)
    with pytest.raises(ValueError):
        Observation(())
    with pytest.raises(ValueError):
        TaskState(tower_from_xy([(0, 0)]), (cube(0),))
    with pytest.raises(ValueError):
        full_step_model(obs_of([(0, 0)]), cube(0), NoiseParams(0, 0))
