import numpy as np
import pytest

from nfq_steer.env import Action, Kind, State, classify, cost
from nfq_steer.errors import ConfigurationError
from nfq_steer.physics import InitSpec, MotorModel, PhysicsEnv, reset_env, step_physics

QUIET = MotorModel(noise_std=0.0)


def test_reset_range_and_zeros():
    for seed in range(500):
        s = reset_env(InitSpec(), seed)
        assert -0.5 <= s.position <= 0.5
        assert s.velocity == 0.0 and s.voltage == 0.0


def test_reset_deterministic():
    assert reset_env(InitSpec(), 42) == reset_env(InitSpec(), 42)
    assert reset_env(InitSpec(), 42) != reset_env(InitSpec(), 43)


def test_from_rest_right_moves_positive():
    tr = step_physics(State(0.0, 0.0, 0.0), Action.RIGHT, QUIET)
    assert tr.s_next.voltage == 0.1
    assert tr.s_next.velocity == pytest.approx(QUIET.torque_gain * 0.1, rel=1e-15)
    assert tr.s_next.velocity > 0


def test_noise_free_is_deterministic():
    s = State(0.2, 0.01, -0.3)
    assert step_physics(s, Action.LEFT, QUIET) == step_physics(s, Action.LEFT, QUIET)


def test_zero_voltage_rest_is_fixed_point():
    # +0.1 then -0.1 returns the voltage to exactly 0; from rest with 0 V nothing moves
    model = MotorModel(noise_std=0.0, torque_gain=0.02)
    s = State(0.3, 0.0, 0.0)
    vel = (1 - model.damping) * 0.0 + model.torque_gain * 0.0
    assert s.position + vel == s.position


def closed_form(p0, v0, volts, d, k):
    """Explicit solution of v_t = (1-d)^t v0 + sum_j (1-d)^(t-j) k u_j, p_t = p0 + sum v."""
    out = []
    for t in range(1, len(volts) + 1):
        v = (1 - d) ** t * v0 + sum((1 - d) ** (t - j) * k * volts[j - 1] for j in range(1, t + 1))
        out.append(v)
    return p0 + np.cumsum(out), np.array(out)


def test_matches_closed_form_over_100_steps():
    rng = np.random.default_rng(3)
    acts = [Action(int(c)) for c in rng.choice([-1, 1], 100)]
    s = State(0.1, 0.003, 0.2)
    volts, positions, velocities = [], [], []
    for a in acts:
        tr = step_physics(s, a, QUIET)
        volts.append(tr.s_next.voltage)
        positions.append(tr.s_next.position)
        velocities.append(tr.s_next.velocity)
        s = tr.s_next
    p_ref, v_ref = closed_form(0.1, 0.003, volts, QUIET.damping, QUIET.torque_gain)
    assert np.allclose(velocities, v_ref, rtol=0, atol=1e-13)
    assert np.allclose(positions, p_ref, rtol=0, atol=1e-12)


def test_controllability_calibration():
    s = State(0.5, 0.0, 0.0)
    reached = None
    for t in range(1, 121):
        s = step_physics(s, Action.LEFT, QUIET).s_next
        if abs(s.position) < 0.05:
            reached = t
            break
    assert reached is not None and reached <= 120


def test_transition_consistent_with_env_core():
    rng = np.random.default_rng(0)
    env = PhysicsEnv()
    for _ in range(300):
        s = State(rng.uniform(-0.69, 0.69), rng.uniform(-0.05, 0.05), round(rng.uniform(-1, 1), 1))
        tr = env.step(s, Action(int(rng.choice([-1, 1]))), rng)
        assert tr.kind is classify(tr.s_next)
        assert tr.cost == cost(tr.s_next, tr.s)


def test_noise_needs_rng():
    with pytest.raises(ConfigurationError):
        step_physics(State(0, 0, 0), Action.LEFT, MotorModel(noise_std=0.1))


@pytest.mark.parametrize("kw", [dict(damping=1.0), dict(torque_gain=0.0), dict(noise_std=-1.0)])
def test_model_validation(kw):
    with pytest.raises(ConfigurationError):
        MotorModel(**kw)
