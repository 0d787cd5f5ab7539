import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmadapt.dynamics import (
    ControlCommand, DisturbanceSpec, PeriodicPull, PlantParams, SimulationDivergence,
    VehicleState, step_plant,
)

PARAMS = PlantParams(ground_z=None)
F_HOVER = PARAMS.true_mass * PARAMS.gravity


def hover_cmd(roll=0.0, pitch=0.0, delta=0.0):
    return ControlCommand(roll, pitch, delta, F_HOVER)


def run(state, cmd, n, params=PARAMS, dist=DisturbanceSpec(), dt=0.01):
    for k in range(n):
        state = step_plant(state, cmd, params, dist, k * dt, dt)
    return state


def test_hover_equilibrium():
    s0 = VehicleState.at(0.3, -0.2, 1.0)
    s1 = run(s0, hover_cmd(), 100)
    np.testing.assert_allclose(s1.position_w, s0.position_w, atol=1e-12)
    np.testing.assert_allclose(s1.velocity_w, 0.0, atol=1e-12)


def test_free_fall_loses_g_dt_per_step():
    s = VehicleState.at(0.0, 0.0, 10.0)
    cmd = hover_cmd(delta=-F_HOVER)
    for k in range(5):
        nxt = step_plant(s, cmd, PARAMS, t=k * 0.01, dt=0.01)
        assert nxt.velocity_w[2] - s.velocity_w[2] == pytest.approx(-PARAMS.gravity * 0.01, abs=1e-12)
        s = nxt


def test_roll_step_matches_first_order_lag():
    tau = PARAMS.attitude_tau
    dt = 0.01
    n = int(round(tau / dt))
    s = run(VehicleState.at(0, 0, 5), hover_cmd(roll=0.1), n, dt=dt)
    expected = 0.1 * (1.0 - math.exp(-n * dt / tau))
    assert expected == pytest.approx(0.0632, rel=0.01)
    assert s.roll_i == pytest.approx(expected, rel=0.02)


def test_attitude_bias_shifts_the_attitude_target():
    dist = DisturbanceSpec(attitude_bias=(0.05, -0.02))
    s = run(VehicleState.at(0, 0, 5), hover_cmd(), 300, dist=dist)
    assert s.roll_i == pytest.approx(0.05, abs=1e-6)
    assert s.pitch_i == pytest.approx(-0.02, abs=1e-6)


def test_small_angle_sign_convention():
    s = run(VehicleState.at(0, 0, 5), hover_cmd(roll=0.05, pitch=0.05), 100)
    assert s.velocity_w[0] > 0  # positive pitch accelerates +x
    assert s.velocity_w[1] < 0  # positive roll accelerates -y


def test_energy_sanity_over_long_horizon():
    s = run(VehicleState.at(0, 0, 1), hover_cmd(), 10_000)
    assert np.linalg.norm(s.velocity_w) < 1e-9


def test_added_mass_makes_it_sink():
    s = run(VehicleState.at(0, 0, 5), hover_cmd(), 50, dist=DisturbanceSpec(added_mass=0.2))
    assert s.velocity_w[2] < 0


@settings(max_examples=30, deadline=None)
@given(fx=st.floats(-0.5, 0.5), fy=st.floats(-0.5, 0.5))
def test_constant_force_superposition(fx, fy):
    s0 = VehicleState.at(0, 0, 5)

    def dv(force):
        dist = DisturbanceSpec(constant_force_w=np.array(force))
        return step_plant(s0, hover_cmd(0.02, -0.01), PARAMS, dist, 0.0, 0.01).velocity_w - \
            step_plant(s0, hover_cmd(0.02, -0.01), PARAMS, DisturbanceSpec(), 0.0, 0.01).velocity_w

    both = dv([fx, fy, 0.0])
    split = dv([fx, 0.0, 0.0]) + dv([0.0, fy, 0.0])
    np.testing.assert_allclose(both, split, rtol=0.01, atol=1e-12)


def test_periodic_pull_window():
    pull = PeriodicPull(axis="y", force_amplitude=2.0, frequency=0.5, t_start=1.0, t_end=3.0)
    assert pull.force(0.5)[1] == 0.0
    assert pull.force(1.5)[1] == pytest.approx(2.0)
    assert pull.force(3.0)[1] == 0.0
    with pytest.raises(ValueError):
        PeriodicPull(frequency=0.0)
    with pytest.raises(ValueError):
        PeriodicPull(t_start=2.0, t_end=1.0)


def test_determinism_is_bitwise():
    dist = DisturbanceSpec(periodic_pull=PeriodicPull(force_amplitude=1.0))
    a = run(VehicleState.at(0, 0, 1), hover_cmd(0.1, -0.05, 0.3), 500, dist=dist)
    b = run(VehicleState.at(0, 0, 1), hover_cmd(0.1, -0.05, 0.3), 500, dist=dist)
    assert a.as_vector().tobytes() == b.as_vector().tobytes()


def test_divergence_is_reported():
    s = VehicleState(np.zeros(3), np.zeros(3), 1.5, 0.0)
    with pytest.raises(SimulationDivergence):
        step_plant(s, hover_cmd(roll=3.0), PARAMS, dt=0.5)


def test_ground_contact_holds_a_disarmed_vehicle():
    params = PlantParams()
    s = run(VehicleState.at(0, 0, 0), ControlCommand.disarmed(F_HOVER), 100, params=params)
    assert s.position_w[2] == 0.0
    lifted = run(s, hover_cmd(delta=1.0), 100, params=params)
    assert lifted.position_w[2] > 0.0


def test_plant_params_validation():
    with pytest.raises(ValueError):
        PlantParams(true_mass=0.0)
    with pytest.raises(ValueError):
        PlantParams(thrust_max=5.0)
