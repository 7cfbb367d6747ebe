import random

import pytest
from hypothesis import given, settings, strategies as st

from rplsim.mobility import MobilityState, RandomWaypoint
from rplsim.scenario import Scenario
from rplsim.network import Network


def test_step_moves_speed_times_dt_toward_waypoint():
    rwp = RandomWaypoint(random.Random(0))
    rwp.states[1] = MobilityState((30.0, 40.0), 2.0)
    pos = rwp.step(1, [0.0, 0.0], 5.0)
    assert pos == pytest.approx([6.0, 8.0])


def test_arrival_stops_at_waypoint_and_draws_next_leg():
    rwp = RandomWaypoint(random.Random(0))
    rwp.states[1] = MobilityState((3.0, 4.0), 2.0)
    pos = rwp.step(1, [0.0, 0.0], 5.0)
    assert pos == [3.0, 4.0]
    nxt = rwp.states[1]
    assert nxt.waypoint != (3.0, 4.0)
    assert 1.0 <= nxt.speed <= 2.0


def test_bad_speed_range():
    with pytest.raises(ValueError):
        RandomWaypoint(random.Random(0), speed_min=2.0, speed_max=1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 20.0), st.floats(0, 150), st.floats(0, 150))
def test_positions_stay_inside_the_arena(seed, dt, x, y):
    rwp = RandomWaypoint(random.Random(seed), arena=150.0)
    rwp.add(1)
    pos = [x, y]
    for k in range(200):
        rwp.step(1, pos, dt, k * dt)
        assert 0.0 <= pos[0] <= 150.0 and 0.0 <= pos[1] <= 150.0
        assert 1.0 <= rwp.states[1].speed <= 2.0


def test_static_scenario_never_moves():
    net = Network(Scenario(clients=5, attackers=1, duration=600.0), 4)
    before = {k: list(v) for k, v in net.positions.items()}
    net.run()
    assert net.mobility is None
    assert net.positions == before


def test_mobile_scenario_moves_clients_but_not_root():
    net = Network(Scenario(clients=5, attackers=1, duration=120.0, mobility=True), 4)
    before = {k: list(v) for k, v in net.positions.items()}
    net.run()
    assert net.positions[0] == before[0]
    assert any(net.positions[k] != before[k] for k in before if k != 0)
