import pytest
from hypothesis import given, settings, strategies as st

from conftest import chain_network, line_positions, wire_chain
from rplsim.messages import INFINITE_RANK, Dao, Dio, GlobalPrefix, NodeAddress
from rplsim.network import Network
from rplsim.node import Candidate, DaoReason, Mop
from rplsim.scenario import Scenario


def test_fresh_node_joins_root_with_mrhof_rank():
    net = chain_network([0, 1])
    node = net.nodes[1]
    node.on_receive_dio(0, Dio(256))
    assert node.rank == 512 and node.preferred == 0
    assert node._dao_timer is not None and node._dao_reason is DaoReason.PARENT_CHANGE
    net.sim.run_until(2.0)
    assert node.counters["dao_sent"] == 1


def test_dio_from_parent_schedules_refresh_without_switch():
    net = chain_network([0, 1])
    wire_chain(net, [0, 1])
    node = net.nodes[1]
    node.on_receive_dio(0, Dio(256))
    assert node.preferred == 0 and node.rank == 512
    assert node._dao_reason is DaoReason.DIO_REFRESH
    assert "parent_changes" not in node.counters


def test_hysteresis_keeps_parent_unless_gain_reaches_threshold():
    net = chain_network([0, 1])
    node = net.nodes[1]
    node.candidates[7] = Candidate(512)
    node.preferred, node.rank = 7, 768
    node.on_receive_dio(3, Dio(384))  # 128 better: below the 192 threshold
    assert node.preferred == 7
    node.net.sim.cancel(node._dao_timer)
    node._dao_timer = None
    node.on_receive_dio(3, Dio(256))  # 256 better
    assert node.preferred == 3 and node.rank == 512
    assert node._dao_reason is DaoReason.PARENT_CHANGE


def test_infinite_rank_dio_from_parent_detaches():
    net = chain_network([0, 1, 2])
    wire_chain(net, [0, 1, 2])
    node = net.nodes[2]
    node.on_receive_dio(1, Dio(INFINITE_RANK))
    assert node.preferred is None and node.rank == INFINITE_RANK
    assert node.counters["detach"] == 1


def test_storing_dao_reaches_parent_and_is_acked_hop_by_hop():
    net = chain_network([0, 3, 7, 8])
    wire_chain(net, [0, 3, 7, 8])
    seen = []
    net.on_root_dao = lambda node, src, dao: seen.append((src, dao.dao_prefix))
    dao = net.nodes[8].send_dao()
    assert dao.dao_prefix == GlobalPrefix(8)
    net.sim.run_until(3.0)
    assert net.nodes[7].routes[GlobalPrefix(8)].next_hop == 8
    assert net.nodes[3].routes[GlobalPrefix(8)].next_hop == 7
    assert seen == [(3, GlobalPrefix(8))]
    for nid in (3, 7, 8):
        assert net.nodes[nid].counters["daoack_recv"] == 1
    assert net.nodes[8]._pending_dao is None


@pytest.mark.parametrize("depth", [2, 3, 4, 5, 6])
def test_one_dao_induces_depth_minus_one_aggregated_daos(depth):
    ids = list(range(depth + 1))
    net = chain_network(ids, tx_range=45.0)
    wire_chain(net, ids)
    net.nodes[depth].send_dao()
    net.sim.run_until(3.0)
    assert net.metrics.control.get("dao_induced", 0) == depth - 1
    assert net.metrics.control["dao_at_root"] == 1


def test_duplicate_dao_is_still_forwarded():
    net = chain_network([0, 3, 7, 8])
    wire_chain(net, [0, 3, 7, 8])
    dao = Dao(GlobalPrefix(8), 5, sender_rank=1024)
    net.nodes[7].on_dao(8, dao.copy())
    net.nodes[7].on_dao(8, dao.copy())
    assert net.nodes[7].counters["dao_fwd"] == 2


def test_nonstoring_stack_and_source_routed_ack():
    net = chain_network([0, 3, 7, 8], mop=Mop.NON_STORING)
    wire_chain(net, [0, 3, 7, 8])
    stacks = []
    net.on_root_dao = lambda node, src, dao: stacks.append(
        [a.node_id for a in dao.reverse_route_stack])
    net.nodes[8].send_dao()
    net.sim.run_until(3.0)
    assert stacks == [[7, 3]]
    assert net.root.routes[GlobalPrefix(8)].source_route == (3, 7, 8)
    assert net.nodes[8].counters["daoack_recv"] == 1
    assert net.nodes[8]._pending_dao is None
    assert net.nodes[3].routes == {} and net.nodes[7].routes == {}


def test_nonstoring_own_address_in_stack_is_a_loop():
    net = chain_network([0, 3, 7, 8], mop=Mop.NON_STORING)
    wire_chain(net, [0, 3, 7, 8])
    dao = Dao(GlobalPrefix(8), 1, [NodeAddress(7)], sender_rank=1024)
    net.nodes[7].on_dao(8, dao)
    assert net.nodes[7].counters["dao_loop_drop"] == 1


def test_mop_zero_sends_nothing():
    net = chain_network([0, 1], mop=Mop.NO_DOWNWARD)
    wire_chain(net, [0, 1])
    assert net.nodes[1].send_dao() is None
    net.nodes[1].on_receive_dio(0, Dio(256))
    assert net.nodes[1]._dao_timer is None
    assert net.medium.tally.counts == {}


def test_rank_error_flags_first_and_drops_second():
    net = chain_network([0, 3, 7, 8])
    wire_chain(net, [0, 3, 7, 8])
    node = net.nodes[7]  # rank 768
    stale = Dao(GlobalPrefix(8), 1, sender_rank=768)
    node.on_dao(8, stale)
    assert stale.rank_error and node.counters["dao_fwd"] == 1
    again = Dao(GlobalPrefix(8), 2, sender_rank=768, rank_error=True)
    node.on_dao(8, again)
    assert node.counters["dao_loop_drop"] == 1 and node.counters["dao_fwd"] == 1


def test_data_fails_over_to_reachable_parent():
    pos = {0: [75.0, 75.0], 1: [75.0, 115.0], 2: [115.0, 75.0], 3: [115.0, 115.0]}
    net = Network(Scenario(clients=3, attackers=0, attack=False), 1, positions=pos)
    node = net.nodes[3]
    node.candidates = {1: Candidate(512), 2: Candidate(512)}
    node.preferred, node.rank = 1, 768
    net.nodes[1].preferred, net.nodes[1].rank = 0, 512
    net.nodes[2].preferred, net.nodes[2].rank = 0, 512
    net.positions[1][:] = [0.0, 0.0]  # parent 1 walks away
    net.medium.positions_changed()
    net.start()
    node.generate_data()
    net.sim.run_until(1.0)
    assert node.counters["data_failover"] == 1
    assert node.preferred == 2
    assert net.metrics.data_received >= 1


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_converged_dodag_ranks_decrease_toward_root(seed):
    net = Network(Scenario(clients=10, attackers=2, attack=False, duration=300.0), seed)
    net.run()
    for nid, node in net.nodes.items():
        if nid == 0 or node.preferred is None:
            continue
        parent = net.nodes[node.preferred]
        assert parent.rank < node.rank
    # storing: every root route is keyed by an originator's own prefix
    assert {p.iid for p in net.root.routes} <= set(net.nodes) - {0}


def test_addresses_share_identity():
    a = NodeAddress(0x1F)
    assert a.link_local == "fe80::1f" and str(a.global_prefix) == "fd00::1f"
    assert NodeAddress.from_global(a.global_prefix) == a
