import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpmw.games import (
    AgentRoutes,
    RoadNetwork,
    RoutingGame,
    TntpError,
    agent_travel_time,
    bpr_travel_time,
    congestion,
    enumerate_all,
    enumerate_routes,
    occupancy,
    read_network,
    read_trips,
    robust_bo_round,
    sample_matrix_game,
    scale_rewards,
    sioux_falls,
    synthetic_game,
)
from gpmw.games.matrix import rescale
from gpmw.gp import ConfigError
from gpmw.kernels import KernelSpec
from gpmw.learners import Feedback


# --- BPR, occupancy, travel time -------------------------------------------


def test_bpr_examples():
    assert bpr_travel_time(3.0, 7.0, 0.0) == 3.0
    assert bpr_travel_time(3.0, 7.0, 7.0) == pytest.approx(1.15 * 3.0, abs=0, rel=1e-15)
    assert bpr_travel_time(6.0, 10.0, 20.0) == pytest.approx(20.4, rel=1e-14)


def test_bpr_rejects_negative_load():
    with pytest.raises(ValueError):
        bpr_travel_time(1.0, 1.0, -0.5)


def test_bpr_increasing_and_convex():
    x = np.linspace(0.0, 50.0, 2001)
    t = bpr_travel_time(2.0, 9.0, x)
    d1 = np.diff(t)
    assert np.all(d1 >= 0) and np.all(np.diff(d1) >= -1e-12)
    assert np.all(d1[1:] > 0)


def test_occupancy_single_agent_is_zero():
    prof = np.array([[2.0, 0.0, 2.0]])
    assert np.all(occupancy(prof, 0) == 0)


def test_occupancy_two_agents_share_edge():
    prof = np.array([[3.0, 0.0], [5.0, 5.0]])
    assert occupancy(prof, 0)[0] == 5.0
    assert occupancy(prof, 1)[0] == 3.0


def test_occupancy_matches_double_loop():
    rng = np.random.default_rng(3)
    prof = rng.integers(0, 2, size=(20, 12)) * rng.uniform(1, 9, size=(20, 1))
    for i in range(20):
        E = sorted(rng.choice(12, size=5, replace=False).tolist())
        expect = [sum(prof[j, e] for j in range(20) if j != i) for e in E]
        assert np.allclose(occupancy(prof, i, E), expect, rtol=0, atol=1e-12)


def test_agent_travel_time_examples():
    assert agent_travel_time(np.zeros(3), np.ones(3), np.ones(3), np.ones(3)) == 0.0
    assert agent_travel_time([1.0], [0.0], np.array([1.0]), np.array([1.0])) == pytest.approx(1.15)
    with pytest.raises(ValueError):
        agent_travel_time([1.0, 1.0], [0.0], np.ones(2), np.ones(2))


# --- route enumeration ------------------------------------------------------


def diamond():
    # 1 -> 2 -> 4 costs 2; 1 -> 3 -> 4 costs 3; 1 -> 4 direct costs 7
    return RoadNetwork(
        init=[1, 2, 1, 3, 1],
        term=[2, 4, 3, 4, 4],
        capacity=[1.0] * 5,
        free_flow=[1.0, 1.0, 1.5, 1.5, 7.0],
        demands=[(1, 4, 2.0)],
    )


def test_diamond_prunes_long_route():
    r = enumerate_routes(diamond(), (1, 4, 2.0), K=5)
    assert r.free_flow == [2.0, 3.0]
    assert r.routes == [[0, 1], [2, 3]]


def test_two_node_network_has_one_route():
    net = RoadNetwork([1], [2], [1.0], [1.0])
    assert len(enumerate_routes(net, (1, 2, 1.0)).routes) == 1


def test_disconnected_pair_is_config_error():
    net = RoadNetwork([1, 3], [2, 4], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        enumerate_routes(net, (1, 4, 1.0))
    with pytest.raises(ConfigError):
        enumerate_routes(net, (1, 9, 1.0))


@pytest.fixture(scope="module")
def sf():
    net = sioux_falls()
    return net, enumerate_all(net)


def test_sioux_falls_agents(sf):
    net, agents = sf
    assert net.n_edges == 76 and len(net.nodes) == 24
    assert len(agents) == 528
    counts = [len(a.routes) for a in agents]
    assert min(counts) >= 1 and max(counts) <= 5
    again = enumerate_all(net)
    assert [a.routes for a in again] == [a.routes for a in agents]
    for a in agents:
        assert max(a.free_flow) <= 3.0 * a.free_flow[0] + 1e-12
        assert a.free_flow == sorted(a.free_flow)


def test_sioux_falls_shortest_outcome_matches_edge_recount(sf):
    net, agents = sf
    game = RoutingGame(net, agents)
    joint = tuple(game.shortest(i) for i in range(len(agents)))
    load = np.zeros(net.n_edges)
    for a, k in zip(agents, joint):
        for e in a.routes[k]:
            load[e] += a.demand
    for i in (0, 17, 300, 527):
        a = agents[i]
        expect = 0.0
        for e in a.routes[joint[i]]:
            expect += a.demand * net.free_flow[e] * (1 + 0.15 * (load[e] / net.capacity[e]) ** 4)
        assert game.travel_times(i, joint)[joint[i]] == pytest.approx(expect, rel=1e-12)


# --- small routing game -----------------------------------------------------


def grid_game(n_agents=20, seed=0):
    """A 3x3 grid of two-way roads with random OD pairs."""
    rng = np.random.default_rng(seed)
    nodes = {(r, c): 3 * r + c + 1 for r in range(3) for c in range(3)}
    init, term = [], []
    for (r, c), u in nodes.items():
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            v = nodes.get((r + dr, c + dc))
            if v is not None:
                init.append(u)
                term.append(v)
    E = len(init)
    demands = []
    while len(demands) < n_agents:
        o, d = rng.choice(9, size=2, replace=False) + 1
        demands.append((int(o), int(d), float(rng.uniform(1, 5))))
    net = RoadNetwork(init, term, rng.uniform(3, 8, E), rng.uniform(1, 3, E), demands)
    return net, enumerate_all(net)


def test_congestion_examples():
    assert congestion(np.zeros((2, 4)), np.ones(4)) == 0.0
    assert congestion(np.array([[2.0]]), np.array([2.0])) == pytest.approx(0.15)


def test_congestion_matches_double_loop():
    net, agents = grid_game()
    game = RoutingGame(net, agents)
    rng = np.random.default_rng(1)
    joint = tuple(int(rng.integers(game.n_actions(i))) for i in range(game.n_players))
    total = 0.0
    for e in range(net.n_edges):
        x = 0.0
        for a, k in zip(agents, joint):
            if e in a.routes[k]:
                x += a.demand
        total += 0.15 * (x / net.capacity[e]) ** 4
    assert abs(game.congestion(joint) - total / net.n_edges) < 1e-12
    prof = np.array([game._load[i][k] for i, k in enumerate(joint)])
    assert abs(congestion(prof, net.capacity) - total / net.n_edges) < 1e-12


def test_counterfactual_uses_formula_pieces():
    net, agents = grid_game(seed=4)
    game = RoutingGame(net, agents)
    rng = np.random.default_rng(2)
    joint = tuple(int(rng.integers(game.n_actions(i))) for i in range(game.n_players))
    prof = np.array([game._load[i][k] for i, k in enumerate(joint)])
    for i in range(game.n_players):
        psi = occupancy(prof, i)
        for k in range(game.n_actions(i)):
            own = game._load[i][k]
            expect = agent_travel_time(own, psi, net.free_flow, net.capacity)
            assert game.travel_times(i, joint)[k] == pytest.approx(expect, rel=1e-12)


def test_scale_rewards_single_agent():
    net = diamond()
    game = RoutingGame(net, enumerate_all(net))
    b = scale_rewards(game, 50, seed=0)
    # worst route is 1->3->4 (cost 3) carrying its own demand of 2 on capacity 1
    assert b[0] == pytest.approx(2.0 * 3.0 * (1 + 0.15 * 2.0**4))


def test_scale_rewards_reproducible_and_monotone():
    net, agents = grid_game()
    game = RoutingGame(net, agents)
    a = scale_rewards(game, 10_000, seed=5)
    assert np.array_equal(a, scale_rewards(game, 10_000, seed=5))
    # nested sampling: a longer run with the same seed sees a superset of outcomes
    small = scale_rewards(game, 300, seed=5)
    assert np.all(a >= small)


def test_bounds_rarely_exceeded_in_play():
    net, agents = grid_game()
    game = RoutingGame(net, agents)
    game.bounds = scale_rewards(game, 10_000, seed=5)
    rng = np.random.default_rng(9)
    over, total = 0, 0
    for _ in range(500):
        joint = tuple(int(rng.integers(game.n_actions(i))) for i in range(game.n_players))
        for i in range(game.n_players):
            over += game.travel_times(i, joint)[joint[i]] > game.bounds[i]
            total += 1
    assert over / total < 0.01


def test_routing_rewards_in_unit_interval():
    net, agents = grid_game()
    game = RoutingGame(net, agents)
    game.bounds = scale_rewards(game, 500, seed=1)
    joint = tuple(0 for _ in range(game.n_players))
    for i in range(game.n_players):
        r = game.full_rewards(i, joint)
        assert np.all((0 <= r) & (r <= 1))
        assert game.reward(i, joint) == r[0]


def test_potential_relabeling_and_unilateral_switch():
    net, agents = grid_game(seed=7)
    game = RoutingGame(net, agents)
    rng = np.random.default_rng(0)
    joint = [int(rng.integers(game.n_actions(i))) for i in range(game.n_players)]
    total = sum(game.travel_times(i, joint)[joint[i]] for i in range(game.n_players))
    perm = rng.permutation(game.n_players)
    shuffled = RoutingGame(net, [agents[p] for p in perm])
    pj = [joint[p] for p in perm]
    total2 = sum(shuffled.travel_times(i, pj)[pj[i]] for i in range(game.n_players))
    assert total2 == pytest.approx(total, rel=1e-12)

    for i in range(game.n_players):
        tt = game.travel_times(i, joint)
        k = int(np.argmin(tt))
        if tt[k] < tt[joint[i]]:
            before = game.loads(joint).copy()
            switched = list(joint)
            switched[i] = k
            after = game.loads(switched)
            assert game.travel_times(i, switched)[k] < tt[joint[i]]
            moved = set(agents[i].routes[joint[i]]) ^ set(agents[i].routes[k])
            same = [e for e in range(net.n_edges) if e not in moved]
            assert np.allclose(before[same], after[same])
            break


# --- matrix games -----------------------------------------------------------


def test_matrix_game_seeded():
    k = KernelSpec("se", lengthscale=6.0)
    a = sample_matrix_game(8, k, seed=4)
    b = sample_matrix_game(8, k, seed=4)
    assert np.array_equal(a.tables[0], b.tables[0])
    assert np.array_equal(a.tables[0], a.tables[1])
    assert a.tables[0].min() == 0.0 and a.tables[0].max() == 1.0


def test_matrix_game_huge_lengthscale_nearly_constant():
    g = sample_matrix_game(2, KernelSpec("se", lengthscale=1e6), seed=0)
    assert np.ptp(g.raw) < 0.2


def test_rescale_degenerate_table():
    table, (lo, scale) = rescale(np.full((3, 3), 2.5))
    assert np.all(table == 0.5) and scale == 0.0


def test_matrix_game_rows_are_smooth():
    corr = []
    for s in range(10):
        t = sample_matrix_game(30, KernelSpec("se", lengthscale=6.0), seed=s).tables[0]
        corr.append(np.corrcoef(t[:, :-1].ravel(), t[:, 1:].ravel())[0, 1])
    assert np.mean(corr) > 0.5


def test_matrix_game_needs_two_actions():
    with pytest.raises(ConfigError):
        sample_matrix_game(1, KernelSpec())


def test_matrix_noise_follows_rescaling():
    g = sample_matrix_game(5, KernelSpec("se", lengthscale=2.0), seed=1, noise_std=1.0)
    assert g.noise_std(0) == pytest.approx(1.0 / g.transform[1])
    assert np.allclose((g.raw - g.transform[0]) / g.transform[1], g.tables[0])


# --- robust BO --------------------------------------------------------------


def test_robust_bo_round_oracle():
    g = synthetic_game(50, 20, 15, seed=0, noise_std=0.0)
    lo, scale = g.transform
    rng = np.random.default_rng(0)
    for m, i in [(0, 0), (13, 7), (49, 19)]:
        r, idx = robust_bo_round(g, m, i, rng)
        assert idx == i
        assert r == pytest.approx((g.items[m] @ g.profiles[i] - lo) / scale, abs=1e-12)
    with pytest.raises(IndexError):
        robust_bo_round(g, 50, 0, rng)


def test_robust_bo_noise_reproducible():
    g = synthetic_game(5, 3, 4, seed=0, noise_std=0.3)
    a = robust_bo_round(g, 1, 2, np.random.default_rng(7))
    b = robust_bo_round(g, 1, 2, np.random.default_rng(7))
    assert a == b and a[0] != g.table[1, 2]


def test_synthetic_profiles_unit_rows():
    g = synthetic_game(10, 4, 6, seed=2)
    assert np.allclose(np.linalg.norm(g.items, axis=1), 1.0)
    assert np.all(g.items >= 0)
    assert g.table.min() == 0.0 and g.table.max() == 1.0


def test_robust_bo_grid_matches_outcomes():
    for reveal in ("index", "profile"):
        g = synthetic_game(6, 4, 3, seed=1, reveal=reveal)
        grid = g.grid()
        rows = g.outcomes(0)(g.context(0, (2, 3)))
        assert np.array_equal(grid[:, 3, :], rows)


# --- feedback channels ------------------------------------------------------


def test_feedback_channels_reveal_only_entitlement():
    g = sample_matrix_game(4, KernelSpec("se", lengthscale=2.0), seed=0)
    joint = (1, 2)
    assert g.feedback(0, joint, "none", 0.3) is None
    assert g.feedback(0, joint, "bandit", 0.3) == Feedback(reward=0.3)
    fb = g.feedback(0, joint, "context", 0.3)
    assert fb.reward == 0.3 and fb.rewards is None and list(fb.context) == [2.0]
    fb = g.feedback(0, joint, "full", 0.3)
    assert fb.reward is None and fb.context is None
    assert np.array_equal(fb.rewards, g.tables[0][:, 2])
    with pytest.raises(ValueError):
        g.feedback(0, joint, "telepathy", 0.3)


def test_routing_context_is_aggregate_only():
    net, agents = grid_game()
    game = RoutingGame(net, agents)
    game.bounds = np.full(len(agents), 1e6)
    joint = tuple(0 for _ in agents)
    fb = game.feedback(3, joint, "context", 0.5)
    assert fb.context.shape == (len(agents[3].edges),)
    assert fb.rewards is None


# --- TNTP parsing -----------------------------------------------------------


NET = """<NUMBER OF ZONES> 2
<END OF METADATA>

~ init term capacity length fft b power speed toll type ;
\t1\t2\t10.0\t1\t3.0\t0.15\t4\t0\t0\t1\t;
\t2   1  10.0 1 3.0 0.15 4 0 0 1 ;
"""

TRIPS = """<NUMBER OF ZONES> 2
<END OF METADATA>

Origin 1
    1 :       0.0;     2 :     100.0;
Origin 2
    1 :      50.0;    2 :       0.0;
"""


def test_tntp_round_trip(tmp_path):
    (tmp_path / "n.tntp").write_text(NET)
    (tmp_path / "t.tntp").write_text(TRIPS)
    net = read_network(tmp_path / "n.tntp")
    assert net.n_edges == 2 and list(net.free_flow) == [3.0, 3.0]
    assert read_trips(tmp_path / "t.tntp") == [(1, 2, 100.0), (2, 1, 50.0)]


def test_tntp_malformed_edge_names_line(tmp_path):
    p = tmp_path / "bad.tntp"
    p.write_text(NET.replace("2   1  10.0 1 3.0", "2   1  ten 1 3.0"))
    with pytest.raises(TntpError, match=r"bad\.tntp:6:"):
        read_network(p)


def test_tntp_malformed_trips_names_line(tmp_path):
    p = tmp_path / "bad.tntp"
    p.write_text(TRIPS.replace("1 :      50.0;", "1 : fifty;"))
    with pytest.raises(TntpError, match=r":7:"):
        read_trips(p)
