import pytest

from blockjack.topology import (
    ASN_BASE,
    TopologyError,
    gen_topology,
    node_depth,
    random_topology,
    root_child_of,
    tree_topology,
)
from blockjack.types import RouterId


def adjacency(topo):
    adj = {rid: set() for rid in topo.routers}
    for a, b, _ in topo.links:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def test_node_depth_heap_numbering():
    assert [node_depth(i) for i in range(8)] == [0, 1, 1, 2, 2, 2, 2, 3]
    assert root_child_of(0) == 0
    assert root_child_of(9) == 1   # 9 -> 4 -> 1
    assert root_child_of(14) == 2  # 14 -> 6 -> 2


def test_seven_router_tree_shape():
    topo = tree_topology("single_path", 7, attacks=2, delay=0.1)
    assert topo.dispatcher == RouterId(ASN_BASE, 0)
    assert len(topo.links) == 6
    adj = adjacency(topo)
    assert adj[topo.dispatcher] == {RouterId(ASN_BASE + 1, 1), RouterId(ASN_BASE + 2, 2)}
    # victims are depth-2 leaves under child 1; adversaries depth-1 under child 2
    assert {v.index for v in topo.victims} == {3, 4}
    assert {a.index for a in topo.adversaries} == {2}


def test_peered_tree_adds_level_cliques():
    single = tree_topology("single_path", 7, attacks=2, delay=0.1)
    multi = tree_topology("multi_path", 7, attacks=2, delay=0.1)
    extra = set((a, b) for a, b, _ in multi.links) - set((a, b) for a, b, _ in single.links)
    # level 1: one pair; level 2: C(4,2) = 6 pairs
    assert len(extra) == 7
    index_pairs = {(a.index, b.index) for a, b in extra}
    assert (1, 2) in index_pairs
    assert {(3, 4), (3, 5), (3, 6), (4, 5), (4, 6), (5, 6)} <= index_pairs


@pytest.mark.parametrize("n", [20, 30, 40, 50, 60])
def test_tree_placement_depths(n):
    topo = tree_topology("single_path", n, attacks=5, delay=0.1)
    depth_max = max(node_depth(i) for i in range(n))
    for victim in topo.victims:
        assert node_depth(victim.index) == depth_max
        assert root_child_of(victim.index) == 1
        assert 2 * victim.index + 1 >= n  # a leaf
    for adversary in topo.adversaries:
        assert node_depth(adversary.index) == depth_max - 1
        assert root_child_of(adversary.index) == 2
    assert len(topo.victims) == len(topo.adversaries) == 5
    assert set(topo.victims).isdisjoint(topo.adversaries)


def test_tree_too_small_rejected():
    with pytest.raises(TopologyError):
        tree_topology("single_path", 2, attacks=1, delay=0.1)
    with pytest.raises(TopologyError):
        tree_topology("single_path", 3, attacks=1, delay=0.1)  # depth 1 only


def test_random_graph_connected_and_reproducible():
    a = random_topology(30, 0.25, attacks=5, seed=7, delay=0.1)
    b = random_topology(30, 0.25, attacks=5, seed=7, delay=0.1)
    assert a.links == b.links
    assert a.dispatcher == b.dispatcher
    assert a.victims == b.victims and a.adversaries == b.adversaries
    adj = adjacency(a)
    seen, stack = {a.routers[0]}, [a.routers[0]]
    while stack:
        for peer in adj[stack.pop()]:
            if peer not in seen:
                seen.add(peer)
                stack.append(peer)
    assert len(seen) == 30


def test_random_graph_mean_degree_tracks_connectivity():
    # 20 routers at 50%: expected mean degree 19 * 0.5 = 9.5
    for seed in (1, 2, 3):
        topo = random_topology(20, 0.5, attacks=5, seed=seed, delay=0.1)
        mean_degree = 2 * len(topo.links) / 20
        assert 7.0 <= mean_degree <= 12.0
    # independent count oracle: each edge contributes two endpoint slots
    degrees = {rid: 0 for rid in topo.routers}
    for a, b, _ in topo.links:
        degrees[a] += 1
        degrees[b] += 1
    assert sum(degrees.values()) == 2 * len(topo.links)


def test_random_placement_disjoint():
    topo = random_topology(50, 0.25, attacks=5, seed=9, delay=0.1)
    assert topo.dispatcher not in topo.victims
    assert topo.dispatcher not in topo.adversaries
    assert set(topo.victims).isdisjoint(topo.adversaries)
    assert len(set(topo.victims)) == 5


def test_random_rejects_bad_connectivity():
    with pytest.raises(TopologyError):
        random_topology(10, 0.0, attacks=1, seed=1, delay=0.1)
    with pytest.raises(TopologyError):
        random_topology(10, 1.5, attacks=1, seed=1, delay=0.1)


def test_gen_topology_dispatch_and_document():
    topo = gen_topology("multi_path", 15, attacks=3, seed=1)
    doc = topo.document()
    assert len(doc["routers"]) == 15
    assert all({"a", "b", "delay_s"} <= set(link) for link in doc["links"])
    with pytest.raises(TopologyError):
        gen_topology("hexagonal", 15, attacks=3)
