import itertools

import numpy as np
import pytest

from conftest import WALK, WALK_DYN, WALK_INPUTS, walk_states
from oracles import rollouts
from stlftc.errors import HorizonTooShort
from stlftc.formula import Predicate, horizon, parse, rewrite_until, satisfies
from stlftc.sets import BoxUnion
from stlftc.stlt import (build, check_satisfaction, complete_paths, encode_times, fragments_of,
                         nesting_order_holds, monitor_groups, on_event, path_groups)

WALK_P = {"a": Predicate.from_box("a", [(-3, 4)]), "b": Predicate.from_box("b", [(1, 3)]),
          "c": Predicate.from_box("c", [(3, 4)]), "z": Predicate.from_box("z", [(0, 5)])}


def walk_tree(text):
    return build(rewrite_until(parse(text, WALK_P)), WALK, WALK_DYN, WALK_INPUTS)


def test_integrator_tree_shape(integrator_tree):
    t = integrator_tree
    assert len(t) == 10
    assert [n.op.label() if n.op else None for n in t.nodes[:4]] == ["∨", "G[0,16]", "F[10,14]", "F[2,10]"]
    assert len(complete_paths(t)) == 3


def test_integrator_regions(integrator_tree):
    ws = integrator_tree.nodes[0].region.workspace
    want = {1: ((-14.5, -14.5), (8.5, 8.5)), 2: ((-12.5, -18.5), (18.5, 12.5)), 3: ((-14.5, -14.5), (8.5, 8.5)),
            4: ((1.5, -4.5), (4.5, -1.5)), 5: ((-4.5, -4.5), (-1.5, -1.5))}
    for nid, b in want.items():
        assert integrator_tree.nodes[nid].region.same_set(BoxUnion([b], ws))


def test_paths_count_leaves():
    for text in ["a", "a & b", "G[0,2] a | F[0,1] (b & c)", "G[0,1] F[0,1] b & c U[0,2] a"]:
        t = walk_tree(text)
        assert len(complete_paths(t)) == sum(n.is_leaf for n in t.nodes)
    assert len(complete_paths(walk_tree("a"))) == 1
    assert len(complete_paths(walk_tree("a & b"))) == 2


def test_path_groups_follow_disjunction(integrator_tree):
    groups = path_groups(integrator_tree)
    assert len(groups) == 2
    assert [len(g) for g in groups] == [1, 2]


def test_single_predicate_tree():
    t = walk_tree("b")
    assert len(t) == 1 and walk_states(t.root.region) == {1, 2, 3}


def test_stay_in_root_matches_brute_force():
    t = walk_tree("G[0,2] z")
    brute = {x for x in range(-5, 6) if any(all(s in range(0, 6) for s in tr) for tr in rollouts(x, 2))}
    assert walk_states(t.root.region) == brute


@pytest.mark.parametrize("text", ["G[0,2] F[0,1] b", "F[0,2] b & G[0,3] a", "a U[1,2] c | G[0,1] b",
                                  "F[1,2] (b & G[0,1] a)"])
def test_root_region_is_sound(text):
    """Every root-region state admits an input sequence satisfying the formula."""
    phi = parse(text, WALK_P)
    t = build(rewrite_until(phi), WALK, WALK_DYN, WALK_INPUTS)
    T = horizon(phi)
    for x in walk_states(t.root.region):
        assert any(satisfies(phi, np.array(tr, float).reshape(-1, 1)) for tr in rollouts(x, T))


def test_check_satisfaction_constant_inside():
    t = walk_tree("G[0,5] b")
    assert check_satisfaction(np.full((6, 1), 2.0), t)
    with pytest.raises(HorizonTooShort):
        check_satisfaction(np.full((3, 1), 2.0), t)


@pytest.mark.parametrize("text", ["G[0,2] F[0,2] b", "F[0,3] b & G[0,5] a", "F[1,2] (c | G[0,1] b)",
                                  "G[0,1] a | F[2,4] c"])
def test_check_satisfaction_matches_semantics(text):
    phi = rewrite_until(parse(text, WALK_P))
    t = build(phi, WALK, WALK_DYN, WALK_INPUTS)
    for start in range(-1, 5):
        for seq in itertools.product((-1, 0, 1), repeat=5):
            traj = np.cumsum([start, *seq]).reshape(-1, 1).astype(float)
            if np.any(np.abs(traj) > 5):
                continue
            assert check_satisfaction(traj, t) == satisfies(phi, traj)


def test_encode_times_single_always():
    t = walk_tree("G[2,5] b")
    leaf = t.nodes[1]
    assert leaf.start == (2, 2) and leaf.duration == 3
    (f,) = fragments_of(t)
    assert f.domain == (2, 5) and f.predecessor is None


def test_integrator_encoding_fields(integrator_tree):
    n = integrator_tree.nodes
    assert (n[4].start, n[4].duration) == ((10, 14), 0)
    assert (n[8].start, n[8].duration) == ((10, 14), 10)
    assert n[3].duration == 16 and n[9].start == (15, 24)


def test_formula_convention(integrator_problem):
    import copy
    t = copy.deepcopy(integrator_problem.tree("box"))
    encode_times(t, "formula")
    assert t.nodes[5].start == (2, 10)
    assert t.nodes[3].start == (0, 0)


def test_fragments_nesting_order(integrator_tree):
    frags = fragments_of(integrator_tree)
    assert [f.node for f in frags] == [3, 5, 4, 8, 9]
    assert [f.predecessor for f in frags] == [None, 0, None, 2, 2]
    assert [f.domain[1] for f in frags] == [16, 26, 14, 24, 24]
    assert all(ok for _, _, ok in nesting_order_holds(frags))


def test_on_event_freezes_and_is_idempotent(integrator_tree):
    t2 = on_event(integrator_tree, (-3.0, -3.0), 6)
    assert t2.nodes[5].start == (6, 6) and t2.nodes[5].frozen
    assert t2.nodes[5].t_e == 6
    t3 = on_event(t2, (-3.0, -3.0), 7)
    assert t3.nodes[5].start == (6, 6)
    t4 = on_event(integrator_tree, (-3.0, -3.0), 40)
    assert [n.start for n in t4.nodes] == [n.start for n in integrator_tree.nodes]
    assert integrator_tree.nodes[5].frozen is False


def test_monitor_groups_integrator(integrator_tree):
    g1, *rest = monitor_groups(integrator_tree)
    assert [(f.op, f.a, f.b) for f in g1] == [("G", 0, 16), ("F", 2, 10), ("F", 18, 26)]
    # one group per instant s in [10,14] at which the conjunction is held
    assert [[(f.op, f.a, f.b) for f in g] for g in rest] == [
        [("G", s, s), ("G", s, s + 10), ("F", s + 5, s + 10)] for s in range(10, 15)]


def test_monitor_groups_relaxed_over_limit(integrator_tree):
    g1, g2 = monitor_groups(integrator_tree, limit=1)
    assert [(f.op, f.a, f.b) for f in g2] == [("F", 10, 14), ("G", 14, 20), ("F", 15, 24)]


def test_monitor_groups_report_their_branch(integrator_tree):
    tagged = monitor_groups(integrator_tree, with_branch=True)
    assert [b for b, _ in tagged] == [0, 1, 1, 1, 1, 1]
    assert [g for _, g in tagged] == monitor_groups(integrator_tree)
