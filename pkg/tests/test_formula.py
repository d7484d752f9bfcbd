import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stlftc.errors import FormulaSyntaxError, NotFlattenable, UnknownPredicate, WindowError
from stlftc.formula import (Always, And, Eventually, NotPred, Or, Pred, Predicate, TimeWindow, TrueF,
                            Until, flatten, horizon, parse, rewrite_until, satisfies, to_text)

P = {n: Predicate.from_box(n, [(lo, hi)]) for n, (lo, hi) in
     {"mu1": (0, 2), "mu2": (1, 4), "mu3": (3, 5)}.items()}


def w(a, b):
    return TimeWindow(a, b)


def test_parse_example_formula():
    phi = parse("G[0,16] F[2,10] mu1 | F[10,14] (mu2 U[5,10] mu3)", P)
    mu1, mu2, mu3 = (Pred(P[k]) for k in ("mu1", "mu2", "mu3"))
    assert phi == Or((Always(Eventually(mu1, w(2, 10)), w(0, 16)),
                      Eventually(Until(mu2, mu3, w(5, 10)), w(10, 14))))


def test_parse_true_and_negation():
    assert parse("T", P) == TrueF()
    assert parse("!mu1 & mu2", P) == And((NotPred(P["mu1"]), Pred(P["mu2"])))


def test_parse_errors():
    with pytest.raises(UnknownPredicate):
        parse("F[0,1] nope", P)
    with pytest.raises(FormulaSyntaxError):
        parse("F[0,1] (mu1", P)
    with pytest.raises(WindowError):
        parse("F[3,1] mu1", P)


def test_window_seconds_must_divide_period():
    assert parse("F[0,2] mu1", P, dt=0.5) == Eventually(Pred(P["mu1"]), w(0, 4))
    with pytest.raises(WindowError):
        parse("F[0,1.3] mu1", P, dt=0.5)


def test_rewrite_until_examples():
    mu1, mu2, mu3 = (Pred(P[k]) for k in ("mu1", "mu2", "mu3"))
    assert rewrite_until(Until(mu2, mu3, w(5, 10))) == And((Always(mu2, w(0, 10)), Eventually(mu3, w(5, 10))))
    assert rewrite_until(Eventually(mu1, w(2, 10))) == Eventually(mu1, w(2, 10))
    nested = Until(Until(mu1, mu2, w(0, 3)), mu3, w(1, 2))
    inner = And((Always(mu1, w(0, 3)), Eventually(mu2, w(0, 3))))
    assert rewrite_until(nested) == And((Always(inner, w(0, 2)), Eventually(mu3, w(1, 2))))


def test_horizon_examples():
    assert horizon(parse("G[0,16] F[2,10] mu1", P)) == 26
    assert horizon(parse("mu1", P)) == 0
    assert horizon(parse("F[10,14] (mu2 U[5,10] mu3)", P)) == 24


# random formulas over three 1-D predicates
def formulas(depth=3):
    leaves = st.sampled_from([Pred(P["mu1"]), Pred(P["mu2"]), NotPred(P["mu3"]), TrueF()])
    win = st.tuples(st.integers(0, 2), st.integers(0, 2)).map(lambda ab: w(ab[0], ab[0] + ab[1]))

    def extend(inner):
        return st.one_of(
            st.tuples(inner, inner).map(lambda c: And(c)),
            st.tuples(inner, inner).map(lambda c: Or(c)),
            st.tuples(inner, win).map(lambda c: Eventually(*c)),
            st.tuples(inner, win).map(lambda c: Always(*c)),
            st.tuples(inner, inner, win).map(lambda c: Until(*c)))

    return st.recursive(leaves, extend, max_leaves=5)


@given(formulas())
@settings(max_examples=200, deadline=None)
def test_print_parse_roundtrip(phi):
    assert parse(to_text(phi), P) == phi


@given(formulas())
@settings(max_examples=200, deadline=None)
def test_rewrite_keeps_horizon(phi):
    assert horizon(rewrite_until(phi)) == horizon(phi)


def _walks(length):
    for start in range(-1, 6):
        for seq in itertools.product((-1, 0, 1), repeat=length - 1):
            yield np.cumsum([start, *seq]).reshape(-1, 1).astype(float)


def test_rewrite_is_sound_on_enumerated_walks():
    """rewrite(phi) holding implies phi holding, over every walk of length 6."""
    mu1, mu2, mu3 = (Pred(P[k]) for k in ("mu1", "mu2", "mu3"))
    cases = [Until(mu2, mu3, w(0, 3)), Until(mu1, mu2, w(1, 4)), Eventually(Until(mu2, mu3, w(0, 2)), w(0, 2)),
             And((Until(mu1, mu2, w(0, 2)), Always(NotPred(P["mu3"]), w(0, 1))))]
    for phi in cases:
        rw = rewrite_until(phi)
        for traj in _walks(6):
            if satisfies(rw, traj):
                assert satisfies(phi, traj)


def test_rewrite_differs_from_until_semantics():
    # right holds at step 0 where left also holds; left fails at step 1
    left, right = Predicate.from_box("l", [(2, 3)]), Predicate.from_box("r", [(2, 2)])
    phi = Until(Pred(left), Pred(right), w(0, 1))
    traj = np.array([[2.0], [9.0]])
    assert satisfies(phi, traj)
    assert not satisfies(rewrite_until(phi), traj)


def test_flatten_conjunction():
    mu2, mu3 = Pred(P["mu2"]), Pred(P["mu3"])
    frags = flatten(And((Always(mu2, w(0, 10)), Eventually(mu3, w(5, 10)))))
    assert [(f.op, f.a, f.b, f.h1, f.h2) for f in frags] == [
        ("G", 0, 10, mu2, mu2), ("F", 5, 10, TrueF(), mu3)]


def test_flatten_until_single_fragment_and_prefix():
    mu2, mu3 = Pred(P["mu2"]), Pred(P["mu3"])
    (f,) = flatten(Until(mu2, mu3, w(0, 10)))
    assert (f.op, f.a, f.b, f.h1, f.h2) == ("U", 0, 10, mu2, mu3)
    g, u = flatten(Until(mu2, mu3, w(5, 10)))
    assert (g.op, g.a, g.b) == ("G", 0, 4) and (u.op, u.a, u.b) == ("U", 5, 10)


def test_flatten_rejects_nesting():
    with pytest.raises(NotFlattenable):
        flatten(parse("G[0,4] F[0,1] mu1", P))


def test_halfspace_predicate():
    p = Predicate.from_halfspace("h", [1.0, -1.0], 0.5)
    assert list(p.holds([[1.0, 0.0], [0.0, 1.0]])) == [True, False]
