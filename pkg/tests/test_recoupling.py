import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import Rational
from sympy.physics.wigner import wigner_3j as sym_3j
from sympy.physics.wigner import wigner_6j as sym_6j

from thetavqe.recoupling import HalfInt, triangle_ok, wigner_3j, wigner_6j, wigner_6j_from_3j

TMAX = 4  # twice-values up to spin 2


def half(t):
    return Rational(t, 2)


def m_values(t):
    return range(-t, t + 1, 2)


def test_halfint_basics():
    j = HalfInt.of("3/2")
    assert j.twice == 3
    assert j.dim == 4
    assert not j.is_integer
    assert str(j) == "3/2"
    assert float(HalfInt.of(2)) == 2.0
    assert j.value == Fraction(3, 2)
    with pytest.raises(ValueError):
        HalfInt.of("1/3")


@pytest.mark.parametrize("triple,expected", [
    ((0, 0, 0), True),
    ((1, 1, 0), True),
    ((1, 0, 0), False),
    ((1, 1, 3), False),
    ((2, 2, 2), True),
    ((3, 2, 1), True),
])
def test_triangle_ok(triple, expected):
    assert triangle_ok(*triple) is expected


@pytest.mark.parametrize("args,expected", [
    ((0, 0, 0, 0, 0, 0), 1.0),
    ((1, 1, 0, 1, -1, 0), 1 / math.sqrt(2)),
    ((2, 2, 2, 2, -2, 0), 1 / math.sqrt(6)),
])
def test_3j_known_values(args, expected):
    assert wigner_3j(*args) == pytest.approx(expected, abs=1e-14)


def _cg(j1, m1, j2, m2, J, M):
    """Clebsch-Gordan coefficient by the explicit lowering-operator construction.

    Builds |J M> in the product basis starting from |J J> obtained by
    orthogonalising against the higher multiplets; all twice-values.
    """
    import numpy as np

    basis = [(a, b) for a in m_values(j1) for b in m_values(j2)]
    pos = {s: i for i, s in enumerate(basis)}
    n = len(basis)

    def jminus(vec):
        out = np.zeros(n)
        for (a, b), i in pos.items():
            if vec[i] == 0:
                continue
            if a > -j1:
                out[pos[(a - 2, b)]] += vec[i] * math.sqrt((j1 + a) * (j1 - a + 2)) / 2
            if b > -j2:
                out[pos[(a, b - 2)]] += vec[i] * math.sqrt((j2 + b) * (j2 - b + 2)) / 2
        return out

    def jminus_norm(Jt, Mt):
        return math.sqrt((Jt + Mt) * (Jt - Mt + 2)) / 2

    states = {}
    for Jt in range(j1 + j2, abs(j1 - j2) - 1, -2):
        top = np.zeros(n)
        # highest weight: orthogonal to all higher multiplets at M = Jt
        cands = [pos[(a, Jt - a)] for a in m_values(j1) if abs(Jt - a) <= j2 and (Jt - a - j2) % 2 == 0]
        sub = np.zeros((len(cands), n))
        for k, i in enumerate(cands):
            sub[k, i] = 1.0
        v = None
        for row in sub:
            w = row.copy()
            for (J2, M2), u in states.items():
                if M2 == Jt:
                    w -= (u @ w) * u
            if np.linalg.norm(w) > 1e-9:
                v = w / np.linalg.norm(w)
                break
        # Condon-Shortley: coefficient of m1 = j1 positive
        lead = [i for i in cands if basis[i][0] == max(basis[c][0] for c in cands if abs(v[c]) > 1e-12)]
        if v[lead[0]] < 0:
            v = -v
        states[(Jt, Jt)] = v
        Mt = Jt
        while Mt > -Jt:
            v = jminus(v) / jminus_norm(Jt, Mt)
            Mt -= 2
            states[(Jt, Mt)] = v
    return states[(J, M)][pos[(m1, m2)]]


@pytest.mark.parametrize("j1,j2,j3,m1,m2", [
    (1, 1, 0, 1, -1),
    (2, 2, 2, 2, -2),
    (2, 1, 1, 0, 1),
    (3, 2, 1, -1, 2),
    (4, 2, 2, 2, 0),
])
def test_3j_against_clebsch_gordan(j1, j2, j3, m1, m2):
    m3 = -m1 - m2
    cg = _cg(j1, m1, j2, m2, j3, -m3)
    sign = -1 if ((j1 - j2 - m3) // 2) % 2 else 1
    expected = sign * cg / math.sqrt(j3 + 1)
    assert wigner_3j(j1, j2, j3, m1, m2, m3) == pytest.approx(expected, abs=1e-12)


def test_3j_matches_sympy_exhaustively():
    for a in range(TMAX + 1):
        for b in range(TMAX + 1):
            for c in range(TMAX + 1):
                for ma in m_values(a):
                    for mb in m_values(b):
                        mc = -ma - mb
                        if abs(mc) > c or (c - mc) % 2:
                            continue
                        ref = float(sym_3j(half(a), half(b), half(c), half(ma), half(mb), half(mc)))
                        assert wigner_3j(a, b, c, ma, mb, mc) == pytest.approx(ref, abs=1e-13)


def test_3j_selection_rules_and_errors():
    assert wigner_3j(2, 2, 2, 2, 2, 0) == 0.0  # m sum
    with pytest.raises(ValueError):
        wigner_3j(1, 1, 0, 0, 1, -1)  # m parity vs j
    assert wigner_3j(2, 2, 6, 0, 0, 0) == 0.0  # triangle


@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.data())
@settings(max_examples=80, deadline=None)
def test_3j_permutation_symmetry(a, b, c, data):
    if not triangle_ok(a, b, c):
        return
    ma = data.draw(st.sampled_from(list(m_values(a))))
    mb = data.draw(st.sampled_from(list(m_values(b))))
    mc = -ma - mb
    if abs(mc) > c:
        return
    v = wigner_3j(a, b, c, ma, mb, mc)
    phase = -1 if ((a + b + c) // 2) % 2 else 1
    assert wigner_3j(b, c, a, mb, mc, ma) == pytest.approx(v, abs=1e-14)
    assert wigner_3j(b, a, c, mb, ma, mc) == pytest.approx(phase * v, abs=1e-14)
    assert wigner_3j(a, b, c, -ma, -mb, -mc) == pytest.approx(phase * v, abs=1e-14)


def test_3j_orthogonality_first():
    # sum over j3, m3 of d_j3 (j1 j2 j3; m1 m2 m3)(j1 j2 j3; m1' m2' m3)
    worst = 0.0
    for j1 in range(TMAX + 1):
        for j2 in range(TMAX + 1):
            for m1 in m_values(j1):
                for m2 in m_values(j2):
                    for m1p in m_values(j1):
                        m2p = m1 + m2 - m1p
                        if abs(m2p) > j2:
                            continue
                        s = 0.0
                        for j3 in range(abs(j1 - j2), j1 + j2 + 1, 2):
                            m3 = -m1 - m2
                            if abs(m3) > j3:
                                continue
                            s += (j3 + 1) * wigner_3j(j1, j2, j3, m1, m2, m3) * wigner_3j(j1, j2, j3, m1p, m2p, m3)
                        target = 1.0 if (m1, m2) == (m1p, m2p) else 0.0
                        worst = max(worst, abs(s - target))
    assert worst < 1e-12


def test_3j_orthogonality_second():
    worst = 0.0
    for j1 in range(TMAX + 1):
        for j2 in range(TMAX + 1):
            for j3 in range(abs(j1 - j2), j1 + j2 + 1, 2):
                for j3p in range(abs(j1 - j2), j1 + j2 + 1, 2):
                    for m3 in m_values(min(j3, j3p)):
                        s = 0.0
                        for m1 in m_values(j1):
                            m2 = -m1 - m3
                            if abs(m2) > j2:
                                continue
                            s += wigner_3j(j1, j2, j3, m1, m2, m3) * wigner_3j(j1, j2, j3p, m1, m2, m3)
                        s *= j3 + 1
                        target = 1.0 if j3 == j3p else 0.0
                        worst = max(worst, abs(s - target))
    assert worst < 1e-12


@pytest.mark.parametrize("args,expected", [
    ((0, 0, 0, 1, 1, 1), -1 / math.sqrt(2)),
    ((1, 1, 2, 1, 1, 2), 1 / 6),
])
def test_6j_known_values(args, expected):
    assert wigner_6j(*args) == pytest.approx(expected, abs=1e-14)
    assert wigner_6j_from_3j(*args) == pytest.approx(expected, abs=1e-12)


def test_6j_broken_triad_is_zero():
    assert wigner_6j(0, 2, 2, 1, 3, 1) == 0.0  # (d,b,f) = (1/2,1,1/2) fine, (a,e,f) = (0,3/2,1/2) broken
    assert wigner_6j(0, 2, 4, 2, 2, 2) == 0.0


def test_6j_racah_equals_contraction():
    worst = 0.0
    rng = range(TMAX + 1)
    for a in rng:
        for b in rng:
            for c in rng:
                if not triangle_ok(a, b, c):
                    continue
                for d in rng:
                    for e in rng:
                        if not triangle_ok(d, e, c):
                            continue
                        for f in rng:
                            worst = max(worst, abs(wigner_6j(a, b, c, d, e, f) - wigner_6j_from_3j(a, b, c, d, e, f)))
    assert worst < 1e-10


@given(*[st.integers(0, 5)] * 6)
@settings(max_examples=150, deadline=None)
def test_6j_matches_sympy(a, b, c, d, e, f):
    try:
        ref = float(sym_6j(half(a), half(b), half(c), half(d), half(e), half(f)))
    except ValueError:  # sympy refuses triads with a half-integer sum
        ref = 0.0
    assert wigner_6j(a, b, c, d, e, f) == pytest.approx(ref, abs=1e-13)


@given(*[st.integers(0, 4)] * 6)
@settings(max_examples=100, deadline=None)
def test_6j_symmetries(a, b, c, d, e, f):
    v = wigner_6j(a, b, c, d, e, f)
    assert wigner_6j(b, a, c, e, d, f) == pytest.approx(v, abs=1e-14)
    assert wigner_6j(c, b, a, f, e, d) == pytest.approx(v, abs=1e-14)
    assert wigner_6j(d, e, c, a, b, f) == pytest.approx(v, abs=1e-14)


def test_large_spin_stays_accurate():
    # exact rational arithmetic avoids cancellation at larger spins
    ref = float(sym_6j(8, 8, 8, 8, 8, 8))
    assert wigner_6j(16, 16, 16, 16, 16, 16) == pytest.approx(ref, rel=1e-12)
