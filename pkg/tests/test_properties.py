import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from parametric_modes.analysis import g2_from_M, mode_number
from parametric_modes.grid import make_grid
from parametric_modes.io import fmt
from parametric_modes.modes import extract_mode_structure, synthesize_state
from parametric_modes.su11 import (ComplexGain, ContinuousGainParams, StageSpec, cascade, compose_two_stage,
                                   continuous_gain)

from conftest import hermite_gauss

finite = st.floats(-3, 3, allow_nan=False)
complexes = st.builds(complex, finite, finite)
phases = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def gain_from(g: complex) -> ComplexGain:
    return StageSpec(g).gain()


@given(complexes, complexes, phases)
def test_composition_preserves_bogoliubov_norm(g1, g2, theta):
    out = compose_two_stage(gain_from(g1), gain_from(g2), theta)
    scale = abs(out.G) ** 2
    assert abs(abs(out.G) ** 2 - abs(out.g) ** 2 - 1) <= 1e-12 * max(1.0, scale)


@given(st.lists(st.tuples(complexes, phases), min_size=1, max_size=8))
def test_cascade_preserves_bogoliubov_norm(stages):
    out = cascade([StageSpec(g, t) for g, t in stages])
    assert abs(abs(out.G) ** 2 - abs(out.g) ** 2 - 1) <= 1e-10 * max(1.0, abs(out.G) ** 2)


@given(complexes, phases)
def test_identity_stage_is_neutral(g, theta):
    s = gain_from(g)
    out = compose_two_stage(ComplexGain.identity(), s, 0.0)
    assert abs(out.G - s.G) < 1e-14 and abs(out.g - s.g) < 1e-14


@given(complexes, st.floats(-4, 4, allow_nan=False), st.floats(0, 3, allow_nan=False))
def test_continuous_gain_invariant(zeta, eta, x):
    out = continuous_gain(ContinuousGainParams(zeta, eta, x))
    assert abs(abs(out.G) ** 2 - abs(out.g) ** 2 - 1) <= 1e-10 * max(1.0, abs(out.G) ** 2)


@given(complexes, st.floats(-4, 4, allow_nan=False), st.floats(0, 2, allow_nan=False),
       st.floats(0, 2, allow_nan=False))
def test_continuous_gain_composes_over_length(zeta, eta, x1, x2):
    # a uniform medium split in two is the two-stage composition with no extra phase
    a = continuous_gain(ContinuousGainParams(zeta, eta, x1))
    b = continuous_gain(ContinuousGainParams(zeta, eta, x2))
    whole = continuous_gain(ContinuousGainParams(zeta, eta, x1 + x2))
    G = a.G * b.G + np.conj(a.g) * b.g
    g = np.conj(a.G) * b.g + a.g * b.G
    scale = max(1.0, abs(whole.G))
    assert abs(G - whole.G) <= 1e-9 * scale and abs(g - whole.g) <= 1e-9 * scale


coefficients = st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=8)


@given(coefficients, st.floats(0, 30))
def test_mode_number_bounds(raw, G):
    r = np.array(raw) / np.linalg.norm(raw)
    M = mode_number(r, G)
    assert 1 - 1e-12 <= M <= len(r) + 1e-9
    assert 1 < g2_from_M(M) <= 2 + 1e-12


@given(coefficients, st.floats(0.01, 30))
def test_mode_number_permutation_invariant(raw, G):
    r = np.array(raw) / np.linalg.norm(raw)
    assert math.isclose(mode_number(r, G), mode_number(r[::-1], G), rel_tol=1e-12)


@given(st.floats(-1e300, 1e300))
def test_float_text_round_trip(x):
    assert float(fmt(x)) == x


GRID = make_grid(-8.0, 8.0, 81)
FAMILIES = [hermite_gauss(GRID, 5, s, c, p) for s, c, p in ((1.0, 0, 0.3), (1.2, 0.4, -0.1),
                                                           (0.9, -0.2, 0.2), (1.1, 0.1, 0.5))]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=5, unique=True), st.floats(0.5, 6.0))
def test_decomposition_recovers_synthetic_structure(raw, G):
    raw = sorted(raw, reverse=True)
    if len(raw) > 1 and min(-np.diff(raw)) < 1e-3:
        return
    r = np.array(raw) / np.linalg.norm(raw)
    n = len(r)
    pa, pb, fa, fb = (f[:n] for f in FAMILIES)
    m = extract_mode_structure(synthesize_state(r, G, pa, pb, fa, fb, GRID))
    assert m.n_modes_kept == n
    assert abs(m.G - G) < 1e-8
    assert np.abs(m.r - r).max() < 1e-8
    I = np.sinh(r * G) ** 2
    assert math.isclose(mode_number(m.r, m.G), I.sum() ** 2 / (I ** 2).sum(), rel_tol=1e-9)
