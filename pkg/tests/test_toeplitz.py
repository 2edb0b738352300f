import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speclab import numlin, toeplitz
from speclab.errors import OnCurveError, ValidationError
from speclab.pseudo import GridSpec
from speclab.toeplitz import PerturbationSpec, ToeplitzSymbol

import oracles

FISH = toeplitz.fish_symbol()
CIRCLE = ToeplitzSymbol({1: 1})


@pytest.fixture(scope="module")
def fish_components():
    curve = toeplitz.symbol_curve(FISH, 1024)
    return toeplitz.component_probe(curve, GridSpec(-30, 32, -25, 25, 249, 201))


# ---- symbols and sections ------------------------------------------------------------

def test_fish_section_entries():
    T = toeplitz.finite_section(FISH, 4)
    assert T[2, 0] == 15  # (3,1) = a_2
    assert T[0, 3] == -7  # (1,4) = a_{-3}
    assert T[0, 0] == 0


def test_identity_section():
    assert np.array_equal(toeplitz.finite_section(ToeplitzSymbol({0: 1}), 5), np.eye(5))


def test_shift_section():
    assert np.array_equal(toeplitz.finite_section(CIRCLE, 3), np.eye(3, k=-1))


def test_section_rejects_bad_size():
    with pytest.raises(ValidationError):
        toeplitz.finite_section(FISH, 0)


def test_symbol_json_round_trip():
    s = ToeplitzSymbol.from_json(FISH.to_json())
    assert s == FISH
    assert ToeplitzSymbol.from_json('{"coeffs": {"-3": [-7, 0], "2": 15}}').coeffs == {-3: -7, 2: 15}


@pytest.mark.parametrize("bad", [{}, {"coeffs": {"x": 1}}, {"coeffs": {"1": [1, 2, 3]}}])
def test_symbol_json_rejects(bad):
    with pytest.raises(ValidationError):
        ToeplitzSymbol.from_json(bad)


# ---- perturbations -----------------------------------------------------------------

def test_bump_on_n10():
    T = toeplitz.finite_section(FISH, 10)
    d = toeplitz.apply_perturbation(T, toeplitz.diagonal_bump()) - T
    assert np.array_equal(d, 20 * np.eye(10))


def test_empty_perturbation():
    T = toeplitz.finite_section(FISH, 6)
    assert np.array_equal(toeplitz.apply_perturbation(T, PerturbationSpec()), T)


def test_bump_dropped_outside_n5():
    T = toeplitz.finite_section(FISH, 5)
    d = toeplitz.apply_perturbation(T, toeplitz.diagonal_bump()) - T
    assert np.array_equal(d, 20 * np.eye(5))


def test_perturbation_json():
    S = PerturbationSpec.from_json({"diagonal": {"count": 10, "value": 20}})
    assert S == toeplitz.diagonal_bump()
    S2 = PerturbationSpec.from_json(S.to_json())
    assert S2 == S
    assert PerturbationSpec.from_json({"entries": [[1, 2, [0, 1]]]}).entries == {(1, 2): 1j}


def test_perturbation_rejects_zero_index():
    with pytest.raises(ValidationError):
        PerturbationSpec({(0, 1): 1})


# ---- curves and winding ---------------------------------------------------------------

def test_circle_curve():
    c = toeplitz.symbol_curve(CIRCLE, 128)
    assert np.allclose(abs(c.samples), 1)


def test_fish_value_at_one():
    assert FISH(1.0) == 20


def test_constant_curve():
    c = toeplitz.symbol_curve(ToeplitzSymbol({0: 2 + 1j}), 64)
    assert np.all(c.samples == 2 + 1j)


def test_curve_needs_samples():
    with pytest.raises(ValidationError):
        toeplitz.symbol_curve(FISH, 10)


def test_circle_winding():
    c = toeplitz.symbol_curve(CIRCLE)
    assert toeplitz.winding_number(c, 0) == 1
    assert toeplitz.winding_number(c, 3) == 0


def test_reverse_negates(fish_components):
    c = toeplitz.symbol_curve(FISH)
    for lam in [0, -11.5, 23, 13.5]:
        assert toeplitz.winding_number(c.reversed(), lam) == -toeplitz.winding_number(c, lam)


def test_on_curve_raises():
    c = toeplitz.symbol_curve(FISH)
    with pytest.raises(OnCurveError) as info:
        toeplitz.winding_number(c, 20)
    assert info.value.distance <= info.value.tolerance


def test_classify():
    assert toeplitz.spectrum_classify(CIRCLE, 0) == toeplitz.SpectrumClass("InteriorSpectrum", 1)
    assert toeplitz.spectrum_classify(CIRCLE, 2).kind == "Resolvent"
    assert toeplitz.spectrum_classify(FISH, 20).kind == "OnCurve"


def _random_points(seed, k=100):
    rng = np.random.default_rng(seed)
    return rng.uniform(-28, 30, k) + 1j * rng.uniform(-22, 22, k)


def test_winding_matches_brute_force_oracle():
    c = toeplitz.symbol_curve(FISH, 1024)
    pts = _random_points(7)
    pts = pts[c.distance(pts)[0] > 0.2]
    for z in pts:
        assert toeplitz.winding_number(c, z) == oracles.winding_brute(FISH, z, 10 * 1024)


def test_winding_resampling_invariance():
    c1 = toeplitz.symbol_curve(FISH, 256)
    c4 = toeplitz.symbol_curve(FISH, 1024)
    for z in _random_points(3, 60):
        d, seg = c1.distance([z])
        if d[0] > 10 * seg[0]:
            assert toeplitz.winding_number(c1, z) == toeplitz.winding_number(c4, z)


@given(st.complex_numbers(min_magnitude=0.5, max_magnitude=3, allow_nan=False,
                          allow_infinity=False),
       st.floats(-25, 25), st.floats(-20, 20))
def test_scaling_maps_winding(c, x, y):
    lam = complex(x, y)
    base = toeplitz.symbol_curve(FISH, 1024)
    d, seg = base.distance([lam])
    if d[0] <= 10 * seg[0]:
        return
    scaled = toeplitz.symbol_curve(FISH.scaled(c), 1024)
    assert np.allclose(scaled.samples, c * base.samples)
    assert toeplitz.winding_number(scaled, c * lam) == toeplitz.winding_number(base, lam)


# ---- components --------------------------------------------------------------------

def test_components_circle():
    comps = toeplitz.component_probe(toeplitz.symbol_curve(CIRCLE), GridSpec(-2, 2, -2, 2, 81, 81))
    assert sorted((c.winding, c.bounded) for c in comps.components) == [(0, False), (1, True)]


def test_components_constant_symbol():
    comps = toeplitz.component_probe(toeplitz.symbol_curve(ToeplitzSymbol({0: 1})),
                                     GridSpec(-2, 2, -2, 2, 41, 41))
    assert [(c.winding, c.bounded) for c in comps.components] == [(0, False)]


def test_components_fish(fish_components):
    ws = [c.winding for c in fish_components.components]
    assert {0, 1, 2, -1} <= set(ws)
    zero = [c for c in fish_components.components if c.winding == 0]
    assert sorted(c.bounded for c in zero) == [False, True]
    by = fish_components.by_winding()
    for w, reps in by.items():
        for z in reps:
            assert toeplitz.winding_number(toeplitz.symbol_curve(FISH), z) == w


def test_components_need_covering_grid():
    with pytest.raises(ValidationError):
        toeplitz.component_probe(toeplitz.symbol_curve(FISH), GridSpec(-5, 5, -5, 5, 21, 21))


# ---- spectra of sections -------------------------------------------------------------

def test_no_pollution_surrogate():
    curve = toeplitz.symbol_curve(FISH, 2048)
    e100 = numlin.eigenvalues(toeplitz.finite_section(FISH, 100))
    e200 = numlin.eigenvalues(toeplitz.finite_section(FISH, 200))
    for z in e200:
        if curve.distance([z])[0][0] <= 0.3:
            continue
        if toeplitz._raw_winding(curve.samples, np.array([z]))[0] != 0:
            continue
        assert np.min(abs(e100 - z)) <= 0.15


def test_perturbation_certificate_genuine_point():
    # a stable cluster of the perturbed sections in the unbounded winding-0 region
    z = 36.12277416136908
    assert toeplitz.perturbation_certificate(FISH, toeplitz.diagonal_bump(), z, 200) < 1e-6


def test_perturbation_certificate_resolvent_point():
    assert toeplitz.perturbation_certificate(FISH, toeplitz.diagonal_bump(), 13.5, 200) > 1e-3
