import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speclab import fourier_pde as fp
from speclab import numlin, pseudo
from speclab.errors import ValidationError
from speclab.fourier_pde import PotentialSpec, SymbolPolynomial
from speclab.pseudo import GridSpec

import oracles

P = fp.example_symbol()
B = fp.gauss_sine()
BOX = GridSpec(-5, 10, -7, 7, 201, 201)


@pytest.fixture(scope="module")
def eig100():
    return numlin.eigenvalues(fp.assemble_truncation(P, B, 100))


# ---- symbol ------------------------------------------------------------------------

def test_symbol_at_zero():
    assert fp.symbol_eval(P, 0) == 0


def test_symbol_at_one():
    assert fp.symbol_eval(P, 1) == 1 - 2j


@given(st.floats(-50, 50))
def test_symbol_real_part_even(z):
    assert fp.symbol_eval(P, -z).real == pytest.approx(fp.symbol_eval(P, z).real, rel=1e-15)


def test_symbol_from_derivative_coeffs():
    # -d^2/dx^2 - 2 d/dx
    assert fp.SymbolPolynomial.from_derivative_coeffs({2: -1, 1: -2}) == P


def test_symbol_json_round_trip():
    assert SymbolPolynomial.from_json(P.to_json()) == P


@pytest.mark.parametrize("coeffs", [{0: 1}, {-1: 1}, {2: np.inf}, {}])
def test_symbol_rejects(coeffs):
    with pytest.raises(ValidationError):
        SymbolPolynomial(coeffs)


def test_lattice_identity_symbol():
    got = fp.truncated_symbol_spectrum(SymbolPolynomial({1: 1}), 2, 2)
    assert np.allclose(got, [-np.pi, -np.pi / 2, 0, np.pi / 2, np.pi])


def test_lattice_example_n1():
    got = fp.truncated_symbol_spectrum(P, 1)
    assert np.min(abs(got - (np.pi ** 2 - 2j * np.pi))) < 1e-14
    assert 0 in got


def test_lattice_rejects_small_cutoff():
    with pytest.raises(ValidationError):
        fp.truncated_symbol_spectrum(P, 5, 3)


# ---- potential coefficients ---------------------------------------------------------

def test_beta_zero_for_odd_potential():
    assert abs(fp.potential_coeffs(B, 100, 0)[0]) < 1e-12


def test_beta_reality_symmetry():
    beta = fp.potential_coeffs(B, 100, 60)
    for m in range(1, 61):
        assert abs(beta[-m] - np.conj(beta[m])) < 1e-12


def test_beta_frozen_value():
    beta = fp.potential_coeffs(B, 100, 100)
    assert abs(beta[100] - (-0.02693988042225979j)) < 1e-14


@pytest.mark.parametrize("m", [1, 17, 37, 100, 150])
def test_beta_matches_quadrature_oracle(m):
    beta = fp.potential_coeffs(B, 100, m)[m]
    assert abs(beta - oracles.quad_beta(B.evaluator, m, 100)) < 1e-13


def test_beta_matches_closed_form():
    beta = fp.potential_coeffs(B, 100, 200)
    m = np.arange(-200, 201)
    exact = oracles.gauss_sine_beta(m, 100)
    assert np.max(abs(np.array([beta[k] for k in m]) - exact)) < 1e-15


def test_parseval_monotone_and_bounded():
    n = 20
    beta = fp.potential_coeffs(B, n, 120)
    # (1/2n) int 400 sin^2(x) exp(-2x^2) dx
    total = 200 * np.sqrt(np.pi / 2) * (1 - np.exp(-0.5)) / (2 * n)
    partial = [sum(abs(beta[k]) ** 2 for k in range(-M, M + 1)) for M in range(0, 121, 10)]
    assert all(b >= a for a, b in zip(partial, partial[1:]))
    assert partial[-1] <= total * (1 + 1e-12)
    assert partial[-1] == pytest.approx(total, rel=1e-10)


def test_tabulated_potential_close_to_analytic():
    x = np.linspace(-8, 8, 1601)
    tab = fp.tabulated_potential(x, B.evaluator(x))
    a = fp.potential_coeffs(tab, 20, 10)
    e = fp.potential_coeffs(B, 20, 10)
    assert max(abs(a[k] - e[k]) for k in a) < 1e-4


def test_tabulated_spacing_limit():
    with pytest.raises(ValidationError):
        fp.tabulated_potential(np.linspace(-1, 1, 11), np.zeros(11))


def test_operator_json():
    p, b = fp.operator_from_json({"symbol": P.to_json(), "potential": {"builtin": "gauss-sine"}})
    assert p == P and b.params.get("builtin") == "gauss-sine"
    with pytest.raises(ValidationError):
        fp.operator_from_json({"potential": None})


# ---- assembly ------------------------------------------------------------------------

def test_zero_potential_is_lattice():
    A = fp.assemble_truncation(P, fp.zero_potential(), 15)
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0
    ev = numlin.eigenvalues(A)
    assert numlin.multiset_deviation(ev, fp.truncated_symbol_spectrum(P, 15)) < 1e-10


def test_dimension_is_2n_plus_1():
    assert fp.assemble_truncation(P, B, 7).shape == (15, 15)
    assert fp.assemble_truncation(P, B, 7, cutoff=12).shape == (25, 25)


def test_diagonal_is_symbol_lattice():
    A = fp.assemble_truncation(P, B, 40)
    z = np.arange(-40, 41)
    assert np.allclose(np.diag(A), P(np.pi * z / 40), rtol=0, atol=1e-12)


def test_assembler_rejects_derivative_potential():
    b = PotentialSpec(B.evaluator, B.decay_radius, order=1)
    with pytest.raises(ValidationError):
        fp.assemble_truncation(P, b, 10)


def test_discrete_eigenvalue_n100(eig100):
    cands = fp.discrete_candidates(P, eig100, BOX)
    assert cands.size == 1
    assert cands[0] == pytest.approx(-3.1718515912337075, abs=1e-9)


def test_discrete_eigenvalue_converges(eig100):
    e200 = numlin.eigenvalues(fp.assemble_truncation(P, B, 200))
    c100 = fp.discrete_candidates(P, eig100, BOX)
    c200 = fp.discrete_candidates(P, e200, BOX)
    from speclab.study import hausdorff
    assert hausdorff(c100, c200) <= 0.02


def test_finer_fourier_cutoff_reaches_oracle():
    # the domain is wide enough at n = 100; the plain cutoff is what limits accuracy
    ev = numlin.eigenvalues(fp.assemble_truncation(P, B, 100, cutoff=300))
    (c,) = fp.discrete_candidates(P, ev, BOX)
    assert abs(c - oracles.pde_selfadjoint_eigenvalue()) < 1e-4


# ---- essential curve -----------------------------------------------------------------

def test_curve_pure_square():
    c = fp.essential_curve(SymbolPolynomial({2: 1}), 3.0, 101)
    assert np.all(c.imag == 0) and np.all(c.real >= 0)
    assert c.real.max() == pytest.approx(9.0)


def test_curve_parabola():
    c = fp.essential_curve(P, 10.0, 501)
    assert np.allclose(c.real, c.imag ** 2 / 4, rtol=1e-13, atol=1e-13)


def test_curve_of_order_zero_is_point():
    # a constant symbol has no order >= 1; its curve is the single value
    with pytest.raises(ValidationError):
        SymbolPolynomial({0: 3})
    c = fp.essential_curve(SymbolPolynomial({0: 3, 1: 1e-300}), 1.0, 64)
    assert np.allclose(c, 3)


def test_covering_range_leaves_box():
    R = fp.covering_range(P, BOX)
    ends = [P(R), P(-R)]
    assert all(not BOX.contains(z) for z in ends)


# ---- first-derivative counterexample ------------------------------------------------

DEMO_GRID = GridSpec(-2, 2, -3, 3, 81, 121)


@pytest.mark.parametrize("n", [10, 50, 100])
def test_derivative_demo(n):
    fld, rep = fp.first_derivative_demo(n, DEMO_GRID, 0.5)
    assert rep.probe_member is False
    assert rep.probe_distance >= 0.5 - DEMO_GRID.cell
    assert rep.strip_bound_holds
    mask = pseudo.sublevel_mask(fld, 0.5)
    # nodes lying on the threshold up to linspace rounding may fall either way
    clear = abs(fld.values - 2.0) > 1e-9
    clear &= clear[::-1, :]
    assert np.array_equal(mask[clear], mask[::-1, :][clear])


def test_derivative_demo_near_axis_member():
    _, rep = fp.first_derivative_demo(10, DEMO_GRID, 0.5, probe=0.1j)
    assert rep.probe_member is True


def test_derivative_matrix_spectrum():
    M = fp.first_derivative_matrix(4)
    assert np.allclose(np.diag(M), 2j * np.pi * np.arange(-4, 5) / 4)
