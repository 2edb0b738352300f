import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speclab import blockops, fourier_pde, pseudo
from speclab.errors import ValidationError
from speclab.pseudo import GridSpec


# ---- grid --------------------------------------------------------------------------

def test_grid_parse_and_geometry():
    g = GridSpec.parse("-1, 1, 0, 2, 5, 3")
    assert (g.nx, g.ny) == (5, 3)
    assert g.hx == 0.5 and g.hy == 1.0
    assert g.cell == pytest.approx(np.hypot(0.5, 1.0))
    assert g.nodes().shape == (3, 5)
    assert g.nodes()[2, 0] == complex(-1, 2)


@pytest.mark.parametrize("text", ["1,2,3", "0,0,0,1,3,3", "0,1,0,1,1,5", "a,1,0,1,3,3"])
def test_grid_parse_rejects(text):
    with pytest.raises(ValidationError):
        GridSpec.parse(text)


# ---- field -------------------------------------------------------------------------

def test_field_scalar_single_offset_node():
    g = GridSpec(1, 2, 0, 1, 2, 2)
    f = pseudo.field([[0]], g)
    assert f.values[0, 0] == pytest.approx(1.0)


def test_field_selfadjoint_values():
    g = GridSpec(-1, 6, -2, 2, 15, 9)
    f = pseudo.field(np.diag([1.0, 4.0]), g)
    z = g.nodes()
    with np.errstate(divide="ignore"):
        expect = 1 / np.minimum(abs(z - 1), abs(z - 4))
    assert np.allclose(f.values, expect, rtol=1e-12)


def test_field_delay_truncation_at_5i():
    A = blockops.assemble(blockops.delay_spec(), 2)
    g = GridSpec(-0.5, 0.5, 4.5, 5.5, 3, 3)
    f = pseudo.field(A, g)
    assert f.values[1, 1] <= 1 + 1e-8


def test_field_threads_agree(rng):
    M = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
    g = GridSpec(-3, 3, -3, 3, 21, 17)
    a = pseudo.field(M, g, threads=1).values
    b = pseudo.field(M, g, threads=4).values
    assert np.array_equal(a, b)


def test_field_permutation_invariance(rng):
    M = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
    P = np.eye(30)[rng.permutation(30)]
    g = GridSpec(-4, 4, -4, 4, 13, 13)
    a = pseudo.field(M, g).values
    b = pseudo.field(P @ M @ P.T, g).values
    assert np.allclose(a, b, rtol=1e-10)


def test_field_records_metadata():
    f = pseudo.field(np.diag([1.0]), GridSpec(0, 2, -1, 1, 5, 5))
    assert f.matrix_dim == 1
    assert f.meta


def test_field_rejects_bad_values():
    with pytest.raises(ValidationError):
        pseudo.PseudospectrumField(GridSpec(0, 1, 0, 1, 2, 2), np.full((2, 2), np.nan), 1)
    with pytest.raises(ValidationError):
        pseudo.PseudospectrumField(GridSpec(0, 1, 0, 1, 2, 2), np.zeros((3, 2)), 1)


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("SPECLAB_THREADS", "3")
    assert pseudo.default_threads() == 3


# ---- membership ----------------------------------------------------------------------

def test_membership_scalar():
    assert pseudo.membership([[0]], 0.5, 1.0) is True
    assert pseudo.membership([[0]], 2.0, 1.0) is False


def test_membership_is_strict():
    # resnorm exactly 1/eps lies on the boundary of the open set
    assert pseudo.membership([[0]], 1.0, 1.0) is False


def test_membership_first_derivative():
    for n in (10, 50, 100):
        M = fourier_pde.first_derivative_matrix(n)
        assert pseudo.membership(M, 1.0, 0.5) is False
        assert pseudo.membership(M, 0.1j, 0.5) is True


def test_membership_rejects_nonpositive_eps():
    with pytest.raises(ValidationError):
        pseudo.membership([[0]], 1.0, 0.0)


# ---- sublevel sets --------------------------------------------------------------------

def _const_field(v=0.1):
    g = GridSpec(-1, 1, -1, 1, 5, 5)
    return pseudo.PseudospectrumField(g, np.full((5, 5), v), 1)


def test_sublevel_constant_below_threshold():
    assert pseudo.sublevel_points(_const_field(), 1.0).size == 0


def test_sublevel_disc():
    g = GridSpec(-2, 2, -2, 2, 41, 41)
    f = pseudo.field([[0]], g)
    pts = pseudo.sublevel_points(f, 1.0)
    nodes = g.nodes().ravel()
    assert set(pts.tolist()) == set(nodes[abs(nodes) < 1].tolist())


def test_sublevel_selfadjoint_neighbourhood():
    g = GridSpec(-1, 6, -2, 2, 71, 41)
    f = pseudo.field(np.diag([1.0, 4.0]), g)
    pts = set(pseudo.sublevel_points(f, 0.5).tolist())
    nodes = g.nodes().ravel()
    d = np.minimum(abs(nodes - 1), abs(nodes - 4))
    exact = set(nodes[d < 0.5].tolist())
    diff = np.array(list(pts ^ exact))
    if diff.size:
        dd = np.minimum(abs(diff - 1), abs(diff - 4))
        assert np.all(abs(dd - 0.5) <= g.cell)


def test_infinite_values_are_above_every_threshold():
    g = GridSpec(-1, 1, -1, 1, 3, 3)
    vals = np.zeros((3, 3))
    vals[1, 1] = np.inf
    f = pseudo.PseudospectrumField(g, vals, 1)
    assert pseudo.sublevel_points(f, 1e-300).tolist() == [0j]


def _random_field(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    g = GridSpec(-4, 4, -4, 4, 25, 25)
    return M, g, pseudo.field(M, g)


@given(st.integers(0, 10_000), st.floats(0.05, 3.0), st.floats(0.05, 1.0))
def test_nesting(seed, eps, frac):
    _, _, f = _random_field(seed % 7)
    small = set(pseudo.sublevel_points(f, eps * frac).tolist())
    big = set(pseudo.sublevel_points(f, eps).tolist())
    assert small <= big


@given(st.integers(0, 6), st.floats(0.3, 2.0))
def test_eps_neighbourhood_inclusion(seed, eps):
    M, g, f = _random_field(seed)
    ev = np.linalg.eigvals(M)
    nodes = g.nodes().ravel()
    d = np.min(abs(nodes[:, None] - ev[None, :]), axis=1)
    inside = set(nodes[d < eps - g.cell].tolist())
    assert inside <= set(pseudo.sublevel_points(f, eps).tolist())


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(0.2, 1.5))
def test_selfadjoint_equality_property(d, eps):
    g = GridSpec(-4, 4, -2, 2, 33, 17)
    f = pseudo.field(np.diag(d), g)
    nodes = g.nodes().ravel()
    dist = np.min(abs(nodes[:, None] - np.array(d)[None, :]), axis=1)
    got = pseudo.sublevel_mask(f, eps).ravel()
    exact = dist < eps
    assert np.all(abs(dist[got != exact] - eps) <= g.cell)


# ---- certified masks ---------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_certified_masks_equal_full_threshold(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40))
    g = GridSpec(-8, 8, -8, 8, 81, 81)
    levels = [2.0, 1.0, 0.25]
    f = pseudo.field(M, g)
    masks = pseudo.certified_sublevel_masks(M, g, levels)
    for e in levels:
        assert np.array_equal(masks[e], pseudo.sublevel_mask(f, e))
    assert 0 < masks.evaluated < g.nx * g.ny


def test_certified_masks_pde_truncation():
    p, b = fourier_pde.example_symbol(), fourier_pde.gauss_sine()
    M = fourier_pde.assemble_truncation(p, b, 30)
    g = GridSpec(-5, 10, -7, 7, 61, 57)
    f = pseudo.field(M, g)
    masks = pseudo.certified_sublevel_masks(M, g, [1.0, 2.0])
    for e in (1.0, 2.0):
        assert np.array_equal(masks[e], pseudo.sublevel_mask(f, e))


# ---- contours ------------------------------------------------------------------------

def test_contours_constant_field_empty():
    (cs,) = pseudo.contours(_const_field(0.1), [1.0])
    assert cs.eps == 1.0 and cs.polylines == []


def test_contour_unit_circle():
    g = GridSpec(-2, 2, -2, 2, 81, 81)
    (cs,) = pseudo.contours(pseudo.field([[0]], g), [1.0])
    assert len(cs.polylines) == 1
    line = cs.polylines[0]
    assert abs(line[0] - line[-1]) < 1e-12
    assert np.max(abs(abs(line) - 1)) <= 2 * g.cell


def test_contours_nested():
    g = GridSpec(-2, 2, -2, 2, 81, 81)
    c1, c05 = pseudo.contours(pseudo.field([[0]], g), [1.0, 0.5])
    r1 = np.max(abs(c1.polylines[0]))
    r05 = np.max(abs(c05.polylines[0]))
    assert r05 < r1
    from matplotlib.path import Path
    outer = Path(np.c_[c1.polylines[0].real, c1.polylines[0].imag])
    assert outer.contains_points(np.c_[c05.polylines[0].real, c05.polylines[0].imag]).all()


def test_contours_reject_increasing_levels():
    with pytest.raises(ValidationError):
        pseudo.contours(_const_field(), [0.5, 1.0])
