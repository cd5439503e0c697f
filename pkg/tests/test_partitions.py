import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitflow import partitions as pa
from splitflow import potentials as pt
from splitflow.errors import InputError


def curve_from_cells(grid, cell_vals, kind="piecewise-constant", v0=None):
    cell_vals = np.asarray(cell_vals, dtype=float)
    if cell_vals.ndim == 1:
        cell_vals = cell_vals[:, None]
    v0 = cell_vals[:1] if v0 is None else np.atleast_2d(v0)
    return pa.SampledCurve(grid, np.vstack([v0, cell_vals]), kind)


# ---------------------------------------------------------------------------
# build_partition
# ---------------------------------------------------------------------------


def test_uniform_partition_nodes_and_midpoints():
    P = pa.build_partition(1.0, N=2)
    np.testing.assert_allclose(P.nodes, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(P.midpoints, [0.25, 0.75])


def test_explicit_partition_steps():
    P = pa.build_partition(1.0, nodes=[0.0, 0.3, 1.0])
    np.testing.assert_allclose(P.taus, [0.3, 0.7])
    assert P.max_step == pytest.approx(0.7)


def test_single_step_semi_intervals():
    P = pa.build_partition(1.0, N=1)
    assert P.in_left_semi(0.25)
    assert P.in_left_semi(0.5)
    assert not P.in_left_semi(0.75)


def test_non_monotone_nodes_rejected():
    with pytest.raises(InputError):
        pa.build_partition(1.0, nodes=[0.0, 0.6, 0.5, 1.0])


# ---------------------------------------------------------------------------
# chi
# ---------------------------------------------------------------------------


def test_chi_values():
    P = pa.build_partition(1.0, N=1)
    assert pa.chi(P, 0.25) == 1
    assert pa.chi(P, 0.75) == 0
    assert pa.chi(P, 0.5) == 1  # left semi-intervals are right-closed


def test_chi_outside_domain():
    P = pa.build_partition(1.0, N=1)
    with pytest.raises(InputError):
        pa.chi(P, -0.1)
    with pytest.raises(InputError):
        pa.chi(P, 1.5)


# ---------------------------------------------------------------------------
# repetition operators
# ---------------------------------------------------------------------------


def test_repetition_single_cell_copies():
    P = pa.build_partition(1.0, N=1)
    grid = P.refine(2)
    # two cells per semi-interval: values (L, L, R, R)
    g = curve_from_cells(grid, [3.0, 3.0, 7.0, 7.0])
    t1 = pa.repetition_apply(1, P, g)
    np.testing.assert_allclose(t1.cell_values.ravel(), [3.0, 3.0, 3.0, 3.0])
    t2 = pa.repetition_apply(2, P, g)
    np.testing.assert_allclose(t2.cell_values.ravel(), [7.0, 7.0, 7.0, 7.0])


def test_repetition_average_single_cell():
    P = pa.build_partition(1.0, N=1)
    grid = P.refine(2)
    g = curve_from_cells(grid, [3.0, 3.0, 7.0, 7.0])
    t1 = pa.repetition_apply(1, P, g)
    t2 = pa.repetition_apply(2, P, g)
    avg = 0.5 * (t1.cell_values + t2.cell_values)
    np.testing.assert_allclose(avg.ravel(), [5.0, 5.0, 5.0, 5.0])


@settings(max_examples=60, deadline=None)
@given(
    vals=st.lists(st.floats(-10, 10), min_size=8, max_size=8),
    n_steps=st.sampled_from([1, 2]),
)
def test_repetition_operator_norm_bound(vals, n_steps):
    P = pa.build_partition(1.0, N=n_steps)
    M = 4 // n_steps
    grid = P.refine(max(M, 2))
    cells = np.resize(np.asarray(vals), grid.n_cells)
    g = curve_from_cells(grid, cells)
    for j in (1, 2):
        tg = pa.repetition_apply(j, P, g)
        assert tg.l1_norm() <= 2.0 * g.l1_norm() + 1e-12


def test_repetition_converges_for_continuous_function():
    errs = []
    for N in (4, 8, 16, 32, 64):
        P = pa.build_partition(1.0, N=N)
        grid = P.refine(2)
        cells = np.sin(2 * np.pi * grid.cell_midpoints())
        g = curve_from_cells(grid, cells)
        tg = pa.repetition_apply(1, P, g)
        diff = curve_from_cells(grid, tg.cell_values - g.cell_values)
        errs.append(diff.l1_norm())
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] < 0.1 * errs[0]


def test_repetition_idempotent_on_semi_constant_curves():
    P = pa.build_partition(1.0, N=3)
    grid = P.refine(4)
    rng = np.random.default_rng(1)
    per_semi = rng.standard_normal(2 * P.N)
    cells = np.repeat(per_semi, grid.M)
    g = curve_from_cells(grid, cells)
    for j in (1, 2):
        once = pa.repetition_apply(j, P, g)
        twice = pa.repetition_apply(j, P, once)
        np.testing.assert_array_equal(once.cell_values, twice.cell_values)


def test_repetition_identity_rate_rewriting():
    # int chi^j R~_j(V) == int R_j(T^j V / 2) exactly under the shared grid
    rng = np.random.default_rng(6)
    P = pa.build_partition(1.0, nodes=[0.0, 0.4, 1.0])
    grid = P.refine(4)
    for R in (
        pt.QuadraticForm(np.array([[2.0, 0.2], [0.2, 1.0]])),
        pt.PowerNorm(3.0, [1.0, 0.5]),
        pt.OneHomPlusQuad(0.7, 1.3, dim=2),
    ):
        Rt = pt.Rescaled(R)
        V = curve_from_cells(grid, rng.standard_normal((grid.n_cells, 2)))
        for j in (1, 2):
            mask = grid.cell_is_left if j == 1 else ~grid.cell_is_left
            lhs = sum(
                w * Rt(v)
                for w, v, m in zip(grid.cell_widths, V.cell_values, mask)
                if m
            )
            TV = pa.repetition_apply(j, P, V)
            rhs = sum(
                w * R(0.5 * v) for w, v in zip(grid.cell_widths, TV.cell_values)
            )
            assert lhs == pytest.approx(rhs, rel=1e-14, abs=1e-14)


def test_repetition_even_inner_factor_required():
    P = pa.build_partition(1.0, N=1)
    with pytest.raises(InputError):
        P.refine(3)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def test_integrate_constant_curve():
    P = pa.build_partition(1.0, N=2)
    grid = P.refine(2)
    g = curve_from_cells(grid, np.full(grid.n_cells, 2.0))
    assert pa.integrate(g, lambda v: float(v[0])) == pytest.approx(2.0)


def test_integrate_square_of_linear_curve():
    P = pa.build_partition(1.0, N=512)
    grid = P.refine(2)  # 2048 cells
    vals = grid.times.copy()  # v(t) = t sampled at nodes
    g = pa.SampledCurve(grid, vals, "piecewise-linear")
    got = pa.integrate(g, lambda v: float(v[0]) ** 2)
    assert got == pytest.approx(1.0 / 3.0, abs=1e-5)


def test_integrate_empty_interval():
    P = pa.build_partition(1.0, N=2)
    grid = P.refine(2)
    g = curve_from_cells(grid, np.ones(grid.n_cells))
    assert pa.integrate(g, lambda v: 1.0, (0.3, 0.3)) == 0.0


def test_integrate_partial_cells_split_exactly():
    P = pa.build_partition(1.0, N=1)
    grid = P.refine(2)
    g = curve_from_cells(grid, [1.0, 2.0, 3.0, 4.0])
    # [0.1, 0.3] covers 0.15 of cell 1 (value 1) and 0.05 of cell 2 (value 2)
    got = pa.integrate(g, lambda v: float(v[0]), (0.1, 0.3))
    assert got == pytest.approx(0.15 * 1.0 + 0.05 * 2.0)


def test_integrate_reversed_interval_rejected():
    P = pa.build_partition(1.0, N=1)
    grid = P.refine(2)
    g = curve_from_cells(grid, np.ones(grid.n_cells))
    with pytest.raises(InputError):
        pa.integrate(g, lambda v: 1.0, (0.5, 0.2))


# ---------------------------------------------------------------------------
# curve evaluation and serialization
# ---------------------------------------------------------------------------


def test_piecewise_linear_is_continuous():
    P = pa.build_partition(1.0, N=2)
    grid = P.refine(2)
    rng = np.random.default_rng(3)
    g = pa.SampledCurve(grid, rng.standard_normal((grid.n_nodes, 2)))
    for i, t in enumerate(grid.times):
        np.testing.assert_allclose(g.at(t), g.values[i], atol=1e-14)


def test_pwc_evaluation_left_open_right_closed():
    P = pa.build_partition(1.0, N=1)
    grid = P.refine(2)
    g = curve_from_cells(grid, [1.0, 2.0, 3.0, 4.0], v0=[0.5])
    assert g.at(0.0)[0] == 0.5
    assert g.at(0.25)[0] == 1.0  # node value carries its cell (0, 0.25]
    assert g.at(0.26)[0] == 2.0


def test_csv_round_trip(tmp_path):
    P = pa.build_partition(1.0, N=2)
    grid = P.refine(2)
    rng = np.random.default_rng(4)
    g = pa.SampledCurve(grid, rng.standard_normal((grid.n_nodes, 3)))
    path = tmp_path / "curve.csv"
    g.to_csv(path)
    text = path.read_text()
    assert text.startswith("# interpolant_kind: piecewise-linear")
    assert text.splitlines()[1] == "t,v_1,v_2,v_3"
    back = pa.SampledCurve.from_csv(path, grid)
    np.testing.assert_array_equal(back.values, g.values)
    assert back.kind == g.kind
