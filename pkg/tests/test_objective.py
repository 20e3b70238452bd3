import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from waveinv.adjoint import CutoffSpec, cutoff
from waveinv.errors import HistoryMismatch, TraceMismatch
from waveinv.fields import BoundaryTrace, CoefficientField, WaveHistory
from waveinv.geometry import BoxDomain, build_grid
from waveinv.objective import (
    GammaRule,
    GradientField,
    TikhonovSpec,
    functional,
    gradient,
    misfit,
    postprocess,
    project,
    error_bound,
    error_bound_from_gradient,
)


def spec_for(grid, gamma=0.0, window=None):
    return TikhonovSpec(gamma, CoefficientField.uniform(grid), CutoffSpec(window) if window else None)


def test_exact_fit_is_zero(cube, rng):
    tr = BoundaryTrace(rng.normal(size=(11, 121)), 0.1, cube)
    c = CoefficientField.uniform(cube)
    assert functional(tr, tr.copy(), c, spec_for(cube, 0.01)) == 0.0


def test_single_node_closed_form(cube):
    ta_nt, tau = 20, 0.05
    r = np.zeros((ta_nt + 1, 121))
    r[:, 5 + 11 * 5] = 1.0  # interior FRONT node
    u = BoundaryTrace(r, tau, cube)
    d = BoundaryTrace(np.zeros_like(r), tau, cube)
    J = functional(u, d, CoefficientField.uniform(cube), spec_for(cube))
    assert J == pytest.approx(0.5 * cube.h**2 * ta_nt * tau, rel=1e-14)


def test_misfit_matches_direct_sum(cube, rng):
    nt, tau, w = 30, 0.02, 0.1
    u = BoundaryTrace(rng.normal(size=(nt + 1, 121)), tau, cube)
    d = BoundaryTrace(rng.normal(size=(nt + 1, 121)), tau, cube)
    T = nt * tau
    total = 0.0
    h = cube.h
    for k in range(nt + 1):
        wk = 0.5 if k in (0, nt) else 1.0
        z = cutoff(CutoffSpec(w), k * tau, T)
        for i2 in range(11):
            for i1 in range(11):
                b = h * h * (0.5 if i1 in (0, 10) else 1.0) * (0.5 if i2 in (0, 10) else 1.0)
                diff = u.values[k, i1 + 11 * i2] - d.values[k, i1 + 11 * i2]
                total += 0.5 * diff * diff * z * b * tau * wk
    assert misfit(u, d, spec_for(cube, window=w), cube) == pytest.approx(total, rel=1e-12)


def test_regularization_term(cube, rng):
    c = CoefficientField(cube, rng.uniform(1, 2, size=cube.cell_shape))
    tr = BoundaryTrace(np.zeros((3, 121)), 0.1, cube)
    J = functional(tr, tr.copy(), c, spec_for(cube, 0.3))
    assert J == pytest.approx(0.5 * 0.3 * cube.h**3 * np.sum((c.values - 1) ** 2), rel=1e-14)


def test_misaligned_traces(cube):
    a = BoundaryTrace(np.zeros((3, 121)), 0.1, cube)
    b = BoundaryTrace(np.zeros((4, 121)), 0.1, cube)
    with pytest.raises(TraceMismatch):
        functional(a, b, CoefficientField.uniform(cube), spec_for(cube))


def _hist(grid, values, tau=0.1):
    return WaveHistory(grid, values, tau)


def test_gradient_zero_for_zero_adjoint(cube, rng):
    u = _hist(cube, rng.normal(size=(6,) + cube.n))
    lam = _hist(cube, np.zeros((6,) + cube.n))
    g = gradient(u, lam, CoefficientField.uniform(cube), spec_for(cube, 0.01))
    assert not np.any(g.values)


def test_regularization_gradient_exact(cube, rng):
    c = CoefficientField(cube, rng.uniform(1, 3, size=cube.cell_shape))
    z = _hist(cube, np.zeros((4,) + cube.n))
    g = gradient(z, z, c, spec_for(cube, 0.25))
    inner = cube.inner_cells
    assert np.array_equal(g.values[inner], 0.25 * (c.values[inner] - 1.0))
    assert not np.any(g.values[~inner])


def test_gradient_history_mismatch(cube):
    a = _hist(cube, np.zeros((4,) + cube.n))
    b = _hist(cube, np.zeros((5,) + cube.n))
    with pytest.raises(HistoryMismatch):
        gradient(a, b, CoefficientField.uniform(cube), spec_for(cube))
    with pytest.raises(HistoryMismatch):
        gradient(a, _hist(cube, np.zeros((4,) + cube.n), 0.2), CoefficientField.uniform(cube), spec_for(cube))


def test_gradient_of_linear_field_in_one_cell(cube):
    # u = x1, lam = x1: grad u . grad lam = 1 in every cell
    x = cube.node_coords()[..., 0]
    h = _hist(cube, np.stack([x, x]), tau=0.5)
    g = gradient(h, h, CoefficientField.uniform(cube), spec_for(cube))
    inner = cube.inner_cells
    assert np.allclose(g.values[inner], 0.5, rtol=1e-12)  # tau * (1/2 + 1/2)


def test_project_examples(cube):
    v = np.full(cube.cell_shape, 3.0)
    i = np.argwhere(cube.inner_cells)
    v[tuple(i[0])] = 0.5
    v[tuple(i[1])] = 7.0
    p = project(CoefficientField(cube, v, 5.0))
    assert p.values[tuple(i[0])] == 1.0
    assert p.values[tuple(i[1])] == 5.0
    assert p.values[tuple(i[2])] == 3.0
    assert np.all(p.values[~cube.inner_cells] == 1.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (10, 10, 10), elements=st.floats(-5, 15)))
def test_project_idempotent_nonexpansive(values):
    g = build_grid(BoxDomain((0, 0, 0), (1, 1, 1)), BoxDomain((0.2,) * 3, (0.8,) * 3), 0.1)
    a = CoefficientField(g, values, 10.0)
    b = CoefficientField(g, values[::-1], 10.0)
    pa, pb = project(a), project(b)
    assert np.array_equal(project(pa).values, pa.values)
    assert pa.is_admissible()
    assert np.max(np.abs(pa.values - pb.values)) <= np.max(np.abs(a.values - b.values))


def test_postprocess_exact(cube):
    inner = np.argwhere(cube.inner_cells)
    v = np.ones(cube.cell_shape)
    for idx, val in zip(inner[:5], (4.0, 2.8, 2.81, 2.79, 1.5)):
        v[tuple(idx)] = val
    out = postprocess(CoefficientField(cube, v, 5.0), 0.7)
    # threshold is exactly 0.7 * 4.0 = 2.8 (strict inequality)
    expected = np.where(v > 0.7 * 4.0, v, 1.0)
    assert np.array_equal(out.values, expected)
    kept = [out.values[tuple(i)] for i in inner[:5]]
    assert kept == [4.0, 1.0, 2.81, 1.0, 1.0]


def test_postprocess_uniform(cube):
    out = postprocess(CoefficientField.uniform(cube), 0.7)
    assert np.all(out.values == 1.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (10, 10, 10), elements=st.floats(1, 10)), st.floats(0.05, 0.95))
def test_postprocess_idempotent(values, P):
    g = build_grid(BoxDomain((0, 0, 0), (1, 1, 1)), BoxDomain((0.2,) * 3, (0.8,) * 3), 0.1)
    once = postprocess(CoefficientField(g, values), P)
    if once.values[g.inner_cells].max() == values[g.inner_cells].max():
        assert np.array_equal(postprocess(once, P).values, once.values)


def test_postprocess_rejects_bad_P(cube):
    with pytest.raises(ValueError):
        postprocess(CoefficientField.uniform(cube), 1.0)


def test_gamma_rule():
    assert GammaRule(0.01, 0.2).gamma == pytest.approx(0.01**0.4)
    spec = TikhonovSpec(1.0, None, gamma_rule=GammaRule(0.03, 0.1))
    assert spec.gamma == pytest.approx(0.03**0.2)
    with pytest.raises(ValueError):
        GammaRule(0.01, 0.25)


def test_error_bound_at_exact_solution(cube):
    c = CoefficientField.uniform(cube)
    z = _hist(cube, np.zeros((3,) + cube.n))
    lhs, rhs = error_bound(z, z, c, c, spec_for(cube, 0.0), 0.03, 0.2, 0.0, c)
    assert lhs == 0.0 and rhs == 0.0


def test_error_bound_terms(cube, rng):
    c = CoefficientField(cube, rng.uniform(1, 2, size=cube.cell_shape))
    c_star = CoefficientField(cube, rng.uniform(1, 2, size=cube.cell_shape))
    c0 = CoefficientField.uniform(cube)
    g = GradientField(cube, rng.normal(size=cube.cell_shape))
    lhs, rhs = error_bound_from_gradient(g, c, c0, c_star, 0.1, 0.2, 0.5)
    h3 = cube.h**3
    assert lhs == pytest.approx(np.sqrt(h3 * np.sum((c.values - c_star.values) ** 2)))
    expect = 2 / 0.1**0.4 * np.sqrt(h3 * np.sum(g.values**2)) + 0.5 * np.sqrt(h3 * np.sum((1 - c_star.values) ** 2))
    assert rhs == pytest.approx(expect)


def test_gradient_field_algebra(cube, rng):
    a = GradientField(cube, rng.normal(size=cube.cell_shape))
    assert a.norm() ** 2 == pytest.approx(a.dot(a))
    assert (-a).dot(a) == pytest.approx(-a.dot(a))
    assert a.max_abs() == np.abs(a.values).max()
