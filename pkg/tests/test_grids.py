"""Quadrature and grid invariants."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polsqueeze.grids import log_grid, theta_rule


def test_weights_cover_annulus_exactly():
    g = log_grid(1e-3, 50.0, 200)
    total = (g.edges[-1] ** 2 - g.edges[0] ** 2) / (4 * np.pi)
    assert np.isclose(g.w.sum(), total, rtol=1e-14)


def test_gaussian_integral():
    # int d^2k/(2pi)^2 exp(-k^2 / (2 s^2)) = s^2 / (2 pi)
    s = 2.3
    g = log_grid(1e-4, 60.0, 600)
    val = g.integrate(np.exp(-g.k**2 / (2 * s**2)))
    assert np.isclose(val, s**2 / (2 * np.pi), rtol=2e-4)


def test_head_grid_point_source():
    g = log_grid(1e-3, 10.0, 100, head=True)
    assert g.k[0] == 0.0
    assert g.w[0] > 0
    # discrete delta_{q,0} normalization: sum_i w_i (delta_i0 / w_0) = 1
    src = np.zeros(g.n)
    src[0] = 1.0 / g.w[0]
    assert np.isclose(g.integrate(src), 1.0, rtol=1e-14)
    # head cell joins the log cells with no gap or overlap
    assert g.edges[0] == 0.0
    assert np.all(np.diff(g.edges) > 0)


@settings(max_examples=50, deadline=None)
@given(
    k_min=st.floats(1e-6, 1e-1),
    span=st.floats(1e2, 1e6),
    n=st.integers(8, 300),
    head=st.booleans(),
)
def test_grid_invariants(k_min, span, n, head):
    g = log_grid(k_min, k_min * span, n, head=head)
    assert np.all(np.diff(g.k) > 0)
    assert np.all(g.w > 0)
    assert np.all(g.edges[:-1] < g.k) and np.all(g.k < g.edges[1:]) or head
    # nodes sit inside their cells
    inner = slice(1, None) if head else slice(None)
    assert np.all(g.edges[:-1][inner] <= g.k[inner])
    assert np.all(g.k[inner] <= g.edges[1:][inner])


def test_theta_rule_averages():
    th, wt = theta_rule(24)
    assert np.isclose(wt.sum(), 1.0, rtol=1e-14)
    assert np.isclose(np.cos(th) ** 2 @ wt, 0.5, atol=1e-12)
    assert abs(np.cos(th) @ wt) < 1e-12


def test_bad_grids_rejected():
    with pytest.raises(ValueError):
        log_grid(0.0, 1.0, 50)
    with pytest.raises(ValueError):
        log_grid(1.0, 0.5, 50)
    with pytest.raises(ValueError):
        log_grid(1e-3, 1.0, 2)
