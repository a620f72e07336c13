"""Nested fixed-point solver against the unreduced dense block.

The eliminated correlation block is checked against the dense
assembly in oracles/dense_block.py on tiny synthetic sectors where
every coupling is an arbitrary number.  The driven fixed point itself
runs on the layered-screening cavity at reduced grid sizes and is
certified through backward error, valley-exchange symmetry and the
weak-drive scaling laws.
"""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polsqueeze.biexciton import BiexcitonSector
from polsqueeze.couplings import polariton_energies
from polsqueeze.grids import RadialGrid
from polsqueeze.steady import (
    ConvergenceError,
    PolaritonModel,
    SingularBlockError,
    solve_multiparticle_block,
    solve_steady,
)

from oracles import dense_block


def toy_model(seed=0, n=4, m=2, hg_p=0.35, hg_x=0.21):
    # every coupling is an arbitrary O(1) number; only the equation
    # structure is under test, never the physics of the tables
    rng = np.random.default_rng(seed)
    k = np.concatenate([[0.0], np.linspace(0.7, 1.9, n - 1)])
    edges = np.concatenate([[0.0], 0.5 * (k[1:] + k[:-1]), [k[-1] + 0.4]])
    w = (edges[1:] ** 2 - edges[:-1] ** 2) / (4.0 * np.pi)
    grid = RadialGrid(k=k, w=w, edges=edges, head=True)

    def sector(sign):
        return BiexcitonSector(
            sign=sign, q=k, w=w,
            energies=2.4 + rng.uniform(0.0, 1.5, m),
            right=rng.normal(size=(n, m)), left=rng.normal(size=(m, n)),
            s_hat=np.eye(n), sqw=np.sqrt(w), h_asym=0.0,
            w_source=rng.normal(size=m) * 0.4,
            w_source_dual=rng.normal(size=m) * 0.4)

    return PolaritonModel(
        exciton=None, grid=grid, minus=sector(-1), plus=sector(+1),
        kernels=None, overlap_raw=rng.uniform(0.5, 1.0, n), w0=0.3,
        e_x0=1.2, e_p0=1.35, n_idx=3.0, mass_total=1.0, omega0=0.4,
        hg_p=hg_p, hg_x=hg_x, area_um2=1.0,
        omega_q=0.4 / np.sqrt(1.0 + 0.3 * k**2),
        a_q=0.5 / np.sqrt(1.0 + 0.3 * k**2),
        omega_tilde=rng.uniform(0.2, 0.5, n),
        ep_q=1.35 + 0.8 * k**2, ex_q=1.2 + 0.3 * k**2,
        proj_minus=rng.normal(size=(n, m)) * 0.3,
        dual_minus=rng.normal(size=(m, n)) * 0.3,
        proj_plus=rng.normal(size=(n, m)) * 0.3,
        dual_plus=rng.normal(size=(m, n)) * 0.3)


def channel_inputs(model, omega_d, amp_p):
    """The raw per-channel coefficient arrays, straight off the model."""
    epd = model.ep_q + 1j * model.hg_p - omega_d
    exd = model.ex_q + 1j * model.hg_x - omega_d
    exxd_p = model.plus.energies + 2j * model.hg_x - 2.0 * omega_d
    exxd_m = model.minus.energies + 2j * model.hg_x - 2.0 * omega_d
    channels = []
    for z in range(2):
        pp = amp_p[z] ** 2
        channels.append((
            -0.5 * model.omega_tilde * pp,
            [dict(exxd=exxd_p, proj=model.proj_plus, dual=model.dual_plus,
                  src_b=model.plus.w_source_dual * pp, kappa_c=2.0)]))
    pp = amp_p[0] * amp_p[1]
    channels.append((
        np.zeros(model.grid.n),
        [dict(exxd=exxd_p, proj=model.proj_plus, dual=model.dual_plus,
              src_b=0.5 * model.plus.w_source_dual * pp, kappa_c=1.0),
         dict(exxd=exxd_m, proj=model.proj_minus, dual=model.dual_minus,
              src_b=0.5 * model.minus.w_source_dual * pp, kappa_c=1.0)]))
    return epd, exd, channels


def test_block_matches_dense_reference():
    for seed in range(4):
        model = toy_model(seed=seed)
        rng = np.random.default_rng(100 + seed)
        amp_p = rng.normal(size=2) + 1j * rng.normal(size=2)
        omega_d = 1.25 + 0.1 * rng.normal()
        block = solve_multiparticle_block(model, omega_d, amp_p)
        epd, exd, channels = channel_inputs(model, omega_d, amp_p)
        got = [(block.c_intra[0], block.d_intra[0], [block.b_intra[0]]),
               (block.c_intra[1], block.d_intra[1], [block.b_intra[1]]),
               (block.c_cross, block.d_cross,
                [block.b_cross_plus, block.b_cross_minus])]
        for (src_c, secs), (c, d, bs) in zip(channels, got):
            c_ref, d_ref, bs_ref = dense_block.solve_channel(
                epd, exd, model.omega_q, src_c, secs)
            scale = np.abs(c_ref).max()
            np.testing.assert_allclose(c, c_ref, rtol=1e-10,
                                       atol=1e-12 * scale)
            np.testing.assert_allclose(d, d_ref, rtol=1e-10,
                                       atol=1e-12 * scale)
            for b, b_ref in zip(bs, bs_ref):
                np.testing.assert_allclose(b, b_ref, rtol=1e-10,
                                           atol=1e-12 * scale)


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=3.0,
                          allow_infinity=False, allow_nan=False))
def test_block_is_quadratic_in_the_amplitudes(c):
    # the block is linear in the amplitude products, hence quadratic
    # under a common rescaling of both valley amplitudes
    model = toy_model(seed=7)
    amp_p = np.array([0.8 - 0.2j, 0.5 + 0.6j])
    base = solve_multiparticle_block(model, 1.22, amp_p)
    scaled = solve_multiparticle_block(model, 1.22, c * amp_p)
    for field in ("c_intra", "d_intra", "b_intra", "c_cross", "d_cross",
                  "b_cross_plus", "b_cross_minus"):
        np.testing.assert_allclose(getattr(scaled, field),
                                   c**2 * getattr(base, field),
                                   rtol=1e-9, atol=1e-12)


def test_block_dark_without_sources():
    model = toy_model(seed=3)
    quiet = dataclasses.replace(
        model, omega_tilde=np.zeros(model.grid.n),
        plus=dataclasses.replace(model.plus,
                                 w_source_dual=np.zeros(model.plus.n_modes)),
        minus=dataclasses.replace(model.minus,
                                  w_source_dual=np.zeros(model.minus.n_modes)))
    amp_p = np.array([0.9 + 0.1j, -0.3 + 0.7j])
    block = solve_multiparticle_block(quiet, 1.3, amp_p)
    for field in ("c_intra", "d_intra", "b_intra", "c_cross", "d_cross",
                  "b_cross_plus", "b_cross_minus"):
        assert np.all(getattr(block, field) == 0.0)


def test_block_undriven_is_zero():
    block = solve_multiparticle_block(toy_model(), 1.3, np.zeros(2))
    assert np.all(block.c_intra == 0.0) and np.all(block.c_cross == 0.0)


def test_block_pole_guard():
    model = toy_model(seed=1, hg_x=0.0)
    with pytest.raises(SingularBlockError):
        solve_multiparticle_block(model, 0.5 * model.plus.energies[0],
                                  np.ones(2))
    model = toy_model(seed=1, hg_p=0.0)
    with pytest.raises(SingularBlockError):
        solve_multiparticle_block(model, float(model.ep_q[2]), np.ones(2))


def test_toy_newton_and_propagation_agree():
    model = toy_model(seed=5)
    lo, _ = polariton_energies(model.e_p0, model.e_x0, model.omega0)
    by_newton = solve_steady(model, lo, 1e-3, method="newton")
    by_ramp = solve_steady(model, lo, 1e-3, method="propagate")
    assert by_newton.strategy == "newton"
    assert by_ramp.strategy == "propagate"
    np.testing.assert_allclose(by_ramp.amp_a, by_newton.amp_a, rtol=1e-6)
    np.testing.assert_allclose(by_ramp.amp_p, by_newton.amp_p, rtol=1e-6)


def test_nonconvergence_raises_with_history():
    model = toy_model(seed=5)
    with pytest.raises(ConvergenceError) as err:
        solve_steady(model, 1.1, 0.5, method="newton", max_newton=0)
    assert len(err.value.history) >= 1
    assert err.value.history[0][1] > 1e-10


# ---------------------------------------------------------------------------
# driven fixed point on the real stack, reduced sizes


def test_undriven_cavity_is_dark(cavity):
    state = solve_steady(cavity, cavity.e_x0, 0.0)
    assert state.residual == 0.0
    assert np.all(state.amp_a == 0.0) and np.all(state.amp_p == 0.0)
    assert np.all(state.block.c_intra == 0.0)
    assert np.all(state.block.b_cross_minus == 0.0)


def test_fixed_point_certified_by_dense_rows(cavity):
    lo, _ = polariton_energies(cavity.e_p0, cavity.e_x0, cavity.omega0)
    state = solve_steady(cavity, lo, 10.0)
    assert state.residual < 1e-10
    # replay the solution through the unreduced block matrix
    epd, exd, channels = channel_inputs(cavity, state.omega_d, state.amp_p)
    sols = [np.concatenate([state.block.c_intra[0], state.block.d_intra[0],
                            state.block.b_intra[0]]),
            np.concatenate([state.block.c_intra[1], state.block.d_intra[1],
                            state.block.b_intra[1]]),
            np.concatenate([state.block.c_cross, state.block.d_cross,
                            state.block.b_cross_plus,
                            state.block.b_cross_minus])]
    for (src_c, secs), sol in zip(channels, sols):
        mat, rhs, _ = dense_block.assemble_channel(
            epd, exd, cavity.omega_q, src_c, secs)
        gap = np.abs(mat @ sol - rhs).max()
        assert gap <= 1e-10 * max(np.abs(rhs).max(), 1e-300)


def test_valley_exchange_symmetry(cavity):
    lo, _ = polariton_energies(cavity.e_p0, cavity.e_x0, cavity.omega0)
    state = solve_steady(cavity, lo + 2.0, 10.0)
    np.testing.assert_allclose(state.amp_a[0], state.amp_a[1], rtol=1e-12)
    np.testing.assert_allclose(state.amp_p[0], state.amp_p[1], rtol=1e-12)
    np.testing.assert_allclose(state.block.c_intra[0],
                               state.block.c_intra[1], rtol=1e-12)
    # elliptic pump: swapping the polarization weights swaps the valleys
    tilted = solve_steady(cavity, lo + 2.0, 10.0, lambda_in=(0.8, 0.6))
    swapped = solve_steady(cavity, lo + 2.0, 10.0, lambda_in=(0.6, 0.8))
    np.testing.assert_allclose(tilted.amp_a, swapped.amp_a[::-1], rtol=1e-10)
    np.testing.assert_allclose(tilted.amp_p, swapped.amp_p[::-1], rtol=1e-10)


def test_weak_drive_scales_linearly(cavity):
    lo, _ = polariton_energies(cavity.e_p0, cavity.e_x0, cavity.omega0)
    small = solve_steady(cavity, lo + 0.5, 1e-9)
    twice = solve_steady(cavity, lo + 0.5, 4e-9)
    np.testing.assert_allclose(twice.amp_a, 2.0 * small.amp_a, rtol=1e-5)
    np.testing.assert_allclose(twice.amp_p, 2.0 * small.amp_p, rtol=1e-5)
    np.testing.assert_allclose(twice.block.c_intra,
                               4.0 * small.block.c_intra, rtol=1e-4)


def test_polariton_resonances_dominate_weak_response(cavity):
    lo, hi = polariton_energies(cavity.e_p0, cavity.e_x0, cavity.omega0)
    # the doublet is broad (hbar gamma_p = 9 meV), so probe well off peak
    probe = {w: np.abs(solve_steady(cavity, w, 1e-9).amp_a).max()
             for w in (lo, hi, cavity.e_x0, lo - 15.0, hi + 15.0)}
    assert probe[lo] > 2.0 * probe[cavity.e_x0]
    assert probe[hi] > 2.0 * probe[cavity.e_x0]
    assert probe[lo] > 2.0 * probe[lo - 15.0]
    assert probe[hi] > 2.0 * probe[hi + 15.0]
