"""Homodyne spectrum assembly: input-output, phase optimum, oracles."""

import dataclasses

import numpy as np
import pytest

from polsqueeze.fluctuations import (FluctuationSolution, GainMatrix,
                                     SelfEnergy, solve_fluctuations)
from polsqueeze.spectrum import (SqueezingPoint, co_polarized,
                                 cross_polarized, homodyne_point,
                                 output_rows, solve_spectrum,
                                 squeezing_spectrum)
from polsqueeze.steady import solve_steady, solve_multiparticle_block, SteadyState
from polsqueeze.units import HBAR

from oracles import ou_mc
from test_steady import toy_model


def _dark_solution(omega=0.0):
    return FluctuationSolution(omega=omega, transfer=np.zeros((8, 8)),
                               matrix=None, noise=None, forward=None,
                               backward=None, gain=None)


def dpa_solutions(model, eps, omegas):
    """Transfer matrices for the single-mode squeezer reduction."""
    state = solve_steady(model, model.e_x0, 0.0)
    zero = np.zeros((2, 2))
    gain = GainMatrix(total=eps * np.eye(2), mean_field=zero,
                      biexciton=zero, bound=zero, pauli=zero)
    s2gx = np.sqrt(2.0 * model.hg_x / HBAR)

    def bare(omega):
        return SelfEnergy(omega=omega, sigma=np.zeros((2, 2), dtype=complex),
                          omega_r=np.zeros((2, 2), dtype=complex),
                          gamma_x=s2gx * np.eye(2, dtype=complex),
                          gamma_p=np.zeros((2, 2), dtype=complex))

    return [solve_fluctuations(model, state, float(w), gain=gain,
                               forward=bare(float(w)),
                               backward=bare(-float(w)))
            for w in omegas]


def test_analyzer_vectors():
    lam = np.array([1.0, 1.0]) / np.sqrt(2.0)
    np.testing.assert_allclose(co_polarized(lam), lam)
    cross = cross_polarized(lam)
    np.testing.assert_allclose(np.vdot(cross, lam), 0.0, atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(cross), 1.0, rtol=1e-15)


def test_dark_cavity_reflects_input():
    # no intracavity response: the output is the reflected input and
    # the detected mode sits exactly at shot noise
    model = toy_model(seed=1)
    lam = np.array([1.0, 1.0]) / np.sqrt(2.0)
    rows = output_rows(model, _dark_solution(), lam)
    assert np.abs(np.linalg.norm(rows.ann) - 1.0) < 1e-15
    assert np.abs(rows.ann[4:6] - np.conj(lam)).max() < 1e-15
    pt = homodyne_point(model, _dark_solution(), lam)
    assert abs(pt.c0 - 1.0) < 1e-15 and abs(pt.c2) < 1e-15


def test_resonant_passive_cavity_phase_flips():
    # one-sided lossless mirror at resonance: full reflection with a
    # sign flip; this pins the input-output sign convention
    model = dataclasses.replace(toy_model(seed=2), omega0=0.0)
    omega_d = model.e_p0 - 3.0
    state = solve_steady(model, omega_d, 0.0)
    # daggered and undaggered responses peak at mirrored frequencies
    sol = solve_fluctuations(model, state, omega_d - model.e_p0)
    rows = output_rows(model, sol, np.array([1.0, 0.0]))
    np.testing.assert_allclose(rows.cre[0], -1.0, rtol=1e-12)
    sol = solve_fluctuations(model, state, model.e_p0 - omega_d)
    rows = output_rows(model, sol, np.array([1.0, 0.0]))
    np.testing.assert_allclose(rows.ann[4], -1.0, rtol=1e-12)


def test_undriven_cavity_sits_at_shot_noise(cavity):
    state = solve_steady(cavity, cavity.e_x0 - 14.0, 0.0)
    omegas = np.linspace(-30.0, 30.0, 21)
    for channel in ("co", "cross"):
        res = solve_spectrum(cavity, state, omegas, channel=channel)
        assert np.abs(res.noise_min - 1.0).max() < 1e-10
        assert np.abs(res.noise_max - 1.0).max() < 1e-10
        surface = res.surface(np.linspace(0.0, np.pi, 37))
        assert np.abs(surface - 1.0).max() < 1e-10


def test_dpa_spectrum_matches_textbook():
    model = dataclasses.replace(toy_model(seed=17), omega0=0.0)
    g = model.hg_x
    eps = 0.6 * g
    omegas = np.linspace(-3.0 * g, 3.0 * g, 31)
    sols = dpa_solutions(model, eps, omegas)
    res = squeezing_spectrum(model, sols, np.array([1.0, 0.0]),
                             channel="custom", port="exciton")
    squeezed = 1.0 - 4.0 * g * eps / ((g + eps) ** 2 + omegas ** 2)
    stretched = 1.0 + 4.0 * g * eps / ((g - eps) ** 2 + omegas ** 2)
    np.testing.assert_allclose(res.noise(np.pi / 4.0), squeezed, rtol=1e-10)
    np.testing.assert_allclose(res.noise(-np.pi / 4.0), stretched, rtol=1e-10)
    np.testing.assert_allclose(res.noise_min, squeezed, rtol=1e-10)
    np.testing.assert_allclose(res.theta_star, np.pi / 4.0, rtol=1e-10)
    # physicality and the zero-frequency textbook minimum
    assert res.noise_min.min() > 0.0
    mid = np.argmin(np.abs(omegas))
    np.testing.assert_allclose(res.noise_min[mid],
                               ((g - eps) / (g + eps)) ** 2, rtol=1e-10)


def test_optimal_phase_against_dense_grid():
    rng = np.random.default_rng(3)
    thetas = np.linspace(0.0, np.pi, 3600, endpoint=False)
    for _ in range(100):
        c0 = rng.uniform(0.5, 3.0)
        c2 = rng.normal() + 1j * rng.normal()
        pt = SqueezingPoint(omega=0.0, c0=c0, c2=c2)
        grid = pt.noise(thetas)
        assert grid.min() >= pt.noise_min - 1e-12
        assert grid.min() - pt.noise_min < abs(c2) * (np.pi / 3600) ** 2 * 2.1
        np.testing.assert_allclose(pt.noise(pt.theta_star), pt.noise_min,
                                   rtol=0, atol=1e-12 * max(1.0, abs(c2)))
    flat = SqueezingPoint(omega=0.0, c0=1.0, c2=0.0)
    assert flat.phase_degenerate and flat.theta_star == 0.0


def test_spectrum_is_even_in_frequency():
    model = toy_model(seed=29)
    rng = np.random.default_rng(8)
    omega_d = model.e_x0 - 0.2
    amp_p = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.3
    amp_a = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.2
    a_in = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.1
    state = SteadyState(omega_d=omega_d, p_in_mw=1.0,
                        lambda_in=np.array([1.0, 0.0]), a_in=a_in,
                        amp_a=amp_a, amp_p=amp_p,
                        block=solve_multiparticle_block(model, omega_d, amp_p),
                        residual=0.0, history=(), strategy="synthetic")
    omegas = np.array([-1.3, -0.4, 0.4, 1.3])
    res = solve_spectrum(model, state, omegas, channel="co")
    np.testing.assert_allclose(res.c0[:2], res.c0[:1:-1], rtol=1e-12)
    np.testing.assert_allclose(res.c2[:2], res.c2[:1:-1], rtol=1e-12)
    theta = 0.83
    np.testing.assert_allclose(res.noise(theta)[:2], res.noise(theta)[:1:-1],
                               rtol=1e-12)


def test_decoupled_valleys_make_channels_equal():
    # with biexciton and saturation couplings quenched the valleys are
    # independent; under equal drive, co and cross analyzers then see
    # the same statistics
    model = toy_model(seed=31)
    dead_minus = dataclasses.replace(
        model.minus, w_source=np.zeros_like(model.minus.w_source),
        w_source_dual=np.zeros_like(model.minus.w_source_dual))
    dead_plus = dataclasses.replace(
        model.plus, w_source=np.zeros_like(model.plus.w_source),
        w_source_dual=np.zeros_like(model.plus.w_source_dual))
    quenched = dataclasses.replace(
        model, minus=dead_minus, plus=dead_plus,
        omega_tilde=np.zeros_like(model.omega_tilde))
    omega_d = quenched.e_x0 + 0.1
    rng = np.random.default_rng(12)
    vals = (rng.normal(size=3) + 1j * rng.normal(size=3)) * 0.2
    amp_p = np.array([vals[0], vals[0]])
    amp_a = np.array([vals[1], vals[1]])
    a_in = np.array([vals[2], vals[2]])
    state = SteadyState(omega_d=omega_d, p_in_mw=1.0,
                        lambda_in=np.array([1.0, 1.0]) / np.sqrt(2.0),
                        a_in=a_in, amp_a=amp_a, amp_p=amp_p,
                        block=solve_multiparticle_block(quenched, omega_d,
                                                        amp_p),
                        residual=0.0, history=(), strategy="synthetic")
    omegas = np.array([-0.7, 0.0, 1.1])
    res_co = solve_spectrum(quenched, state, omegas, channel="co")
    res_cross = solve_spectrum(quenched, state, omegas, channel="cross")
    np.testing.assert_allclose(res_co.c0, res_cross.c0, rtol=1e-12)
    np.testing.assert_allclose(res_co.c2, res_cross.c2, rtol=1e-12)


@pytest.mark.slow
def test_time_domain_monte_carlo_agrees():
    # brute-force stochastic integration of the one-mode reduction;
    # validates orderings, vacuum contractions and the normalization
    model = dataclasses.replace(toy_model(seed=17), omega0=0.0)
    g = model.hg_x
    eps = 0.55 * g
    omegas = np.array([0.0, 0.4 * g, 1.1 * g])
    sols = dpa_solutions(model, eps, omegas)
    res = squeezing_spectrum(model, sols, np.array([1.0, 0.0]),
                             channel="custom", port="exciton")
    for theta in (np.pi / 4.0, -np.pi / 4.0):
        exact = res.noise(theta)
        mc, err = ou_mc.dpa_output_psd(g, eps, theta, omegas, HBAR,
                                       trajectories=100_000, seed=11)
        assert np.all(np.abs(mc - exact) < 4.0 * err + 0.005 * exact)
