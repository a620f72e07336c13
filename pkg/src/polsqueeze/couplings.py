"""Light-matter and exciton-level coupling constants.

The cavity mode and the 1s exciton hybridize at strength Omega_0 =
A_0 sum_k phi_k.  Everything nonlinear at the one-exciton level reduces
to momentum sums over the relative-motion amplitude: the phase-space
filling overlap (three amplitudes, two displaced by fractions of the
pair momentum), the factorized exciton-exciton exchange energy, and the
mode-volume scaling of the photon coupling with in-plane momentum.  All
pair quantities are s-wave: angles enter only through the quadrature
average over the relative orientation.
"""

from typing import Callable

import numpy as np

from .grids import theta_rule
from .units import HBAR2_2M0, HBAR_C, MILLIWATT, UM2
from .wannier import ExcitonState, interaction_matrix


def photon_energy(q, e_p0: float, n_idx: float):
    """Planar-cavity dispersion sqrt(E_p0^2 + (hbar c q / n)^2), meV."""
    q = np.asarray(q, dtype=float)
    return np.sqrt(e_p0**2 + (HBAR_C * q / n_idx) ** 2)


def exciton_energy(q, e_x0: float, mass_total: float):
    """Center-of-mass parabola E_x0 + hbar^2 q^2 / 2M, mass in m_0 units."""
    q = np.asarray(q, dtype=float)
    return e_x0 + HBAR2_2M0 * q**2 / mass_total


def mode_scale(q, e_p0: float, n_idx: float):
    """sqrt(E_p0 / E_p(q)): field amplitude of one photon vs momentum.

    Scales both A_q and Omega_q from their zero-momentum values.
    """
    return np.sqrt(e_p0 / photon_energy(q, e_p0, n_idx))


def polariton_energies(e_p0: float, e_x0: float, omega0: float):
    """Zero-momentum polariton doublet (lower, upper) of the linear block."""
    mean = 0.5 * (e_p0 + e_x0)
    split = float(np.hypot(0.5 * (e_p0 - e_x0), omega0))
    return mean - split, mean + split


def drive_amplitude(p_in_mw: float, area_um2: float, e_p0: float) -> float:
    """Input field density amplitude sqrt(P / (S E_p0)), nm^-1 fs^-1/2.

    Multiply by the unit-norm polarization weight of each valley.
    """
    return float(np.sqrt(p_in_mw * MILLIWATT / (area_um2 * UM2 * e_p0)))


def oscillator_sum(state: ExcitonState) -> float:
    """sum_k phi_k on the state's grid; converts A_0 = Omega_0 / sum."""
    return float(state.grid.w @ state.phi)


def pauli_overlap(state: ExcitonState, q, alpha: float, n_theta: int = 32):
    """Phase-space-filling sum 2 sum_k phi_k phi_{|k+alpha q|} phi_{|k+q|}.

    alpha is the electron mass fraction m_e / M.  Multiply by A_q for
    the saturation strength at pair momentum q.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    th, wt = theta_rule(n_theta)
    cth = np.cos(th)
    kk = state.grid.k[None, :, None]
    qq = q[:, None, None]
    s1 = np.sqrt(kk**2 + (alpha * qq) ** 2 + 2.0 * alpha * kk * qq * cth)
    s2 = np.sqrt(kk**2 + qq**2 + 2.0 * kk * qq * cth)
    inner = (state.phi_at(s1) * state.phi_at(s2)) @ wt
    out = 2.0 * inner @ (state.grid.w * state.phi)
    return out if out.size > 1 else float(out[0])


def exchange_constant(state: ExcitonState, potential: Callable,
                      eps_head: float, n_theta: int = 48) -> float:
    """Factorized exciton-exciton exchange energy W0 (meV nm^2).

    2 [ sum phi1^3 V phi2 - sum phi1^2 V phi2^2 ]; repulsive for the
    screened ground state.
    """
    v0 = interaction_matrix(state.grid, potential, eps_head, n_theta=n_theta)
    wphi = state.grid.w * state.phi
    t31 = (wphi * state.phi**2) @ v0 @ wphi
    t22 = (wphi * state.phi) @ v0 @ (wphi * state.phi)
    return float(2.0 * (t31 - t22))
