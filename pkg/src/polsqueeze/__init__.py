"""Squeezing spectra of driven biexciton-polariton microcavities.

The pipeline runs in meV / nm / fs units throughout: screened Coulomb
interaction of a 2D semiconductor in a layered environment, exciton
relative-motion bound state, two-exciton bound and scattering states,
exciton-photon and exciton-exciton coupling constants, nonlinear
steady state of the driven cavity, linearized quantum fluctuations,
and finally the homodyne noise spectrum of the emitted light.
"""

from .units import HBAR, HBAR_C, COULOMB_NM

__all__ = ["HBAR", "HBAR_C", "COULOMB_NM"]
__version__ = "0.1.0"
