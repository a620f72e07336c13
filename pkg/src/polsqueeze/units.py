"""Physical constants in the meV / nm / fs unit system.

Everything downstream works in these units: energies in meV, lengths in
nm, times in fs.  Momenta are nm^-1 and carry hbar implicitly, i.e. the
kinetic energy of a free electron at wavevector k is ``HBAR2_2M0 * k**2``.
Field amplitudes are surface densities (nm^-1 for linear amplitudes,
nm^-2 for pair amplitudes).
"""

import math

# hbar in meV fs and hbar*c in meV nm (CODATA 2018)
HBAR = 658.2119569
HBAR_C = 197326.980

# hbar^2 / (2 m0) in meV nm^2, with m0 the bare electron mass
HBAR2_2M0 = 38.09982116

# Coulomb coupling e^2/(4 pi eps0) = alpha * hbar * c, in meV nm
E2_4PIEPS0 = HBAR_C / 137.035999084

# e^2/(2 eps0) in meV nm: prefactor of the bare 2D potential e^2/(2 eps0 q)
COULOMB_NM = 2.0 * math.pi * E2_4PIEPS0

# hydrogen scales
RYDBERG = 13605.693  # meV
BOHR = 0.0529177211  # nm

# light speed in nm/fs
C_LIGHT = 299.792458

# 1 mW of optical power in meV/fs: 1e-3 J/s -> eV/s -> meV/fs
MILLIWATT = 1.0e-3 / 1.602176634e-19 * 1.0e-12

# 1 um^2 in nm^2
UM2 = 1.0e6
