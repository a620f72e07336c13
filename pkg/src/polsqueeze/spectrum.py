"""Homodyne noise spectra of the cavity output light.

Input-output composition on top of the fluctuation transfer matrices.
The one-sided mirror maps the intracavity field to the outgoing one,
``b_out = b_in + sqrt(2 gamma/hbar) b``; with the noise-term sign used
in the equations of motion this branch, not the textbook minus, is the
commutator-preserving one (the resonant passive cavity then reflects
with a phase flip, as it must).  The detected mode is the projection
of the two valley outputs onto an analyzer polarization.

The photocurrent noise spectrum, normalized so that vacuum inputs give
exactly 1, is evaluated in closed form over the homodyne angle:

    1 + L(omega, theta) = c0(omega) + Re[c2(omega) exp(2i theta)]

with c0 from the norms of the detected-mode transfer rows and c2 from
their overlap.  Both +omega and -omega response enter; the second is
obtained from the first through the conjugation symmetry of the doubled
system, so each spectrum point costs one fluctuation solve.  The phase
optimum and the minimal noise follow without any grid search.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fluctuations import FluctuationSolution, parametric_gain, solve_fluctuations
from .steady import PolaritonModel, SteadyState
from .units import HBAR

# noise-channel offset of the annihilation block in the doubled system
_ANN = 4
# port -> (row offset of the daggered pair, damping attribute)
_PORTS = {"photon": (0, "hg_p"), "exciton": (2, "hg_x")}


def co_polarized(lambda_in) -> np.ndarray:
    """Analyzer along the drive polarization."""
    lam = np.asarray(lambda_in, dtype=complex)
    return lam / np.linalg.norm(lam)


def cross_polarized(lambda_in) -> np.ndarray:
    """Analyzer orthogonal to the drive polarization."""
    lam = np.asarray(lambda_in, dtype=complex)
    lam = lam / np.linalg.norm(lam)
    return np.conj(np.array([lam[1], -lam[0]]))


@dataclass(frozen=True)
class OutputRows:
    """Transfer rows of the detected output mode and its adjoint."""

    omega: float
    ann: np.ndarray
    cre: np.ndarray


def output_rows(model: PolaritonModel, sol: FluctuationSolution,
                lambda_out, port: str = "photon") -> OutputRows:
    """Input-output rows of the analyzer mode over the noise channels.

    ``port`` selects which damped pair leaves through the detector;
    "photon" is the physical cavity output, "exciton" exists for the
    parametric-amplifier reduction and for diagnostics.
    """
    base, damping = _PORTS[port]
    rate = np.sqrt(2.0 * getattr(model, damping) / HBAR)
    lam = np.asarray(lambda_out, dtype=complex)
    ann = np.zeros(8, dtype=complex)
    cre = np.zeros(8, dtype=complex)
    for zeta in range(2):
        row = _ANN + base + zeta
        ann[row] += np.conj(lam[zeta])
        ann += np.conj(lam[zeta]) * rate * sol.transfer[row]
        row = base + zeta
        cre[row] += lam[zeta]
        cre += lam[zeta] * rate * sol.transfer[row]
    return OutputRows(omega=sol.omega, ann=ann, cre=cre)


@dataclass(frozen=True)
class SqueezingPoint:
    """Noise of one spectrum point, closed over the homodyne angle."""

    omega: float
    c0: float
    c2: complex

    @property
    def phase_degenerate(self) -> bool:
        return abs(self.c2) <= 1e-14 * max(self.c0, 1.0)

    @property
    def theta_star(self) -> float:
        if self.phase_degenerate:
            return 0.0
        return 0.5 * (np.pi - np.angle(self.c2))

    @property
    def noise_min(self) -> float:
        return self.c0 - abs(self.c2)

    @property
    def noise_max(self) -> float:
        return self.c0 + abs(self.c2)

    def noise(self, theta):
        phase = np.exp(2j * np.asarray(theta))
        return self.c0 + (self.c2 * phase).real


def homodyne_point(model: PolaritonModel, sol: FluctuationSolution,
                   lambda_out, port: str = "photon") -> SqueezingPoint:
    """Shot-noise-normalized homodyne spectrum at one frequency.

    Vacuum contractions leave only annihilation-against-creation input
    pairings; the -omega half of the stationary spectrum is folded in
    through the conjugation symmetry of the doubled system, which makes
    the coefficients exact functions of the rows at +omega alone.
    """
    rows = output_rows(model, sol, lambda_out, port)
    c0 = 0.5 * (np.vdot(rows.ann, rows.ann).real
                + np.vdot(rows.cre, rows.cre).real)
    c2 = np.vdot(rows.ann, rows.cre)
    return SqueezingPoint(omega=sol.omega, c0=c0, c2=c2)


@dataclass(frozen=True)
class SqueezingResult:
    """Squeezing spectrum over a frequency grid, one analyzer channel."""

    omega: np.ndarray
    c0: np.ndarray
    c2: np.ndarray
    lambda_out: np.ndarray
    channel: str
    port: str
    omega_d: float
    p_in_mw: float

    @property
    def noise_min(self) -> np.ndarray:
        return self.c0 - np.abs(self.c2)

    @property
    def noise_max(self) -> np.ndarray:
        return self.c0 + np.abs(self.c2)

    @property
    def phase_degenerate(self) -> np.ndarray:
        return np.abs(self.c2) <= 1e-14 * np.maximum(self.c0, 1.0)

    @property
    def theta_star(self) -> np.ndarray:
        theta = 0.5 * (np.pi - np.angle(self.c2))
        return np.where(self.phase_degenerate, 0.0, theta)

    def noise(self, theta) -> np.ndarray:
        phase = np.exp(2j * np.asarray(theta))
        return self.c0 + (self.c2 * phase).real

    def surface(self, thetas) -> np.ndarray:
        phase = np.exp(2j * np.asarray(thetas))
        return self.c0[:, None] + (self.c2[:, None] * phase[None, :]).real

    def point(self, i: int) -> SqueezingPoint:
        return SqueezingPoint(omega=float(self.omega[i]),
                              c0=float(self.c0[i]), c2=complex(self.c2[i]))


def squeezing_spectrum(model: PolaritonModel, solutions, lambda_out,
                       channel: str = "custom", port: str = "photon",
                       omega_d: float = np.nan,
                       p_in_mw: float = np.nan) -> SqueezingResult:
    """Assemble a spectrum from precomputed fluctuation solutions."""
    lam = np.asarray(lambda_out, dtype=complex)
    omega = np.empty(len(solutions))
    c0 = np.empty(len(solutions))
    c2 = np.empty(len(solutions), dtype=complex)
    for i, sol in enumerate(solutions):
        pt = homodyne_point(model, sol, lam, port)
        omega[i], c0[i], c2[i] = sol.omega, pt.c0, pt.c2
    floor = (c0 - np.abs(c2)).min()
    if floor < -1e-9:
        warnings.warn(f"homodyne noise {floor:.3e} below zero: "
                      "unphysical spectrum", RuntimeWarning, stacklevel=2)
    return SqueezingResult(omega=omega, c0=c0, c2=c2, lambda_out=lam,
                           channel=channel, port=port, omega_d=omega_d,
                           p_in_mw=p_in_mw)


def solve_spectrum(model: PolaritonModel, state: SteadyState, omegas,
                   channel: str = "co", lambda_out=None,
                   port: str = "photon") -> SqueezingResult:
    """Solve the fluctuation system over a grid and detect one channel.

    ``channel`` picks the analyzer relative to the drive polarization;
    passing ``lambda_out`` explicitly overrides it and tags the result
    as custom.
    """
    if lambda_out is not None:
        channel = "custom"
        lam = np.asarray(lambda_out, dtype=complex)
    elif channel == "co":
        lam = co_polarized(state.lambda_in)
    elif channel == "cross":
        lam = cross_polarized(state.lambda_in)
    else:
        raise ValueError(f"unknown analyzer channel {channel!r}")
    gain = parametric_gain(model, state)
    solutions = [solve_fluctuations(model, state, float(w), gain=gain)
                 for w in np.asarray(omegas, dtype=float)]
    return squeezing_spectrum(model, solutions, lam, channel=channel,
                              port=port, omega_d=state.omega_d,
                              p_in_mw=state.p_in_mw)
