"""Screened 2D Coulomb interaction in a layered dielectric environment.

The monolayer is modeled as a homogeneous slab (out-of-plane dielectric
constant ``eps_perp``, thickness ``d``) separated on both sides from a
semi-infinite encapsulant (``eps_env``) by thin vacuum gaps ``h``.  The
charge sheet sits at the slab center; the momentum-dependent screening
eps(q) follows from the electrostatic surface admittance of the half
stack above (equivalently below) the sheet.

For a layer of thickness t and dielectric constant e on top of a stack
with admittance Y at its lower face, the admittance at the upper face is

    Y' = e (Y + e tanh(q t)) / (e + Y tanh(q t)),

starting from Y = eps_env for the semi-infinite region.  eps(q)
interpolates between eps_env at q -> 0 and eps_perp at q -> infinity.

The screened interaction is V(q) = e0^2 / (2 eps0 eps(q) q), in
meV nm^2 with q in nm^-1.
"""

from dataclasses import dataclass

import numpy as np

from .units import COULOMB_NM


@dataclass(frozen=True)
class Heterostructure:
    """Geometry and dielectric constants of the encapsulated monolayer."""

    d: float = 0.626
    eps_perp: float = 12.8
    h: float = 0.3
    eps_env: float = 4.5

    def __post_init__(self):
        if min(self.d, self.eps_perp, self.eps_env) <= 0 or self.h < 0:
            raise ValueError("layer thicknesses and dielectric constants must be positive")


def _ascend(Y, eps, t, q):
    th = np.tanh(q * t)
    return eps * (Y + eps * th) / (eps + Y * th)


def epsilon_q(q, het: Heterostructure):
    """Effective dielectric function eps(q); accepts scalars or arrays.

    Exact q = 0 entries evaluate to the environment constant.
    """
    q = np.asarray(q, dtype=float)
    Y = np.full_like(q, het.eps_env)
    Y = _ascend(Y, 1.0, het.h, q)
    Y = _ascend(Y, het.eps_perp, 0.5 * het.d, q)
    return Y if Y.ndim else float(Y)


def coulomb_q(q, het: Heterostructure):
    """Screened interaction V(q) = e0^2/(2 eps0 eps(q) q), meV nm^2.

    Diverges as 1/(eps_env q) for q -> 0; q must be positive.
    """
    q = np.asarray(q, dtype=float)
    return COULOMB_NM / (epsilon_q(q, het) * q)


def keldysh_epsilon_q(q, het: Heterostructure):
    """Thin-film limit eps_env (1 + r0 q), r0 = d eps_perp / (2 eps_env).

    Comparison curve only: agrees with epsilon_q to first order in q d
    when the gaps are removed (h = 0).
    """
    q = np.asarray(q, dtype=float)
    r0 = het.d * het.eps_perp / (2.0 * het.eps_env)
    return het.eps_env * (1.0 + r0 * q)


@dataclass(frozen=True)
class CoulombTable:
    """Log-log sampled V(q) for fast interpolation inside compiled kernels.

    Linear interpolation of log V against log q on a dense grid, with
    analytic 1/(eps q) tails outside the sampled window.  ``log_q`` and
    ``log_v`` are plain arrays so numba kernels can consume them.
    """

    log_q: np.ndarray
    log_v: np.ndarray
    eps_low: float
    eps_high: float

    @classmethod
    def build(cls, het: Heterostructure, q_min: float = 1e-4, q_max: float = 1e3,
              n: int = 4096) -> "CoulombTable":
        q = np.geomspace(q_min, q_max, n)
        v = coulomb_q(q, het)
        return cls(log_q=np.log(q), log_v=np.log(v),
                   eps_low=het.eps_env, eps_high=het.eps_perp)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        lq = np.log(np.clip(q, 1e-300, None))
        v = np.exp(np.interp(lq, self.log_q, self.log_v))
        lo = lq < self.log_q[0]
        hi = lq > self.log_q[-1]
        if np.any(lo):
            v = np.where(lo, COULOMB_NM / (self.eps_low * q), v)
        if np.any(hi):
            v = np.where(hi, COULOMB_NM / (self.eps_high * q), v)
        return v if v.ndim else float(v)
