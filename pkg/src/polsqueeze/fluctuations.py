"""Linearized quantum fluctuations around the driven fixed point.

Everything here lives in the frequency domain with the e^{i w t} transform
applied to daggered and undaggered operators alike, so a creation-operator
equation picks up -hbar*omega on the left and the undaggered partner rows
are the complex conjugates of the daggered rows evaluated at -omega.  The
multiparticle fluctuations (pair, two-photon and biexciton channels) are
eliminated exactly: their inverse Green matrix is factorized once per
frequency and applied to the handful of condensate-localized source columns,
which yields the exciton self-energy, the dressed Rabi coupling and the two
dressed noise couplings of the reduced two-valley problem.  The reduced
problem itself is an 8x8 complex solve per frequency.

Index bookkeeping for the pair channel: valley pairs are ordered
(KK, KK', K'K, K'K') and within each pair the radial grid runs with the
q = 0 head first.  The head node is a single lattice mode, not a quadrature
cell; its fluctuation is condensate-enhanced while the smooth-q components
are suppressed by the quantization area.  After scaling both to order one,
the head row keeps only its local detuning and the two-photon diagonal,
head columns couple at kernel point value (dual column divided by the head
weight), and the smooth rows keep the usual quadrature weights.  The
neglected feedback is down by the inverse mode count, ~1e-7 here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .units import HBAR
from .steady import PolaritonModel, SingularBlockError, SteadyState, _pair_detunings

_VP = ((0, 0), (0, 1), (1, 0), (1, 1))
_SWAP = (0, 2, 1, 3)
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class GainMatrix:
    """Valley-space parametric gain and its physical decomposition.

    ``total`` couples dP to the conjugate fluctuation dP^dag in the reduced
    exciton equation.  The three contributions sum to it exactly:
    ``mean_field`` (diagonal, from the contact exciton-exciton term),
    ``biexciton`` (pair-mediated, the intervalley part carries the bound
    state) and ``pauli`` (diagonal, phase-space filling against the pair
    correlations and the condensate).  ``bound`` is the bound-state slice of
    the antisymmetric-sector biexciton term, kept for diagnostics.
    """

    total: np.ndarray
    mean_field: np.ndarray
    biexciton: np.ndarray
    bound: np.ndarray
    pauli: np.ndarray


@dataclass(frozen=True)
class SelfEnergy:
    """Frequency-resolved couplings of the reduced exciton row at one omega.

    ``sigma`` shifts the exciton inverse propagator, ``omega_r`` is the
    dressed exciton-photon coupling, ``gamma_x`` and ``gamma_p`` are the
    dressed noise couplings (the full sqrt(2 Gamma) matrices, 1/sqrt(fs));
    each is a 2x2 complex valley matrix.
    """

    omega: float
    sigma: np.ndarray
    omega_r: np.ndarray
    gamma_x: np.ndarray
    gamma_p: np.ndarray


@dataclass(frozen=True)
class FluctuationSolution:
    """Intracavity response to the eight vacuum noise channels at one omega.

    ``transfer`` maps the noise vector (da_in^dag K, K', dP_in^dag K, K',
    da_in K, K', dP_in K, K') to the intracavity vector (da^dag K, K',
    dP^dag K, K', da K, K', dP K, K').  ``matrix`` and ``noise`` are the
    assembled system and source matrices, kept for diagnostics; ``forward``
    and ``backward`` are the self-energy sets at +omega and -omega.
    """

    omega: float
    transfer: np.ndarray
    matrix: np.ndarray
    noise: np.ndarray
    forward: SelfEnergy
    backward: SelfEnergy
    gain: GainMatrix


def _vp_index(z1: int, z2: int) -> int:
    return 2 * z1 + z2


def parametric_gain(model: PolaritonModel, state: SteadyState) -> GainMatrix:
    """Valley-space gain matrix of the fixed point, decomposed by origin."""
    block = state.block
    sat = (block.c_intra * model.omega_tilde[None, :]) @ model.grid.w \
        + model.omega_tilde[0] * state.amp_a * state.amp_p
    pauli = -np.diag(sat)
    mean_field = np.diag(model.w0 * state.amp_p ** 2)
    biex = np.zeros((2, 2), dtype=complex)
    biex[0, 0] = block.b_intra[0] @ model.plus.w_source
    biex[1, 1] = block.b_intra[1] @ model.plus.w_source
    cross = block.b_cross_plus @ model.plus.w_source \
        + block.b_cross_minus @ model.minus.w_source
    biex[0, 1] = biex[1, 0] = cross
    bound = np.zeros((2, 2), dtype=complex)
    mask = model.minus.energies < 2.0 * model.e_x0
    bnd = block.b_cross_minus[mask] @ model.minus.w_source[mask]
    bound[0, 1] = bound[1, 0] = bnd
    return GainMatrix(total=mean_field + biex + pauli, mean_field=mean_field,
                      biexciton=biex, bound=bound, pauli=pauli)


def _mode_kernel(proj, dual, w_head, den):
    # Pair-mode elimination kernel at shifted energies.  The q = 0 column is
    # a point coupling to the condensate-scaled head; the head row gets no
    # smooth feedback (area-suppressed), so it is zeroed.
    dmod = dual.copy()
    dmod[:, 0] = dmod[:, 0] / w_head
    km = proj @ (dmod / den[:, None])
    km[0, :] = 0.0
    return km


def _sector_dens(model: PolaritonModel, omega: float, omega_d: float):
    den_p = omega + model.plus.energies + 2j * model.hg_x - 2.0 * omega_d
    den_m = omega + model.minus.energies + 2j * model.hg_x - 2.0 * omega_d
    return den_p, den_m


def pair_green_matrix(model: PolaritonModel, omega: float,
                      omega_d: float) -> np.ndarray:
    """Inverse Green matrix of the pair fluctuations at hbar*omega (meV).

    Rows and columns run over the four valley pairs times the radial grid.
    Both the two-photon channel and the pair modes act as identity plus
    valley swap on the pair label, the latter weighted per sector by the
    row's exchange parity.
    """
    n = model.grid.n
    epd, exd = _pair_detunings(model, omega_d)
    den2 = omega + 2.0 * epd
    den_p, den_m = _sector_dens(model, omega, omega_d)
    floor = min(np.min(np.abs(den2)), np.min(np.abs(den_p)),
                np.min(np.abs(den_m)))
    if floor < 1e-10:
        raise SingularBlockError(
            "pair fluctuation propagator is singular at this frequency")
    cden = omega + epd + exd
    dco = model.omega_q ** 2 / den2
    km_p = _mode_kernel(model.proj_plus, model.dual_plus,
                        model.grid.w[0], den_p)
    km_m = _mode_kernel(model.proj_minus, model.dual_minus,
                        model.grid.w[0], den_m)
    g = np.zeros((4 * n, 4 * n), dtype=complex)
    for vp in range(4):
        rows = slice(vp * n, vp * n + n)
        g[rows, rows] += np.diag(cden)
        pref_p, pref_m = (1.0, 0.0) if vp in (0, 3) else (0.5, 0.5)
        for target in (vp, _SWAP[vp]):
            cols = slice(target * n, target * n + n)
            g[rows, cols] -= np.diag(dco) + pref_p * km_p + pref_m * km_m
    return g


def exciton_feedback(model: PolaritonModel, state: SteadyState,
                     omega: float) -> np.ndarray:
    """Coupling of the pair fluctuations back into the exciton rows.

    Returns a (2, 4n) array of contraction-ready rows, one per valley:
    quadrature weights on the smooth nodes, point values at the head.
    """
    n = model.grid.n
    pc = np.conj(state.amp_p)
    wt = model.grid.w.copy()
    wt[0] = 1.0
    pauli = wt * model.omega_tilde
    den_p, den_m = _sector_dens(model, omega, state.omega_d)
    qm = {}
    for sign, sector, dual, den in ((+1, model.plus, model.dual_plus, den_p),
                                    (-1, model.minus, model.dual_minus, den_m)):
        dmod = dual.copy()
        dmod[:, 0] = dmod[:, 0] / model.grid.w[0]
        qm[sign] = (sector.w_source / den) @ dmod
    q = np.zeros((2, 4 * n), dtype=complex)
    for z in (0, 1):
        zb = 1 - z
        own = _vp_index(z, z)
        q[z, own * n:own * n + n] = -(pauli * pc[z] + 2.0 * pc[z] * qm[+1])
        half = -0.5 * pc[zb] * (qm[+1] + qm[-1])
        for vp in (_vp_index(z, zb), _vp_index(zb, z)):
            q[z, vp * n:vp * n + n] = half
    return q


def _phibar_head(model: PolaritonModel):
    w0 = model.grid.w[0]
    return {+1: model.plus.left[:, 0] / w0, -1: model.minus.left[:, 0] / w0}


def _factorized(g: np.ndarray, what: str):
    anorm = np.linalg.norm(g, 1)
    lu, piv = lu_factor(g)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info == 0 and 0.0 < rcond < 1.0 / _COND_LIMIT:
        warnings.warn(f"{what} has condition number {1.0 / rcond:.2e}; "
                      "results may lose precision", RuntimeWarning,
                      stacklevel=3)
    return lu, piv


def _bare_self_energy(model: PolaritonModel, omega: float) -> SelfEnergy:
    eye = np.eye(2, dtype=complex)
    return SelfEnergy(omega=omega, sigma=np.zeros((2, 2), dtype=complex),
                      omega_r=model.omega0 * eye,
                      gamma_x=np.sqrt(2.0 * model.hg_x / HBAR) * eye,
                      gamma_p=np.zeros((2, 2), dtype=complex))


def assemble_self_energy(model: PolaritonModel, state: SteadyState,
                         omega: float) -> SelfEnergy:
    """Eliminated couplings of the reduced exciton row at hbar*omega (meV).

    One dense factorization of the pair Green matrix serves six source
    columns: four unit heads (per valley pair) feeding the self-energy, the
    dressed Rabi coupling and the dressed photon-noise coupling, plus two
    biexciton-noise columns feeding the dressed exciton-noise coupling.
    """
    a = state.amp_a
    p = state.amp_p
    a_in = state.a_in
    if np.max(np.abs(p)) == 0.0 and np.max(np.abs(a)) == 0.0 \
            and np.max(np.abs(a_in)) == 0.0:
        return _bare_self_energy(model, omega)
    n = model.grid.n
    c_p = 1j * np.sqrt(2.0 * HBAR * model.hg_p)
    s2gp = np.sqrt(2.0 * model.hg_p / HBAR)
    s2gx = np.sqrt(2.0 * model.hg_x / HBAR)
    dphot = 1.0 / (omega + 2.0 * (model.e_p0 + 1j * model.hg_p
                                  - state.omega_d))
    den = {}
    den[+1], den[-1] = _sector_dens(model, omega, state.omega_d)
    phibar = _phibar_head(model)
    proj = {+1: model.proj_plus, -1: model.proj_minus}

    g = pair_green_matrix(model, omega, state.omega_d)
    lu = _factorized(g, "pair fluctuation block")
    q = exciton_feedback(model, state, omega)

    # Source columns: four unit heads, then one biexciton-noise column per
    # noise valley.  The head entries are condensate-localized and enter
    # measure free; the smooth entries are per-row point sources.
    rhs = np.zeros((4 * n, 6), dtype=complex)
    for vp in range(4):
        rhs[vp * n, vp] = 1.0
    for zp in (0, 1):
        col = 4 + zp
        for vp, (z2, z2p) in enumerate(_VP):
            seg = vp * n
            if z2p == zp:
                rhs[seg, col] += a[z2]
            vec = np.zeros(n, dtype=complex)
            for sign in (+1, -1):
                pref = 0.25 * (1.0 + sign * (z2 == z2p))
                weight = p[z2] * (z2p == zp) + p[z2p] * (z2 == zp)
                if weight != 0.0:
                    vec -= pref * weight * (proj[sign]
                                            @ (phibar[sign] / den[sign]))
            vec[0] = 0.0
            rhs[seg + 1:seg + n, col] += vec[1:]
    sols = lu_solve(lu, -rhs)
    qk = q @ sols  # (2, 6): valley row against each source column

    sigma = np.zeros((2, 2), dtype=complex)
    omega_r = model.omega0 * np.eye(2, dtype=complex)
    gamma_p = np.zeros((2, 2), dtype=complex)
    gamma_x = np.eye(2, dtype=complex)
    for z in (0, 1):
        for zp in (0, 1):
            sigma[z, zp] = c_p * (a_in[0] * qk[z, _vp_index(0, zp)]
                                  + a_in[1] * qk[z, _vp_index(1, zp)])
            gamma_x[z, zp] += qk[z, 4 + zp]
            for vp, (z2, z2p) in enumerate(_VP):
                omega_r[z, zp] -= c_p * model.omega0 * dphot * qk[z, vp] \
                    * (a_in[z2] * (zp == z2p) + a_in[z2p] * (zp == z2))
                gamma_p[z, zp] += s2gp * qk[z, vp] \
                    * (p[z2p] * (zp == z2) - model.omega0 * dphot
                       * (a[z2] * (zp == z2p) + a[z2p] * (zp == z2)))

    # Direct biexciton-noise feed of the exciton row, bypassing the pair
    # Green function: the pair modes dress the exciton noise locally.
    pc = np.conj(p)
    s_noise = {sign: (model.plus.w_source if sign > 0
                      else model.minus.w_source)
               @ (phibar[sign] / den[sign]) for sign in (+1, -1)}
    for z in (0, 1):
        for zp in (0, 1):
            val = 0.0
            for z1 in (0, 1):
                for sign in (+1, -1):
                    pref = 0.5 * (1.0 + sign * (z == z1))
                    val -= 0.5 * pref * s_noise[sign] * pc[z1] \
                        * (p[z] * (zp == z1) + p[z1] * (zp == z))
            gamma_x[z, zp] += val
    gamma_x = s2gx * gamma_x
    return SelfEnergy(omega=omega, sigma=sigma, omega_r=omega_r,
                      gamma_x=gamma_x, gamma_p=gamma_p)


def solve_fluctuations(model: PolaritonModel, state: SteadyState,
                       omega: float, *, gain: GainMatrix | None = None,
                       forward: SelfEnergy | None = None,
                       backward: SelfEnergy | None = None
                       ) -> FluctuationSolution:
    """Solve the reduced doubled system at hbar*omega (meV).

    ``gain``, ``forward`` and ``backward`` override the assembled pieces
    when given (the backward set belongs to -omega); by default everything
    is built from the model and the fixed point.
    """
    if gain is None:
        gain = parametric_gain(model, state)
    if forward is None:
        forward = assemble_self_energy(model, state, omega)
    if backward is None:
        backward = assemble_self_energy(model, state, -omega)
    eye = np.eye(2, dtype=complex)
    exd0 = model.e_x0 + 1j * model.hg_x - state.omega_d
    epd0 = model.e_p0 + 1j * model.hg_p - state.omega_d
    c_p = 1j * np.sqrt(2.0 * HBAR * model.hg_p)

    m = np.zeros((8, 8), dtype=complex)
    nmat = np.zeros((8, 8), dtype=complex)
    # daggered photon rows
    m[0:2, 0:2] = (omega + epd0) * eye
    m[0:2, 2:4] = model.omega0 * eye
    nmat[0:2, 0:2] = c_p * eye
    # daggered exciton rows
    m[2:4, 0:2] = forward.omega_r
    m[2:4, 2:4] = (omega + exd0) * eye + forward.sigma
    m[2:4, 6:8] = gain.total
    nmat[2:4, 0:2] = 1j * HBAR * forward.gamma_p
    nmat[2:4, 2:4] = 1j * HBAR * forward.gamma_x
    # undaggered rows: conjugated coefficients at -omega
    m[4:6, 4:6] = np.conj(-omega + epd0) * eye
    m[4:6, 6:8] = model.omega0 * eye
    nmat[4:6, 4:6] = np.conj(c_p) * eye
    m[6:8, 4:6] = np.conj(backward.omega_r)
    m[6:8, 6:8] = np.conj((-omega + exd0) * eye + backward.sigma)
    m[6:8, 2:4] = np.conj(gain.total)
    nmat[6:8, 4:6] = -1j * HBAR * np.conj(backward.gamma_p)
    nmat[6:8, 6:8] = -1j * HBAR * np.conj(backward.gamma_x)

    cond = np.linalg.cond(m)
    if cond > _COND_LIMIT:
        warnings.warn(f"reduced fluctuation system has condition number "
                      f"{cond:.2e}; results may lose precision",
                      RuntimeWarning, stacklevel=2)
    try:
        transfer = np.linalg.solve(m, -nmat)
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError(
            "reduced fluctuation system is singular") from exc
    return FluctuationSolution(omega=omega, transfer=transfer, matrix=m,
                               noise=nmat, forward=forward,
                               backward=backward, gain=gain)
