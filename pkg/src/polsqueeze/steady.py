"""Driven steady state of the photon-exciton-pair hierarchy.

Under a coherent pump the rotating-frame expectation values settle
into a fixed point.  The pair correlations (two-exciton modes in both
spin sectors, exciton-photon pairs, two-photon amplitudes) obey
equations that are exactly linear once the macroscopic photon and
exciton amplitudes of each valley are frozen, so the solver nests: an
outer Newton iteration over the four complex amplitudes eliminates
the correlation block analytically at every residual evaluation.
Valley exchange splits the block into two intravalley channels and
one intervalley channel that never mix; the intravalley channels only
see the spin-symmetric sector because the antisymmetric combination
of identical valley indices has no source.

Energies are meV, momenta nm^-1.  The macroscopic amplitudes carry
sheet-density units nm^-1 so the pump power acts per unit area; pair
correlations are dimensionless densities on the same footing.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import lu_factor, lu_solve

from .biexciton import (
    BiexcitonSector,
    PairKernels,
    diagonalize_sector,
    pair_kernels,
    pair_radius,
    pair_tables,
    photon_projections,
)
from .couplings import (
    drive_amplitude,
    exchange_constant,
    exciton_energy,
    mode_scale,
    oscillator_sum,
    pauli_overlap,
    photon_energy,
)
from .grids import RadialGrid, log_grid
from .screening import CoulombTable, Heterostructure, epsilon_q
from .units import HBAR
from .wannier import ExcitonState, solve_exciton


class SingularBlockError(RuntimeError):
    """The correlation block is at an exact pole of the drive."""


class ConvergenceError(RuntimeError):
    """Fixed-point search failed; carries the residual history."""

    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = tuple(history)


# ---------------------------------------------------------------------------
# assembled cavity model


@dataclass(frozen=True)
class PolaritonModel:
    """One cavity configuration with every coupling table in place.

    The heavy members (exciton state, pair kernels, sector modes) are
    photon-independent, so a detuning scan can reuse them through
    :meth:`at_detuning` and only rebuild the light-coupling tables.
    Pair-grid arrays all share the grid layout, with the q = 0 head
    node first.
    """

    exciton: ExcitonState
    grid: RadialGrid
    minus: BiexcitonSector
    plus: BiexcitonSector
    kernels: PairKernels
    overlap_raw: np.ndarray  # 2 sum phi phi phi on the pair grid
    w0: float                # contact exchange energy, meV nm^2
    e_x0: float
    e_p0: float
    n_idx: float
    mass_total: float
    omega0: float
    hg_p: float              # hbar gamma_p, meV
    hg_x: float
    area_um2: float
    omega_q: np.ndarray      # Rabi coupling on the pair grid
    a_q: np.ndarray          # per-pair photon coupling, meV nm^2
    omega_tilde: np.ndarray  # saturation coupling, meV nm^2
    ep_q: np.ndarray
    ex_q: np.ndarray
    proj_minus: np.ndarray
    dual_minus: np.ndarray
    proj_plus: np.ndarray
    dual_plus: np.ndarray

    @property
    def delta_c(self) -> float:
        return self.e_p0 - self.e_x0

    def at_detuning(self, delta_c: float) -> "PolaritonModel":
        """Same heterostructure and exciton, new cavity offset."""
        tables = _photon_tables(self.exciton, self.grid, self.kernels,
                                self.minus, self.plus, self.overlap_raw,
                                self.omega0, self.e_x0 + delta_c,
                                self.n_idx, self.mass_total)
        return dataclasses.replace(self, e_p0=self.e_x0 + delta_c, **tables)


def _photon_tables(state, grid, kern, minus, plus, overlap_raw,
                   omega0, e_p0, n_idx, mass_total):
    scale = mode_scale(grid.k, e_p0, n_idx)
    a_q = omega0 / oscillator_sum(state) * scale
    omega_q = omega0 * scale
    proj_m, dual_m = photon_projections(minus, kern, omega_q, a_q)
    proj_p, dual_p = photon_projections(plus, kern, omega_q, a_q)
    return dict(omega_q=omega_q, a_q=a_q,
                omega_tilde=a_q * np.asarray(overlap_raw),
                ep_q=photon_energy(grid.k, e_p0, n_idx),
                ex_q=exciton_energy(grid.k, state.energy, mass_total),
                proj_minus=proj_m, dual_minus=dual_m,
                proj_plus=proj_p, dual_plus=dual_p)


def build_model(*, omega0: float = 20.0, delta_c: float = 0.0,
                hg_p: float = 9.0, hg_x: float = 0.8,
                area_um2: float = 9.0, n_idx: float = 3.0,
                e_gap: float = 2480.0, m_e: float = 0.43, m_h: float = 0.54,
                hetero: Heterostructure | None = None,
                n_exciton: int = 512, k_span: tuple = (1e-4, 40.0),
                n_pair: int = 128, q_max_bohr: float = 8.0,
                table_sizes: dict | None = None,
                kernel_angles: dict | None = None) -> PolaritonModel:
    """Assemble the full cavity model from material parameters.

    ``q_max_bohr`` caps the pair grid in units of the inverse pair
    radius.  ``table_sizes`` and ``kernel_angles`` pass through to the
    pair-table and pair-kernel builders; the defaults are production
    quality and dominate the construction time.
    """
    het = hetero if hetero is not None else Heterostructure()
    pot = CoulombTable.build(het)
    eps0 = float(epsilon_q(1e-9, het))
    mass_total = m_e + m_h
    mu = m_e * m_h / mass_total
    alpha = m_e / mass_total

    state = solve_exciton(log_grid(k_span[0], k_span[1], n_exciton),
                          pot, eps0, mu, e_gap)
    a = pair_radius(state)
    grid = log_grid(1e-3 / a, q_max_bohr / a, n_pair, head=True)
    tabs = pair_tables(state, pot, alpha, float(grid.k[-1]),
                       **(table_sizes or {}))
    kern = pair_kernels(state, pot, grid, alpha, tables=tabs,
                        **(kernel_angles or {}))
    minus = diagonalize_sector(kern, -1, state.energy, mass_total)
    plus = diagonalize_sector(kern, +1, state.energy, mass_total)

    e_p0 = state.energy + delta_c
    overlap_raw = pauli_overlap(state, grid.k, alpha)
    tables = _photon_tables(state, grid, kern, minus, plus, overlap_raw,
                            omega0, e_p0, n_idx, mass_total)
    return PolaritonModel(exciton=state, grid=grid, minus=minus, plus=plus,
                          kernels=kern, overlap_raw=overlap_raw,
                          w0=exchange_constant(state, pot, eps0),
                          e_x0=state.energy, e_p0=e_p0, n_idx=n_idx,
                          mass_total=mass_total, omega0=omega0,
                          hg_p=hg_p, hg_x=hg_x, area_um2=area_um2,
                          **tables)


# ---------------------------------------------------------------------------
# correlation block at frozen amplitudes


@dataclass(frozen=True)
class BlockState:
    """Pair correlations sourced by frozen macroscopic amplitudes.

    Intravalley arrays are indexed by valley (K first); the
    intervalley channel is symmetric under valley exchange and stored
    once.  The antisymmetric sector of identical valleys has no source
    and stays zero, so it is not stored.
    """

    c_intra: np.ndarray       # (2, n) exciton-photon pairs
    d_intra: np.ndarray       # (2, n) two-photon amplitudes
    b_intra: np.ndarray       # (2, m+) symmetric-sector pair modes
    c_cross: np.ndarray       # (n,)
    d_cross: np.ndarray       # (n,)
    b_cross_plus: np.ndarray  # (m+,)
    b_cross_minus: np.ndarray


def _pair_detunings(model: PolaritonModel, omega_d: float):
    epd = model.ep_q + 1j * model.hg_p - omega_d
    exd = model.ex_q + 1j * model.hg_x - omega_d
    return epd, exd


class _BlockOperator:
    """Eliminated correlation block at one drive frequency.

    The block matrix depends on the drive frequency alone, so the
    Newton loop factorizes it once and every residual evaluation
    reduces to back-substitution.  Elimination order: the two-photon
    amplitude follows the pair correlation algebraically, the pair
    modes follow through their diagonal detunings, and the remaining
    dense system in C is LU-factorized per channel.
    """

    def __init__(self, model: PolaritonModel, omega_d: float):
        epd, exd = _pair_detunings(model, omega_d)
        exxd_p = model.plus.energies + 2j * model.hg_x - 2.0 * omega_d
        exxd_m = model.minus.energies + 2j * model.hg_x - 2.0 * omega_d
        lo = min(np.abs(epd).min(), np.abs(exxd_p).min(),
                 np.abs(exxd_m).min())
        if lo < 1e-10:
            raise SingularBlockError(
                "drive sits on an undamped pole of the pair block")
        self.model = model
        self.epd = epd
        self.exxd_p = exxd_p
        self.exxd_m = exxd_m
        cd = np.diag(epd + exd - model.omega_q**2 / epd)
        coup_p = (model.proj_plus / exxd_p[None, :]) @ model.dual_plus
        coup_m = (model.proj_minus / exxd_m[None, :]) @ model.dual_minus
        self.lu_intra = lu_factor(cd - 2.0 * coup_p)
        self.lu_cross = lu_factor(cd - coup_p - coup_m)
        # constant rhs shapes per unit amplitude product
        self.src_p = model.proj_plus @ (model.plus.w_source_dual / exxd_p)
        self.src_m = model.proj_minus @ (model.minus.w_source_dual / exxd_m)

    def solve(self, amp_p: np.ndarray) -> BlockState:
        m = self.model
        pp = np.asarray(amp_p, dtype=complex) ** 2
        cross = amp_p[0] * amp_p[1]
        if not np.any(pp) and cross == 0.0:
            n, mp, mm = m.grid.n, self.exxd_p.size, self.exxd_m.size
            z = np.zeros
            return BlockState(z((2, n), complex), z((2, n), complex),
                              z((2, mp), complex), z(n, complex),
                              z(n, complex), z(mp, complex), z(mm, complex))
        rhs = (0.5 * m.omega_tilde + self.src_p)[:, None] * pp[None, :]
        c_intra = lu_solve(self.lu_intra, rhs).T
        c_cross = lu_solve(self.lu_cross,
                           0.5 * (self.src_p + self.src_m) * cross)
        b_intra = -(m.plus.w_source_dual[None, :] * pp[:, None]
                    + 2.0 * c_intra @ m.dual_plus.T) / self.exxd_p[None, :]
        b_cross_p = -(0.5 * m.plus.w_source_dual * cross
                      + m.dual_plus @ c_cross) / self.exxd_p
        b_cross_m = -(0.5 * m.minus.w_source_dual * cross
                      + m.dual_minus @ c_cross) / self.exxd_m
        conv = -m.omega_q / self.epd
        return BlockState(c_intra=c_intra, d_intra=conv[None, :] * c_intra,
                          b_intra=b_intra, c_cross=c_cross,
                          d_cross=conv * c_cross, b_cross_plus=b_cross_p,
                          b_cross_minus=b_cross_m)


def solve_multiparticle_block(model: PolaritonModel, omega_d: float,
                              amp_p: np.ndarray) -> BlockState:
    """Correlations at frozen exciton amplitudes (one per valley).

    The photon amplitude never sources the pair block directly, so it
    does not appear.  Raises :class:`SingularBlockError` when the
    drive hits an undamped pole or the eliminated system is singular.
    """
    block = _BlockOperator(model, omega_d).solve(np.asarray(amp_p, complex))
    if not all(np.all(np.isfinite(f)) for f in
               (block.c_intra, block.c_cross, block.b_intra,
                block.b_cross_plus, block.b_cross_minus)):
        raise SingularBlockError("pair block solve returned non-finite values")
    return block


def _block_residual(model: PolaritonModel, omega_d: float,
                    amp_p: np.ndarray, block: BlockState) -> float:
    """Backward error of the raw (unreduced) block equations."""
    epd, exd = _pair_detunings(model, omega_d)
    exxd = {+1: model.plus.energies + 2j * model.hg_x - 2.0 * omega_d,
            -1: model.minus.energies + 2j * model.hg_x - 2.0 * omega_d}
    dual = {+1: model.dual_plus, -1: model.dual_minus}
    proj = {+1: model.proj_plus, -1: model.proj_minus}
    wbar = {+1: model.plus.w_source_dual, -1: model.minus.w_source_dual}

    worst = 0.0

    def family(res, *terms):
        nonlocal worst
        scale = max((np.abs(t).max() for t in terms), default=0.0)
        if scale > 0.0:
            worst = max(worst, np.abs(res).max() / scale)

    for z in range(2):
        pp = amp_p[z] ** 2
        c, d, b = block.c_intra[z], block.d_intra[z], block.b_intra[z]
        t = [(epd + exd) * c, model.omega_q * d,
             -0.5 * model.omega_tilde * pp, proj[+1] @ b]
        family(sum(t), *t)
        t = [2.0 * model.omega_q * c, 2.0 * epd * d]
        family(sum(t), *t)
        t = [exxd[+1] * b, wbar[+1] * pp, 2.0 * (dual[+1] @ c)]
        family(sum(t), *t)
    pp = amp_p[0] * amp_p[1]
    c, d = block.c_cross, block.d_cross
    bsec = {+1: block.b_cross_plus, -1: block.b_cross_minus}
    t = [(epd + exd) * c, model.omega_q * d,
         proj[+1] @ bsec[+1], proj[-1] @ bsec[-1]]
    family(sum(t), *t)
    t = [2.0 * model.omega_q * c, 2.0 * epd * d]
    family(sum(t), *t)
    for s in (+1, -1):
        t = [exxd[s] * bsec[s], 0.5 * wbar[s] * pp, dual[s] @ c]
        family(sum(t), *t)
    return worst


# ---------------------------------------------------------------------------
# macroscopic amplitude rows and the nested fixed-point search


@dataclass(frozen=True)
class SteadyState:
    """Rotating-frame fixed point of the driven cavity.

    ``amp_a`` and ``amp_p`` hold the daggered photon and exciton
    amplitudes per valley in density units nm^-1; ``block`` the pair
    correlations at those amplitudes.  ``residual`` is the backward
    error of the complete equation set relative to the largest term
    of each row family; ``history`` records it along the solve path.
    """

    omega_d: float
    p_in_mw: float
    lambda_in: np.ndarray
    a_in: np.ndarray
    amp_a: np.ndarray
    amp_p: np.ndarray
    block: BlockState
    residual: float
    history: tuple
    strategy: str


def _drive_term(model: PolaritonModel, a_in: np.ndarray) -> np.ndarray:
    # i hbar sqrt(2 gamma_p) <a_in^dag>, in meV nm^-1
    return 1j * np.sqrt(2.0 * HBAR * model.hg_p) * a_in


def _amplitude_rows(model: PolaritonModel, omega_d: float, a_in: np.ndarray,
                    amp_a: np.ndarray, amp_p: np.ndarray, block: BlockState):
    epd0 = model.e_p0 + 1j * model.hg_p - omega_d
    exd0 = model.e_x0 + 1j * model.hg_x - omega_d
    row_a = epd0 * amp_a + model.omega0 * amp_p + _drive_term(model, a_in)
    # phase-space filling: integrated pair correlation plus the
    # coherent q = 0 product, both against the saturation coupling
    sat = (block.c_intra * model.omega_tilde[None, :]) @ model.grid.w \
        + model.omega_tilde[0] * amp_a * amp_p
    pbar = np.conj(amp_p)
    row_p = (exd0 * amp_p + model.omega0 * amp_a
             + model.w0 * np.abs(amp_p) ** 2 * amp_p
             - sat * pbar
             + (block.b_intra @ model.plus.w_source) * pbar
             + (block.b_cross_plus @ model.plus.w_source
                + block.b_cross_minus @ model.minus.w_source) * pbar[::-1])
    return row_a, row_p


def _linear_seed(model: PolaritonModel, omega_d: float,
                 a_in: np.ndarray) -> np.ndarray:
    epd0 = model.e_p0 + 1j * model.hg_p - omega_d
    exd0 = model.e_x0 + 1j * model.hg_x - omega_d
    det = epd0 * exd0 - model.omega0**2
    if abs(det) < 1e-30:
        return np.zeros(4, dtype=complex)
    drv = _drive_term(model, a_in)
    return np.concatenate([-drv * exd0 / det, drv * model.omega0 / det])


def _pack(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def _unpack(x: np.ndarray) -> np.ndarray:
    return x[:4] + 1j * x[4:]


def _residual_vector(model, op, omega_d, a_in, x):
    z = _unpack(x)
    block = op.solve(z[2:])
    row_a, row_p = _amplitude_rows(model, omega_d, a_in, z[:2], z[2:], block)
    return _pack(np.concatenate([row_a, row_p])), block


def _newton(model, op, omega_d, a_in, x0, tol, max_iter, history):
    scale = max(np.abs(_drive_term(model, a_in)).max(), 1e-300)
    x = np.asarray(x0, dtype=float)
    f, block = _residual_vector(model, op, omega_d, a_in, x)
    best = np.abs(f).max() / scale
    history.append(("newton", best))
    for _ in range(max_iter):
        if best < tol:
            return x, block, True
        jac = np.empty((8, 8))
        xs = max(np.abs(x).max(), 1e-300)
        for j in range(8):
            h = 1e-7 * max(abs(x[j]), 1e-3 * xs)
            xp = x.copy()
            xp[j] += h
            fp, _ = _residual_vector(model, op, omega_d, a_in, xp)
            jac[:, j] = (fp - f) / h
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return x, block, False
        lam, improved = 1.0, False
        for _ in range(14):
            xt = x + lam * step
            ft, bt = _residual_vector(model, op, omega_d, a_in, xt)
            nt = np.abs(ft).max() / scale
            if nt < (1.0 - 1e-4 * lam) * best:
                x, f, block, best, improved = xt, ft, bt, nt, True
                break
            lam *= 0.5
        history.append(("newton", best))
        if not improved:
            return x, block, False
    return x, block, best < tol


def _propagate(model, op, omega_d, a_in, tol, history):
    """Ramp the pump from vacuum and follow the amplitudes in time.

    The correlation block relaxes on the same timescale as the
    amplitudes, so it is carried along adiabatically; only the
    endpoint matters and that is where the elimination is exact.
    """
    scale = max(np.abs(_drive_term(model, a_in)).max(), 1e-300)
    t_ramp = 10.0 * HBAR / model.hg_p
    span = 30.0 * HBAR / min(model.hg_p, model.hg_x)

    def rhs(t, x):
        z = _unpack(x)
        block = op.solve(z[2:])
        ramp = min(1.0, t / t_ramp)
        row_a, row_p = _amplitude_rows(model, omega_d, a_in * ramp,
                                       z[:2], z[2:], block)
        return _pack((1j / HBAR) * np.concatenate([row_a, row_p]))

    seed = _linear_seed(model, omega_d, a_in)
    atol = 1e-13 * max(np.abs(seed).max(), 1e-300)
    x = np.zeros(8)
    t0 = 0.0
    best = np.inf
    for _ in range(6):
        sol = solve_ivp(rhs, (t0, t0 + span), x, method="RK45",
                        rtol=1e-10, atol=atol)
        if not sol.success:
            raise ConvergenceError("time propagation failed: " + sol.message,
                                   history)
        x, t0 = sol.y[:, -1], sol.t[-1]
        f, block = _residual_vector(model, op, omega_d, a_in, x)
        best = np.abs(f).max() / scale
        history.append(("propagate", best))
        if best < tol:
            return x, block, True
    return x, block, best < tol


def solve_steady(model: PolaritonModel, omega_d: float, p_in_mw: float,
                 lambda_in=None, *, tol: float = 1e-10, max_newton: int = 40,
                 method: str = "auto") -> SteadyState:
    """Find the driven fixed point at pump energy ``omega_d`` (meV).

    ``lambda_in`` is the valley polarization of the pump, normalized
    internally; equal weights by default.  ``method`` picks the outer
    solver: "newton", "propagate", or "auto" which falls back to
    propagation with a Newton polish when plain Newton stalls.  A
    residual above ``tol`` at the end raises :class:`ConvergenceError`
    with the residual history attached.
    """
    if method not in ("auto", "newton", "propagate"):
        raise ValueError("method must be auto, newton or propagate")
    lam = np.full(2, np.sqrt(0.5), dtype=complex) if lambda_in is None \
        else np.asarray(lambda_in, dtype=complex)
    if lam.shape != (2,) or not np.linalg.norm(lam) > 0.0:
        raise ValueError("lambda_in must be a nonzero two-component vector")
    lam = lam / np.linalg.norm(lam)

    if p_in_mw < 0.0:
        raise ValueError("pump power must be nonnegative")
    a_in = lam * drive_amplitude(p_in_mw, model.area_um2, model.e_p0)
    op = _BlockOperator(model, omega_d)
    if p_in_mw == 0.0:
        zero = np.zeros(2, dtype=complex)
        return SteadyState(omega_d=omega_d, p_in_mw=0.0, lambda_in=lam,
                           a_in=a_in, amp_a=zero, amp_p=zero.copy(),
                           block=op.solve(zero), residual=0.0,
                           history=(), strategy="undriven")

    history: list = []
    strategy = method
    if method in ("auto", "newton"):
        x0 = _pack(_linear_seed(model, omega_d, a_in))
        x, block, ok = _newton(model, op, omega_d, a_in, x0, tol,
                               max_newton, history)
        if not ok and method == "auto":
            strategy = "propagate+newton"
            x, block, ok = _propagate(model, op, omega_d, a_in, tol, history)
            if not ok:
                x, block, ok = _newton(model, op, omega_d, a_in, x, tol,
                                       max_newton, history)
    else:
        x, block, ok = _propagate(model, op, omega_d, a_in, tol, history)

    z = _unpack(x)
    amp_a, amp_p = z[:2], z[2:]
    row_a, row_p = _amplitude_rows(model, omega_d, a_in, amp_a, amp_p, block)
    scale = np.abs(_drive_term(model, a_in)).max()
    residual = max(np.abs(np.concatenate([row_a, row_p])).max() / scale,
                   _block_residual(model, omega_d, amp_p, block))
    if not ok or not residual < tol:
        raise ConvergenceError(
            f"steady state did not converge: residual {residual:.3e} "
            f"after {len(history)} steps", history)
    return SteadyState(omega_d=omega_d, p_in_mw=p_in_mw, lambda_in=lam,
                       a_in=a_in, amp_a=amp_a, amp_p=amp_p, block=block,
                       residual=float(residual), history=tuple(history),
                       strategy=strategy)
