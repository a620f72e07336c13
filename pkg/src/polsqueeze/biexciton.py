"""Two-exciton interaction kernels and the bound-pair eigenproblem.

Pairs of 1s excitons with opposite relative momenta q, -q interact
through a direct Coulomb kernel and a carrier-exchange kernel; exchange
also makes the pair basis nonorthogonal.  Everything is reduced to the
s-wave channel on a radial grid: each kernel is evaluated for explicit
momentum vectors at a set of relative angles and Gauss-averaged over the
angle.  The spin-symmetric (+) and antisymmetric (-) channels differ
only by the sign in front of every exchange contribution, and the (-)
channel hosts the bound biexciton.

The angular evaluations share one compiled loop over (q, q', angle).
Writing u = q - q', v = q + q' and c = alpha v - beta u (alpha, beta the
electron and hole mass fractions), the five needed objects reduce to

    direct   = V(u) [rho(beta u) - rho(alpha u)]^2,
    exchange = 2 T1 - T3 - T4,
    overlap  = sum_k phi_k phi(k-bu) phi(k+av) phi(k+c),
    triple   = sum_k phi_k phi(k-bu) phi(k+av),

with rho(p) = sum_k phi_k phi(|k+p|) and T1, T3, T4 single k sums over
phi(k) phi(shift) times the convolutions U = V * phi and
U2(p; s) = sum_k' V(p - k') phi_k' phi(|k' + s|).  U2 depends only on
(|p|, |s|, angle) and is tabulated on a 3D grid; everything else uses
1D tables.  The reduction keeps the k integrand smooth (phi has zero
slope at the origin), so plain Gauss panels in k and a uniform angle
rule converge quickly.

The generalized eigenproblem H Psi = E S Psi with the nonorthogonality
matrix S is solved in symmetrized form S^-1/2 H S^-1/2, which is real
symmetric once quadrature noise is averaged out; this guarantees real
pair energies and gives the left duals without a matrix inversion.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit, prange
from scipy.linalg import cho_factor, cho_solve, eigh

from .grids import RadialGrid, theta_rule
from .units import HBAR2_2M0

TWO_PI = 2.0 * np.pi

# compiled-kernel k quadrature: phi support in units of the pair Bohr radius
_K_SPLIT_A = 4.0
_K_MAX_A = 16.0


def pair_radius(state) -> float:
    """Bohr radius of the relative-motion state, from its binding energy."""
    return 2.0 * np.sqrt(HBAR2_2M0 / (state.mu * state.binding))


# ---------------------------------------------------------------------------
# uniform tables consumed by the compiled kernels


@njit(cache=True, inline="always")
def _lin_tail3(tab, step, x):
    """Linear interpolation with a k^-3 power tail past the table edge."""
    t = x / step
    n = tab.size
    if t >= n - 1:
        edge = step * (n - 1)
        return tab[n - 1] * (edge / x) ** 3
    i = int(t)
    f = t - i
    return tab[i] * (1.0 - f) + tab[i + 1] * f


@njit(cache=True, inline="always")
def _lin_tail1(tab, step, x):
    """Linear interpolation with a 1/x tail (bare-Coulomb falloff)."""
    t = x / step
    n = tab.size
    if t >= n - 1:
        edge = step * (n - 1)
        return tab[n - 1] * (edge / x)
    i = int(t)
    f = t - i
    return tab[i] * (1.0 - f) + tab[i + 1] * f


@njit(cache=True, inline="always")
def _lin_clamp(tab, step, x):
    """Linear interpolation clamped to the edge value."""
    t = x / step
    n = tab.size
    if t >= n - 1:
        return tab[n - 1]
    i = int(t)
    f = t - i
    return tab[i] * (1.0 - f) + tab[i + 1] * f


@njit(cache=True, inline="always")
def _u2_at(tab, step_p, step_s, step_c, p, s, cang):
    """Trilinear lookup of U2(|p|, |s|, angle) with clamped axes."""
    if cang > 1.0:
        cang = 1.0
    elif cang < -1.0:
        cang = -1.0
    chi = np.arccos(cang)
    n_p, n_s, n_c = tab.shape
    tp = p / step_p
    if tp > n_p - 1.000001:
        tp = n_p - 1.000001
    ts = s / step_s
    if ts > n_s - 1.000001:
        ts = n_s - 1.000001
    tc = chi / step_c
    if tc > n_c - 1.000001:
        tc = n_c - 1.000001
    ip = int(tp)
    js = int(ts)
    kc = int(tc)
    fp = tp - ip
    fs = ts - js
    fc = tc - kc
    c00 = tab[ip, js, kc] * (1 - fp) + tab[ip + 1, js, kc] * fp
    c10 = tab[ip, js + 1, kc] * (1 - fp) + tab[ip + 1, js + 1, kc] * fp
    c01 = tab[ip, js, kc + 1] * (1 - fp) + tab[ip + 1, js, kc + 1] * fp
    c11 = tab[ip, js + 1, kc + 1] * (1 - fp) + tab[ip + 1, js + 1, kc + 1] * fp
    return (c00 * (1 - fs) + c10 * fs) * (1 - fc) + (c01 * (1 - fs) + c11 * fs) * fc


@njit(cache=True, parallel=True, fastmath=True)
def _u2_build(p_grid, s_grid, chi_grid, r_nodes, r_vw, theta_c, n_theta,
              phi_tab, phi_step, out):
    """Fill U2(p, s, chi) = (1/4pi^2) int dr dtheta V(r) r phi(|p-r|) phi(|p-r+s|).

    The r window per p row is the annulus that carries phi support (the
    weights in r_vw already include the Gauss factors and V(r) r), and
    theta is a midpoint rule on [-theta_c, theta_c] where the support
    circle is visible from the origin.
    """
    n_p = p_grid.size
    n_s = s_grid.size
    n_c = chi_grid.size
    n_r = r_nodes.shape[1]
    for ip in prange(n_p):
        p = p_grid[ip]
        tc = theta_c[ip]
        dth = 2.0 * tc / n_theta
        for js in range(n_s):
            s = s_grid[js]
            for kc in range(n_c):
                sx = s * np.cos(chi_grid[kc])
                sy = s * np.sin(chi_grid[kc])
                acc = 0.0
                for ir in range(n_r):
                    r = r_nodes[ip, ir]
                    inner = 0.0
                    for it in range(n_theta):
                        th = -tc + (it + 0.5) * dth
                        tx = p - r * np.cos(th)
                        ty = -r * np.sin(th)
                        f1 = _lin_tail3(phi_tab, phi_step,
                                        np.sqrt(tx * tx + ty * ty))
                        f2 = _lin_tail3(phi_tab, phi_step,
                                        np.sqrt((tx + sx) ** 2 + (ty + sy) ** 2))
                        inner += f1 * f2
                    acc += r_vw[ip, ir] * inner
                out[ip, js, kc] = acc * dth / (TWO_PI * TWO_PI)


@dataclass(frozen=True)
class PairTables:
    """Uniform-grid tables feeding the compiled pair-kernel loop."""

    a_pair: float
    q_max: float
    phi: np.ndarray
    phi_step: float
    u: np.ndarray
    u_step: float
    rho_diff: np.ndarray
    rho_step: float
    vq: np.ndarray
    vq_step: float
    u2: np.ndarray
    u2_steps: tuple


def _phi_uniform(state, r_max: float, n: int) -> np.ndarray:
    x = np.linspace(0.0, r_max, n)
    out = state.phi_at(np.maximum(x, 1e-12))
    return np.ascontiguousarray(out)


def _u_table(state, potential, r_max: float, n: int, a: float) -> np.ndarray:
    """U(p) = sum_k V(|p-k|) phi_k, singularity-centered polar quadrature.

    Uniform panels cover the phi support around every p; the k^-3 tail
    of phi against the flat V(r) r measure decays only as 1/r^2, so
    geometrically growing panels chase it out to ~10^3 momenta.
    """
    p = np.linspace(0.0, r_max, n)
    out = np.zeros(n)
    n_th = 96
    th = (np.arange(n_th) + 0.5) * TWO_PI / n_th
    cth, sth = np.cos(th), np.sin(th)
    gl_x, gl_w = np.polynomial.legendre.leggauss(18)
    edges = np.arange(0.0, r_max + 20.0 / a, 4.0 / a)
    tail = edges[-1] * 1.45 ** np.arange(1, 15)
    edges = np.concatenate([edges, tail])
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * (gl_x + 1.0) + lo
        vr = potential(np.maximum(r, 1e-12)) * r  # flat at r -> 0
        w = 0.5 * (hi - lo) * gl_w * vr
        # phi(|p - r|) on (p, r, theta); chunk p to bound memory
        for i0 in range(0, n, 256):
            ps = p[i0:i0 + 256, None, None]
            dx = ps - r[None, :, None] * cth[None, None, :]
            dy = -r[None, :, None] * sth[None, None, :]
            f = state.phi_at(np.sqrt(dx * dx + dy * dy))
            out[i0:i0 + 256] += (f.mean(axis=2) * TWO_PI) @ w
    return out / (TWO_PI * TWO_PI)


def _rho_diff_table(state, alpha: float, p_max: float, n: int) -> np.ndarray:
    """rho(beta p) - rho(alpha p) with rho(p) = sum_k phi_k phi(|k+p|)."""
    beta = 1.0 - alpha
    p = np.linspace(0.0, p_max, n)
    k = state.grid.k
    wphi = state.grid.w * state.phi
    n_th = 96
    cth = np.cos((np.arange(n_th) + 0.5) * TWO_PI / n_th)
    out = np.zeros(n)
    for i0 in range(0, n, 64):
        ps = p[i0:i0 + 64, None, None]
        d_b = np.sqrt(k[None, :, None] ** 2 + (beta * ps) ** 2
                      + 2.0 * k[None, :, None] * beta * ps * cth[None, None, :])
        d_a = np.sqrt(k[None, :, None] ** 2 + (alpha * ps) ** 2
                      + 2.0 * k[None, :, None] * alpha * ps * cth[None, None, :])
        diff = (state.phi_at(d_b) - state.phi_at(d_a)).mean(axis=2)
        out[i0:i0 + 64] = diff @ wphi
    return out


def pair_tables(state, potential: Callable, alpha: float, q_max: float,
                n_phi: int = 4096, n_u: int = 4096, n_rho: int = 2048,
                n_vq: int = 2048, n_u2: tuple = (448, 64, 25),
                u2_quad: tuple = (32, 40)) -> PairTables:
    """Build every table the pair-kernel loop needs, for pair momenta
    up to ``q_max``.  Tables depend on the exciton state and screening
    but not on cavity parameters, so one set serves a detuning sweep.
    """
    a = pair_radius(state)
    pair_span = 2.0 * q_max
    r_phi = _K_MAX_A / a + pair_span + 1e-9
    phi_tab = _phi_uniform(state, r_phi, n_phi)
    u_tab = _u_table(state, potential, r_phi, n_u, a)
    rho_max = pair_span * 1.0001 + 1e-9
    rho_tab = _rho_diff_table(state, alpha, rho_max, n_rho)
    # direct-kernel pieces
    vq_grid = np.linspace(0.0, pair_span * 1.0001 + 1e-9, n_vq)
    vq_tab = potential(np.maximum(vq_grid, 1e-12)) * vq_grid
    vq_tab[0] = vq_tab[1]  # V q is flat at the origin for any eps(0) finite
    # U2 table
    n_p, n_s, n_c = n_u2
    n_r, n_th = u2_quad
    rm = _K_MAX_A / a
    p_grid = np.linspace(0.0, r_phi, n_p)
    s_grid = np.linspace(0.0, max(alpha, 1.0 - alpha) * pair_span * 1.0001 + 1e-9, n_s)
    chi_grid = np.linspace(0.0, np.pi, n_c)
    # radial window per p row, split near the phi^2 ridge r = p (keep both
    # panels a finite share of the window so neither degenerates)
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_r // 2)
    lo = np.maximum(p_grid - rm, 0.0)
    hi = p_grid + rm
    mid = np.clip(p_grid, lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
    r_nodes = np.concatenate([
        0.5 * (mid - lo)[:, None] * (gl_x[None, :] + 1.0) + lo[:, None],
        0.5 * (hi - mid)[:, None] * (gl_x[None, :] + 1.0) + mid[:, None]], axis=1)
    r_w = np.concatenate([0.5 * (mid - lo)[:, None] * gl_w[None, :],
                          0.5 * (hi - mid)[:, None] * gl_w[None, :]], axis=1)
    vr = potential(np.maximum(r_nodes, 1e-12)) * r_nodes
    vr[r_nodes < 1e-12] = potential(1e-12) * 1e-12
    r_vw = r_w * vr
    theta_c = np.where(p_grid <= rm, np.pi, np.arcsin(np.minimum(rm / np.maximum(p_grid, 1e-300), 1.0)))
    u2 = np.empty((n_p, n_s, n_c))
    _u2_build(p_grid, s_grid, chi_grid, r_nodes, r_vw, theta_c, n_th,
              phi_tab, r_phi / (n_phi - 1), u2)
    return PairTables(
        a_pair=a, q_max=q_max,
        phi=phi_tab, phi_step=r_phi / (n_phi - 1),
        u=u_tab, u_step=r_phi / (n_u - 1),
        rho_diff=rho_tab, rho_step=rho_max / (n_rho - 1),
        vq=vq_tab, vq_step=float(vq_grid[1] - vq_grid[0]),
        u2=u2, u2_steps=(float(p_grid[1] - p_grid[0]),
                         float(s_grid[1] - s_grid[0]),
                         float(chi_grid[1] - chi_grid[0])))


# ---------------------------------------------------------------------------
# the fused kernel loop


@njit(cache=True, parallel=True, fastmath=True)
def _pair_loop(q, ct, wt, alpha, beta,
               kn, kw, phik,
               ckt, skt,
               phi_tab, phi_step, u_tab, u_step,
               rd_tab, rd_step, vq_tab, vq_step,
               u2_tab, sp, ss, sc,
               direct, exch, sexch, cphi):
    n = q.size
    for ij in prange(n * n):
        i = ij // n
        j = ij - n * i
        qi = q[i]
        qj = q[j]
        acc_d = 0.0
        acc_x = 0.0
        acc_s = 0.0
        acc_c = 0.0
        for l in range(ct.size):
            c = ct[l]
            uu = qi * qi + qj * qj - 2.0 * qi * qj * c
            u = np.sqrt(uu) if uu > 0.0 else 0.0
            vv = qi * qi + qj * qj + 2.0 * qi * qj * c
            v = np.sqrt(vv) if vv > 0.0 else 0.0
            if u > 1e-14 and v > 1e-14:
                cuv = (qi * qi - qj * qj) / (u * v)
                if cuv > 1.0:
                    cuv = 1.0
                elif cuv < -1.0:
                    cuv = -1.0
            else:
                cuv = 1.0
            suv = np.sqrt(max(0.0, 1.0 - cuv * cuv))
            bu = beta * u
            av = alpha * v
            avx = av * cuv
            avy = av * suv
            cx = avx - bu
            cy = avy
            if u > 1e-12:
                rdv = _lin_clamp(rd_tab, rd_step, u)
                dval = _lin_clamp(vq_tab, vq_step, u) / u * rdv * rdv
            else:
                dval = 0.0
            sx = 0.0
            xu = 0.0
            t3 = 0.0
            t4 = 0.0
            c3 = 0.0
            for ik in range(kn.size):
                k = kn[ik]
                wk = kw[ik] * phik[ik]
                for it in range(ckt.size):
                    kx = k * ckt[it]
                    ky = k * skt[it]
                    d1 = kx - bu
                    p1 = _lin_tail3(phi_tab, phi_step, np.sqrt(d1 * d1 + ky * ky))
                    d2x = kx + avx
                    d2y = ky + avy
                    p2 = _lin_tail3(phi_tab, phi_step, np.sqrt(d2x * d2x + d2y * d2y))
                    tx = kx + cx
                    ty = ky + cy
                    pc = np.sqrt(tx * tx + ty * ty)
                    f12 = wk * p1 * p2
                    c3 += f12
                    sx += f12 * _lin_tail3(phi_tab, phi_step, pc)
                    xu += f12 * _lin_tail1(u_tab, u_step, pc)
                    if pc > 1e-14:
                        a3 = tx / pc
                        a4 = -(tx * cuv + ty * suv) / pc
                    else:
                        a3 = 1.0
                        a4 = 1.0
                    t3 += wk * p1 * _u2_at(u2_tab, sp, ss, sc, pc, bu, a3)
                    t4 += wk * p2 * _u2_at(u2_tab, sp, ss, sc, pc, av, a4)
            wl = wt[l]
            acc_d += wl * dval
            acc_x += wl * (2.0 * xu - t3 - t4)
            acc_s += wl * sx
            acc_c += wl * c3
        direct[i, j] = acc_d
        exch[i, j] = acc_x
        sexch[i, j] = acc_s
        cphi[i, j] = acc_c


@dataclass(frozen=True)
class PairKernels:
    """Angle-averaged two-exciton kernels on a radial pair grid.

    ``direct`` and ``s_exchange`` are symmetric by construction and
    stored symmetrized; ``exchange`` is genuinely asymmetric (the
    asymmetry cancels against the overlap part of the pair Hamiltonian)
    and ``three_phi`` enters the photon couplings with both index
    orders, so those two stay as evaluated.
    """

    grid: RadialGrid
    alpha: float
    direct: np.ndarray
    exchange: np.ndarray
    s_exchange: np.ndarray
    three_phi: np.ndarray
    tables: PairTables


def pair_kernels(state, potential: Callable, grid: RadialGrid, alpha: float, *,
                 n_theta: int = 32, n_k: int = 24, n_theta_k: int = 48,
                 theta: tuple | None = None,
                 tables: PairTables | None = None,
                 table_sizes: dict | None = None) -> PairKernels:
    """Evaluate all pair kernels on ``grid`` (s-wave angular average).

    ``theta`` overrides the Gauss angle rule with explicit
    (cos(theta) nodes, weights); single-angle rules give the bare
    fixed-angle kernels used for cross-checks.  ``n_k`` is the Gauss
    order per radial panel of the internal k sum.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("mass fraction alpha must lie in (0, 1)")
    beta = 1.0 - alpha
    if tables is None:
        tables = pair_tables(state, potential, alpha, float(grid.k[-1]),
                             **(table_sizes or {}))
    a = tables.a_pair
    if theta is None:
        nodes, wts = theta_rule(n_theta)
        ct = np.cos(nodes)
    else:
        ct = np.asarray(theta[0], dtype=float)
        wts = np.asarray(theta[1], dtype=float)
    # radial Gauss panels for the shared k sum, weights carry k dk/(2 pi)
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_k)
    kn, kw = [], []
    for lo, hi in ((0.0, _K_SPLIT_A / a), (_K_SPLIT_A / a, _K_MAX_A / a)):
        kn.append(0.5 * (hi - lo) * (gl_x + 1.0) + lo)
        kw.append(0.5 * (hi - lo) * gl_w)
    kn = np.concatenate(kn)
    kw = np.concatenate(kw) * kn / (TWO_PI * n_theta_k)
    phik = state.phi_at(np.maximum(kn, 1e-12))
    tk = (np.arange(n_theta_k) + 0.5) * TWO_PI / n_theta_k
    n = grid.n
    direct = np.empty((n, n))
    exch = np.empty((n, n))
    sexch = np.empty((n, n))
    cphi = np.empty((n, n))
    sp, ss, sc = tables.u2_steps
    _pair_loop(grid.k, ct, wts, alpha, beta, kn, kw, phik,
               np.cos(tk), np.sin(tk),
               tables.phi, tables.phi_step, tables.u, tables.u_step,
               tables.rho_diff, tables.rho_step, tables.vq, tables.vq_step,
               tables.u2, sp, ss, sc,
               direct, exch, sexch, cphi)
    return PairKernels(grid=grid, alpha=alpha,
                       direct=0.5 * (direct + direct.T),
                       exchange=exch,
                       s_exchange=0.5 * (sexch + sexch.T),
                       three_phi=cphi, tables=tables)


# ---------------------------------------------------------------------------
# sector eigenproblem


@dataclass(frozen=True)
class BiexcitonSector:
    """Eigenbasis of one spin channel of the interacting pair problem.

    ``energies`` are the pair energies (ascending, bound states first);
    ``right``/``left`` hold the dual mode profiles, normalized so that
    left @ diag(w) ... right is handled internally: left @ right = id.
    ``w_source`` and ``w_source_dual`` are the pair-interaction drive
    projections onto the modes (plain and metric-inverted), the scalar
    coupling strengths of the coherent drive channel.
    """

    sign: int
    q: np.ndarray
    w: np.ndarray
    energies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    s_hat: np.ndarray
    sqw: np.ndarray
    h_asym: float
    w_source: np.ndarray
    w_source_dual: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.energies.size

    def metric_solve(self, x: np.ndarray) -> np.ndarray:
        """Apply the inverse nonorthogonality matrix to value vectors."""
        c = cho_factor(self.s_hat)
        y = cho_solve(c, (x.T * self.sqw).T if x.ndim > 1 else x * self.sqw)
        return (y.T / self.sqw).T if y.ndim > 1 else y / self.sqw


def diagonalize_sector(kernels: PairKernels, sign: int, e_x0: float,
                       mass_total: float) -> BiexcitonSector:
    """Solve the generalized pair eigenproblem in one spin channel.

    ``sign`` is +1 (spin-symmetric) or -1 (antisymmetric); ``e_x0`` the
    q = 0 exciton energy (meV) and ``mass_total`` the exciton mass in
    bare-electron units.  Returns all modes, bound and discretized
    continuum alike; truncation is a caller decision.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    if not kernels.grid.head:
        raise ValueError("pair grid needs the q = 0 head node (drive sources "
                         "project through the q' = 0 kernel column)")
    q = kernels.grid.k
    w = kernels.grid.w
    sqw = np.sqrt(w)
    sx = kernels.s_exchange
    wkern = kernels.direct + sign * kernels.exchange
    f = 2.0 * e_x0 + 2.0 * HBAR2_2M0 * q**2 / mass_total
    s_hat = np.eye(q.size) - sign * (sqw[:, None] * sx * sqw[None, :])
    s_hat = 0.5 * (s_hat + s_hat.T)
    h_hat = s_hat * f[None, :] + sqw[:, None] * wkern * sqw[None, :]
    h_asym = float(np.linalg.norm(h_hat - h_hat.T) / np.linalg.norm(h_hat))
    h_hat = 0.5 * (h_hat + h_hat.T)
    evals_s, vecs_s = eigh(s_hat)
    if evals_s[0] <= 0:
        raise RuntimeError("pair basis lost positivity; refine the grid")
    s_mh = (vecs_s / np.sqrt(evals_s)) @ vecs_s.T
    s_ph = (vecs_s * np.sqrt(evals_s)) @ vecs_s.T
    amat = s_mh @ h_hat @ s_mh
    energies, psi = eigh(0.5 * (amat + amat.T))
    right = (s_mh @ psi) / sqw[:, None]
    left = (psi.T @ s_ph) * sqw[None, :]
    w_raw0 = wkern[:, 0]
    w_source = (w * w_raw0) @ right
    c = cho_factor(s_hat)
    w_source_dual = left @ (cho_solve(c, w_raw0 * sqw) / sqw)
    return BiexcitonSector(sign=sign, q=q, w=w, energies=energies,
                           right=right, left=left, s_hat=s_hat, sqw=sqw,
                           h_asym=h_asym, w_source=w_source,
                           w_source_dual=w_source_dual)


def bound_energies(sector: BiexcitonSector, e_x0: float) -> np.ndarray:
    """Pair energies below the two-exciton continuum edge."""
    return sector.energies[sector.energies < 2.0 * e_x0]


def photon_projections(sector: BiexcitonSector, kernels: PairKernels,
                       omega_q: np.ndarray, a_q: np.ndarray):
    """Project the photon-assisted kernels onto the pair modes.

    ``omega_q`` is the exciton-photon (Rabi) coupling on the pair grid
    and ``a_q`` the mode-volume-scaled per-pair coupling.  The photon
    conversion of a bare pair next to an exciton is relative-momentum
    blind, so the diagonal enters measure-free at Rabi strength; the
    carrier-exchange pathway is a smooth kernel and integrates with the
    radial weights.  Returns (proj, dual): proj[:, mu] feeds the
    photon-exciton channel from pair modes, dual[mu, :] the reverse
    path through the inverse-overlap metric; rows of ``dual`` act on
    plain value vectors.
    """
    c3 = kernels.three_phi
    w = sector.w
    sign = sector.sign
    amat = np.diag(omega_q) - sign * (a_q[:, None] * c3 * w[None, :])
    acheck = np.diag(omega_q) - sign * (c3.T * (w * a_q)[None, :])
    proj = amat @ sector.right
    dual = sector.left @ sector.metric_solve(acheck)
    return proj, dual
