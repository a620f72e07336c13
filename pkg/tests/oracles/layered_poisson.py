"""Reference electrostatics for a charged sheet inside a layered stack.

Solves the full piecewise Poisson boundary-value problem for a unit
charge sheet at the center of a dielectric slab (thickness d, constant
eps_s), separated on both sides by gaps (thickness h, eps = 1) from
semi-infinite half spaces (eps_e).  Every region keeps explicit
exp(+qz) / exp(-qz) coefficients and the interface conditions are
assembled into one dense linear solve per q, with no admittance
recursion anywhere.

The effective dielectric function is eps(q) = 1 / (2 q phi(0)) where
phi(0) is the potential on the sheet for a source normalized so that a
vacuum-only stack gives phi(0) = 1/(2q).
"""

import numpy as np


def epsilon_bvp(q: float, d: float, eps_s: float, h: float, eps_e: float) -> float:
    """Effective eps(q) for the sheet-in-slab stack by direct BVP solve."""
    zs = [-d / 2 - h, -d / 2, 0.0, d / 2, d / 2 + h]
    eps = [eps_e, 1.0, eps_s, eps_s, 1.0, eps_e]
    # region r potential: A_r exp(q z) + B_r exp(-q z); region 0 has B=0,
    # region 5 has A=0. Unknowns: [A0, A1, B1, A2, B2, A3, B3, A4, B4, B5].
    n = 10
    M = np.zeros((n, n))
    rhs = np.zeros(n)

    def col_A(r):
        return {0: 0, 1: 1, 2: 3, 3: 5, 4: 7, 5: None}[r]

    def col_B(r):
        return {0: None, 1: 2, 2: 4, 3: 6, 4: 8, 5: 9}[r]

    row = 0
    for i, z in enumerate(zs):
        rl, rr = i, i + 1
        ep, em = np.exp(q * z), np.exp(-q * z)
        # potential continuity
        if col_A(rl) is not None:
            M[row, col_A(rl)] += ep
        if col_B(rl) is not None:
            M[row, col_B(rl)] += em
        if col_A(rr) is not None:
            M[row, col_A(rr)] -= ep
        if col_B(rr) is not None:
            M[row, col_B(rr)] -= em
        row += 1
        # displacement continuity, with the sheet jump at z = 0:
        # eps_right phi'(z+) - eps_left phi'(z-) = -1 for the charged plane
        if col_A(rr) is not None:
            M[row, col_A(rr)] += eps[rr] * q * ep
        if col_B(rr) is not None:
            M[row, col_B(rr)] -= eps[rr] * q * em
        if col_A(rl) is not None:
            M[row, col_A(rl)] -= eps[rl] * q * ep
        if col_B(rl) is not None:
            M[row, col_B(rl)] += eps[rl] * q * em
        rhs[row] = -1.0 if z == 0.0 else 0.0
        row += 1

    c = np.linalg.solve(M, rhs)
    phi0 = c[col_A(2)] + c[col_B(2)]
    return 1.0 / (2.0 * q * phi0)


def epsilon_bvp_vec(q, d, eps_s, h, eps_e):
    return np.array([epsilon_bvp(float(x), d, eps_s, h, eps_e) for x in np.atleast_1d(q)])
