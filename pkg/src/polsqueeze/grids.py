"""Radial momentum grids and quadrature weights.

All momentum integrals in the pipeline are isotropic 2D integrals
reduced to radial sums,

    int d^2k / (2 pi)^2 f(|k|)  ->  sum_i w_i f(k_i),

with exact annulus weights w_i = (e_{i+1}^2 - e_i^2) / (4 pi) built
from cell edges e_i.  Nodes are log spaced; grids for pair amplitudes
carry an explicit k = 0 head node whose cell covers [0, e_1], so that
discrete point sources delta_{q,0} X map to (delta_{i,0} / w_0) X.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RadialGrid:
    """Log-spaced radial nodes with exact annulus quadrature weights."""

    k: np.ndarray
    w: np.ndarray
    edges: np.ndarray
    head: bool = field(default=False)

    def __post_init__(self):
        if self.k.ndim != 1 or self.w.shape != self.k.shape:
            raise ValueError("nodes and weights must be matching 1D arrays")
        if self.edges.shape != (self.k.size + 1,):
            raise ValueError("need one more edge than nodes")

    @property
    def n(self) -> int:
        return self.k.size

    def integrate(self, f: np.ndarray) -> float | complex | np.ndarray:
        """Radial sum approximating int d^2k/(2 pi)^2 f along the last axis."""
        return np.asarray(f) @ self.w


def log_grid(k_min: float, k_max: float, n: int, head: bool = False) -> RadialGrid:
    """Build a log-spaced grid of ``n`` nodes on [k_min, k_max].

    With ``head=True`` a k = 0 node is prepended (total n + 1 nodes) and
    its cell spans [0, e] with e the lower edge of the first log cell.
    Interior edges are geometric means of neighboring nodes; the outer
    edges extend the log spacing by half a cell.
    """
    if not (0.0 < k_min < k_max):
        raise ValueError("need 0 < k_min < k_max")
    if n < 4:
        raise ValueError("grid too small")
    nodes = np.geomspace(k_min, k_max, n)
    r = (k_max / k_min) ** (1.0 / (n - 1))
    edges = np.empty(n + 1)
    edges[1:-1] = np.sqrt(nodes[1:] * nodes[:-1])
    edges[0] = nodes[0] / np.sqrt(r)
    edges[-1] = nodes[-1] * np.sqrt(r)
    if head:
        nodes = np.concatenate(([0.0], nodes))
        edges = np.concatenate(([0.0], edges))
    w = (edges[1:] ** 2 - edges[:-1] ** 2) / (4.0 * np.pi)
    nodes.setflags(write=False)
    w.setflags(write=False)
    edges.setflags(write=False)
    return RadialGrid(k=nodes, w=w, edges=edges, head=head)


def theta_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights for (1/pi) int_0^pi dtheta.

    The returned weights already include the 1/pi normalization, so
    ``f(theta) @ wt`` is the angular average of an even 2 pi periodic
    function.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * w  # maps [-1,1] onto [0,pi] and divides by pi
    return theta, wt
