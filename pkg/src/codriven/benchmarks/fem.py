"""Linear plane-stress finite elements on a structured rectangular mesh.

Bilinear four-node quadrilaterals with 2x2 Gauss quadrature.  All elements of
a structured mesh share one geometry, so the stiffness matrix is assembled as
``sum_e E_e * K_unit`` directly into LAPACK symmetric band storage and solved
with a banded Cholesky factorization.  The left edge is clamped.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg

from ..errors import ModelEvaluationError

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def q4_unit_stiffness(a, b, nu, thickness=1.0):
    """8x8 stiffness of an ``a`` x ``b`` rectangle with unit Young's modulus.

    Node order is counter-clockwise from the lower-left corner; DOFs are
    interleaved ``(ux, uy)`` per node.
    """
    D = np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]) / (1.0 - nu**2)
    xi_n = np.array([-1.0, 1.0, 1.0, -1.0])
    eta_n = np.array([-1.0, -1.0, 1.0, 1.0])
    K = np.zeros((8, 8))
    det_j = 0.25 * a * b
    for xi in _GAUSS:
        for eta in _GAUSS:
            dn_dx = 0.25 * xi_n * (1.0 + eta * eta_n) * (2.0 / a)
            dn_dy = 0.25 * eta_n * (1.0 + xi * xi_n) * (2.0 / b)
            B = np.zeros((3, 8))
            B[0, 0::2] = dn_dx
            B[1, 1::2] = dn_dy
            B[2, 0::2] = dn_dy
            B[2, 1::2] = dn_dx
            K += B.T @ D @ B * det_j * thickness
    return K


class CantileverMesh:
    """Structured ``nx`` x ``ny`` Q4 mesh of an ``lx`` x ``ly`` cantilever.

    Nodes are numbered column by column (y index fastest) to keep the
    bandwidth at ``2 * ny + 5``; elements are numbered row-major (x index
    fastest) to match the random field ordering.
    """

    def __init__(self, nx=50, ny=20, lx=5.0, ly=2.0, nu=0.3, thickness=1.0,
                 n_loads=20, load=500e3):
        self.nx, self.ny, self.lx, self.ly = int(nx), int(ny), float(lx), float(ly)
        self.nu, self.thickness = float(nu), float(thickness)
        self.n_loads, self.load = int(n_loads), float(load)
        self.hx, self.hy = self.lx / self.nx, self.ly / self.ny
        self.k_unit = q4_unit_stiffness(self.hx, self.hy, self.nu, self.thickness)
        self.n_nodes = (self.nx + 1) * (self.ny + 1)
        self.n_dof = 2 * self.n_nodes
        self.n_fixed = 2 * (self.ny + 1)  # first column of nodes
        self.n_free = self.n_dof - self.n_fixed
        self.bandwidth = 2 * self.ny + 5

    def node(self, i, j):
        return i * (self.ny + 1) + j

    @cached_property
    def element_dofs(self):
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        ii, jj = ii.ravel(), jj.ravel()
        nodes = np.stack([self.node(ii, jj), self.node(ii + 1, jj),
                          self.node(ii + 1, jj + 1), self.node(ii, jj + 1)], axis=1)
        dofs = np.empty((nodes.shape[0], 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * nodes
        dofs[:, 1::2] = 2 * nodes + 1
        return dofs

    @cached_property
    def _band_scatter(self):
        free = self.element_dofs - self.n_fixed
        a, b = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
        a, b = a.ravel(), b.ravel()
        gi, gj = free[:, a], free[:, b]
        keep = (gi >= 0) & (gj >= 0) & (gi <= gj)
        u = self.bandwidth
        flat = (u + gi - gj) * self.n_free + gj
        elem = np.broadcast_to(np.arange(free.shape[0])[:, None], gi.shape)
        vals = np.broadcast_to(self.k_unit[a, b], gi.shape)
        return flat[keep], elem[keep], vals[keep]

    @cached_property
    def load_vector(self):
        """Consistent nodal forces of ``n_loads`` downward point loads on the top edge.

        Loads sit at ``x = k * lx / n_loads`` (k = 1..n_loads) and are shared
        linearly between the two adjacent top-edge nodes.
        """
        f = np.zeros(self.n_dof)
        for kk in range(1, self.n_loads + 1):
            xp = kk * self.lx / self.n_loads
            s = min(xp / self.hx, float(self.nx))
            i0 = min(int(np.floor(s + 1e-12)), self.nx)
            w = s - i0
            if w < 1e-12 or i0 == self.nx:
                f[2 * self.node(i0, self.ny) + 1] -= self.load
            else:
                f[2 * self.node(i0, self.ny) + 1] -= self.load * (1.0 - w)
                f[2 * self.node(i0 + 1, self.ny) + 1] -= self.load * w
        return f

    @property
    def tip_dof(self):
        """Vertical DOF of the lower-right (free-end) corner node."""
        return 2 * self.node(self.nx, 0) + 1

    def banded_stiffness(self, E):
        flat, elem, vals = self._band_scatter
        size = (self.bandwidth + 1) * self.n_free
        data = np.bincount(flat, weights=E[elem] * vals, minlength=size)
        return data.reshape(self.bandwidth + 1, self.n_free)

    def solve(self, E):
        """Full displacement vector (clamped DOFs included) for cell moduli ``E``."""
        E = np.asarray(E, dtype=float)
        if E.shape != (self.nx * self.ny,):
            raise ValueError(f"expected {self.nx * self.ny} element moduli")
        if not np.all(np.isfinite(E)) or np.any(E <= 0.0):
            raise ModelEvaluationError("element modulus must be positive and finite")
        ab = self.banded_stiffness(E)
        try:
            u_free = scipy.linalg.solveh_banded(ab, self.load_vector[self.n_fixed:],
                                                check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ModelEvaluationError(f"singular stiffness matrix: {exc}") from exc
        u = np.zeros(self.n_dof)
        u[self.n_fixed:] = u_free
        return u

    def tip_deflection(self, E):
        """Downward displacement of the lower-right corner."""
        return -self.solve(E)[self.tip_dof]

    def internal_forces(self, E, u):
        """Nodal internal force vector ``K u`` assembled element by element."""
        dofs = self.element_dofs
        fe = (u[dofs] @ self.k_unit.T) * np.asarray(E, dtype=float)[:, None]
        f = np.zeros(self.n_dof)
        np.add.at(f, dofs, fe)
        return f
