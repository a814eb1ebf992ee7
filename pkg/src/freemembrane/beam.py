"""Euler-Bernoulli beam elements, assembly and constrained linear solves.

DOF layout: node ``i`` owns ``2*i`` (transverse displacement ``w``, positive
upward, away from the substrate) and ``2*i + 1`` (rotation ``dw/dx``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .device import Mesh
from .errors import NonPositiveDimension, SingularSystem


def element_stiffness(ei: float, le: float) -> np.ndarray:
    """Hermite cubic beam element stiffness, DOF order ``(w_i, th_i, w_j, th_j)``."""
    if not ei > 0 or not le > 0:
        raise NonPositiveDimension(f"EI and element length must be > 0 (EI={ei}, le={le})")
    a = ei / le ** 3
    return a * np.array([
        [12.0, 6 * le, -12.0, 6 * le],
        [6 * le, 4 * le * le, -6 * le, 2 * le * le],
        [-12.0, -6 * le, 12.0, -6 * le],
        [6 * le, 2 * le * le, -6 * le, 4 * le * le],
    ])


def consistent_load(q: float, le: float) -> np.ndarray:
    """Work-equivalent nodal loads of a uniform traction ``q`` (N/m)."""
    return q * le / 12.0 * np.array([6.0, le, 6.0, -le])


def consistent_load_linear(q0: float, q1: float, le: float) -> np.ndarray:
    """Work-equivalent nodal loads of a traction varying linearly from q0 to q1."""
    return le / 60.0 * np.array([
        21 * q0 + 9 * q1,
        le * (3 * q0 + 2 * q1),
        9 * q0 + 21 * q1,
        -le * (2 * q0 + 3 * q1),
    ])


# Hermite shape functions evaluated at the element midpoint, times (1, le, 1, le)
MIDPOINT_SHAPE = np.array([0.5, 0.125, 0.5, -0.125])


def element_dofs(mesh: Mesh) -> np.ndarray:
    e = mesh.elements
    return np.column_stack([2 * e[:, 0], 2 * e[:, 0] + 1, 2 * e[:, 1], 2 * e[:, 1] + 1])


def assemble(mesh: Mesh) -> sp.csr_matrix:
    """Global stiffness as CSR; elements are summed in index order."""
    dofs = element_dofs(mesh)
    le = mesh.lengths
    blocks = np.stack([element_stiffness(ei, h) for ei, h in zip(mesh.ei, le)])
    rows = np.repeat(dofs, 4, axis=1).ravel()
    cols = np.tile(dofs, (1, 4)).ravel()
    K = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs))
    return K.tocsr()


def assemble_traction(mesh: Mesh, q: np.ndarray) -> np.ndarray:
    """Consistent load vector of a per-element constant traction array."""
    f = np.zeros(mesh.n_dofs)
    dofs = element_dofs(mesh)
    le = mesh.lengths
    fe = (q * le / 12.0)[:, None] * np.column_stack([6 * np.ones_like(le), le, 6 * np.ones_like(le), -le])
    np.add.at(f, dofs, fe)
    return f


def uniform_load(mesh: Mesh, q: float | np.ndarray) -> np.ndarray:
    """Consistent load of a traction (N/m) given per element or as one value."""
    return assemble_traction(mesh, np.broadcast_to(np.asarray(q, dtype=float), (mesh.n_elements,)))


def pressure_load(mesh: Mesh, pressure: float, mask: np.ndarray | None = None) -> np.ndarray:
    """Downward uniform pressure (Pa) acting on the local width; ``mask`` selects elements."""
    q = -pressure * mesh.width
    if mask is not None:
        q = np.where(mask, q, 0.0)
    return assemble_traction(mesh, q)


@dataclass(frozen=True, eq=False)
class DeflectionField:
    """Nodal displacement and rotation on a given mesh."""

    u: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        if self.u.shape != (self.mesh.n_dofs,):
            raise ValueError(f"expected {self.mesh.n_dofs} DOFs, got {self.u.shape}")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("deflection contains non-finite values")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DeflectionField":
        return cls(np.zeros(mesh.n_dofs), mesh)

    @property
    def w(self) -> np.ndarray:
        return self.u[0::2]

    @property
    def theta(self) -> np.ndarray:
        return self.u[1::2]

    def peak(self) -> float:
        """Signed displacement of largest magnitude (negative = toward substrate)."""
        w = self.w
        return float(w[np.argmax(np.abs(w))])

    def at(self, x: float) -> float:
        return float(self.w[self.mesh.node_at(x)])


@dataclass(frozen=True, eq=False)
class StaticSolution:
    deflection: DeflectionField
    reactions: dict[int, float]  # pinned DOF -> reaction force/moment


def pinned_dofs(mesh: Mesh) -> list[int]:
    """Transverse DOFs of the two pillar nodes."""
    return [2 * n for n in mesh.pillar_nodes]


def free_dofs(n_dofs: int, supports: Sequence[int]) -> np.ndarray:
    mask = np.ones(n_dofs, dtype=bool)
    mask[list(supports)] = False
    return np.flatnonzero(mask)


def _solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    # Jacobi scaling makes the pivot test independent of the w/theta unit mix
    d = A.diagonal()
    if np.any(d <= 0):
        raise SingularSystem("stiffness has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    D = sp.diags(s)
    try:
        lu = spla.splu(sp.csc_matrix(D @ A @ D))
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= 1e-13 * piv.max():
        raise SingularSystem("stiffness is singular; supports do not remove the rigid-body modes")
    Aq = sp.csr_matrix(A).astype(np.longdouble)
    bq = np.asarray(b, dtype=np.longdouble)
    x = s * lu.solve(s * b)
    # condition numbers grow like n^4; refining with an extended-precision
    # residual brings the float64 solution to its round-off floor
    for _ in range(2):
        r = np.asarray(bq - Aq @ x.astype(np.longdouble), dtype=float)
        x = x + s * lu.solve(s * r)
    return x


def _residual(A: sp.spmatrix, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``A u - f`` accumulated in extended precision."""
    Aq = sp.csr_matrix(A).astype(np.longdouble)
    return np.asarray(Aq @ u.astype(np.longdouble) - np.asarray(f, dtype=np.longdouble), dtype=float)


def _check_rigid_modes(mesh: Mesh, dofs: np.ndarray) -> None:
    x = mesh.nodes
    modes = np.zeros((mesh.n_dofs, 2))
    modes[0::2, 0] = 1.0
    modes[0::2, 1] = x - x.mean()
    modes[1::2, 1] = 1.0
    if np.linalg.matrix_rank(modes[dofs] * [1.0, 1.0 / np.ptp(x)]) < 2:
        raise SingularSystem("supports do not remove both rigid-body modes")


def solve_constrained(K: sp.spmatrix, supports: Sequence[int], f: np.ndarray,
                      extra_springs: np.ndarray | None = None, mesh: Mesh | None = None):
    """Linear static solve with ``w = 0`` (or ``theta = 0``) at the listed DOFs.

    Returns a :class:`StaticSolution` when ``mesh`` is given, else the raw
    displacement vector. ``extra_springs`` adds a diagonal stiffness per DOF.
    """
    n = K.shape[0]
    A = sp.csr_matrix(K)
    if extra_springs is not None:
        A = A + sp.diags(np.asarray(extra_springs, dtype=float))
    free = free_dofs(n, supports)
    if mesh is not None:
        held = list(supports)
        if extra_springs is not None:
            held += list(np.flatnonzero(np.asarray(extra_springs) > 0))
        _check_rigid_modes(mesh, np.asarray(sorted(set(held)), dtype=int))
    u = np.zeros(n)
    u[free] = _solve(A[free][:, free], f[free])
    r = _residual(A, u, f)
    reactions = {int(d): float(r[d]) for d in supports}
    if mesh is None:
        return u
    return StaticSolution(DeflectionField(u, mesh), reactions)
