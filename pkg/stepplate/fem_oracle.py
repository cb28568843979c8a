"""Reference solver: Fourier decomposition in theta, quadratic radial FSDT elements.

Five unknowns per node (u0, v0, w, psi_r, psi_theta) with the same cos/sin convention as
the analytical solver, the same section integrals and the same edge-condition sets.
Transverse shear is integrated with 2 Gauss points and everything else with 3, which
keeps thin segments free of shear locking.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from stepplate.config import settings
from stepplate.errors import DegenerateConfigurationError, OracleError
from stepplate.material_model import PlateConfig, beta_from_omega, plate_section_integrals

logger = logging.getLogger(__name__)

DOF = 5
U, V, W, PR, PT = range(DOF)
DOF_NAMES = ("u0", "v0", "w", "psi_r", "psi_theta")
MIN_ELEMENTS_PER_SEGMENT = 4
RESIDUAL_RTOL = 1e-8

# essential (displacement-type) conditions; resultant conditions are natural
EDGE_DOFS = {
    "clamped": (U, V, W, PR, PT),
    "hard_ss": (U, V, W, PT),
    "soft_ss": (W, ),
    "free": (),
}

GAUSS_FULL = np.polynomial.legendre.leggauss(3)
GAUSS_SHEAR = np.polynomial.legendre.leggauss(2)


@dataclass(frozen=True)
class RadialMesh:
    nodes: np.ndarray
    element_segments: np.ndarray
    p: int
    order: int = 2

    @property
    def elements(self) -> int:
        return len(self.element_segments)

    @property
    def dofs(self) -> int:
        return DOF * len(self.nodes)


@dataclass(frozen=True)
class OracleSystem:
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    K_full: sparse.csr_matrix
    M_full: sparse.csr_matrix
    transform: sparse.csr_matrix
    mesh: RadialMesh


@dataclass(frozen=True)
class EigenSolution:
    eigenvalues: np.ndarray
    frequencies: np.ndarray
    modes: np.ndarray
    mesh: Optional[RadialMesh] = None

    def betas(self, config: PlateConfig) -> np.ndarray:
        return np.array([beta_from_omega(config, 2.0 * math.pi * f) for f in self.frequencies])


def dof_index(node: int, name: str) -> int:
    return DOF * node + DOF_NAMES.index(name)


def build_mesh(config: PlateConfig, p: int, elements: Optional[int] = None) -> RadialMesh:
    """Quadratic elements spread over the segments in proportion to their width."""
    elements = elements or settings.ORACLE_ELEMENTS
    n_seg = len(config.segments)
    if elements < MIN_ELEMENTS_PER_SEGMENT * n_seg:
        raise DegenerateConfigurationError(
            f"{elements} elements cannot give {MIN_ELEMENTS_PER_SEGMENT} per segment to {n_seg} segments"
        )
    widths = np.array([s.outer_radius - s.inner_radius for s in config.segments])
    counts = np.maximum(MIN_ELEMENTS_PER_SEGMENT, np.round(elements * widths / widths.sum()).astype(int))
    while counts.sum() > elements:
        spare = np.where(counts > MIN_ELEMENTS_PER_SEGMENT, counts, 0)
        counts[int(np.argmax(spare))] -= 1
    while counts.sum() < elements:
        counts[int(np.argmax(widths / counts))] += 1

    pieces = []
    owners = []
    for i, (segment, count) in enumerate(zip(config.segments, counts)):
        radii = np.linspace(segment.inner_radius, segment.outer_radius, 2 * count + 1)
        pieces.append(radii if i == 0 else radii[1:])
        owners.extend([i] * count)
    return RadialMesh(nodes=np.concatenate(pieces), element_segments=np.array(owners), p=p)


def _shape(xi: float) -> tuple[np.ndarray, np.ndarray]:
    N = np.array([0.5 * xi * (xi - 1.0), 1.0 - xi**2, 0.5 * xi * (xi + 1.0)])
    dN = np.array([xi - 0.5, -2.0 * xi, xi + 0.5])
    return N, dN


def _operators(N: np.ndarray, dN: np.ndarray, r: float, p: int):
    """Membrane strains, curvatures, shear strains and the interpolation rows."""
    Bm = np.zeros((3, 3 * DOF))
    Bb = np.zeros((3, 3 * DOF))
    Bs = np.zeros((2, 3 * DOF))
    Nu = np.zeros((3, 3 * DOF))
    Npsi = np.zeros((2, 3 * DOF))
    for a in range(3):
        o = DOF * a
        Bm[0, o + U] = dN[a]
        Bm[1, o + U] = N[a] / r
        Bm[1, o + V] = p * N[a] / r
        Bm[2, o + V] = dN[a] - N[a] / r
        Bm[2, o + U] = -p * N[a] / r

        Bb[0, o + PR] = dN[a]
        Bb[1, o + PR] = N[a] / r
        Bb[1, o + PT] = p * N[a] / r
        Bb[2, o + PT] = dN[a] - N[a] / r
        Bb[2, o + PR] = -p * N[a] / r

        Bs[0, o + PR] = N[a]
        Bs[0, o + W] = dN[a]
        Bs[1, o + PT] = N[a]
        Bs[1, o + W] = -p * N[a] / r

        Nu[0, o + U] = Nu[1, o + V] = Nu[2, o + W] = N[a]
        Npsi[0, o + PR] = Npsi[1, o + PT] = N[a]
    return Bm, Bb, Bs, Nu, Npsi


def _element_matrices(r_nodes: np.ndarray, p: int, section: dict, nu: float,
                      kappa_sq: float) -> tuple[np.ndarray, np.ndarray]:
    c = 0.5 * (1.0 - nu)
    C = np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, c]])
    A, B, D = section["A"] * C, section["B"] * C, section["D"] * C
    I0, I1, I2 = section["I0"], section["I1"], section["I2"]
    jac = 0.5 * (r_nodes[2] - r_nodes[0])

    Ke = np.zeros((3 * DOF, 3 * DOF))
    Me = np.zeros((3 * DOF, 3 * DOF))
    for xi, weight in zip(*GAUSS_FULL):
        N, dN = _shape(xi)
        r = N @ r_nodes
        Bm, Bb, _, Nu, Npsi = _operators(N, dN / jac, r, p)
        dA = weight * jac * r
        Ke += dA * (Bm.T @ A @ Bm + Bm.T @ B @ Bb + Bb.T @ B @ Bm + Bb.T @ D @ Bb)
        inplane = Nu[:2]
        Me += dA * (I0 * Nu.T @ Nu + I1 * (inplane.T @ Npsi + Npsi.T @ inplane) + I2 * Npsi.T @ Npsi)
    for xi, weight in zip(*GAUSS_SHEAR):
        N, dN = _shape(xi)
        r = N @ r_nodes
        _, _, Bs, _, _ = _operators(N, dN / jac, r, p)
        Ke += weight * jac * r * kappa_sq * c * section["A"] * (Bs.T @ Bs)
    return Ke, Me


def _constraint_transform(config: PlateConfig, p: int, mesh: RadialMesh) -> sparse.csr_matrix:
    """Map reduced unknowns to all nodal unknowns (essential conditions and r = 0 regularity)."""
    n_full = mesh.dofs
    bk = np.zeros(n_full, dtype=bool)
    last = len(mesh.nodes) - 1
    if p == 0:
        # torsional family excluded
        bk[V::DOF] = True
        bk[PT::DOF] = True
    for d in EDGE_DOFS[config.outer_bc]:
        bk[DOF * last + d] = True
    slaves = {}
    if config.is_annular:
        for d in EDGE_DOFS[config.inner_bc]:
            bk[d] = True
    elif p == 0:
        bk[[U, PR]] = True
    elif p == 1:
        # finite Cartesian displacement and rotation at the axis: V = -U, psi_theta = -psi_r, w = 0
        bk[W] = True
        slaves = {V: U, PT: PR}
    else:
        bk[:DOF] = True

    bu = ~bk
    for slave, master in slaves.items():
        if bk[master]:
            bk[slave] = True
        bu[slave] = False
    columns = {dof: j for j, dof in enumerate(np.flatnonzero(bu))}
    rows, cols, vals = [], [], []
    for dof, j in columns.items():
        rows.append(dof)
        cols.append(j)
        vals.append(1.0)
    for slave, master in slaves.items():
        if master in columns:
            rows.append(slave)
            cols.append(columns[master])
            vals.append(-1.0)
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n_full, len(columns))).tocsr()


def _check_mesh(config: PlateConfig, p: int, mesh: RadialMesh) -> None:
    if mesh.p != p:
        raise DegenerateConfigurationError(f"mesh was built for p={mesh.p}, assembling p={p}")
    if len(mesh.nodes) != 2 * mesh.elements + 1:
        raise DegenerateConfigurationError("quadratic mesh needs 2 * elements + 1 nodes")
    for e, i in enumerate(mesh.element_segments):
        segment = config.segments[i]
        r0, r2 = mesh.nodes[2 * e], mesh.nodes[2 * e + 2]
        slack = 1e-12 * config.outer_radius
        if r0 < segment.inner_radius - slack or r2 > segment.outer_radius + slack:
            raise DegenerateConfigurationError(f"element {e} [{r0:g}, {r2:g}] leaves segment {segment.index}")
    if abs(mesh.nodes[-1] - config.outer_radius) > 1e-12 * config.outer_radius:
        raise DegenerateConfigurationError("mesh does not reach the outer edge")


def assemble(config: PlateConfig, p: int, mesh: RadialMesh) -> OracleSystem:
    _check_mesh(config, p, mesh)
    material = config.material
    sections = []
    for segment, ints in zip(config.segments, plate_section_integrals(config)):
        h = segment.thickness
        sections.append({
            "A": material.E_c * h * ints.K1_bar,
            "B": material.E_c * h**2 * ints.K2_bar,
            "D": material.E_c * h**3 * ints.K3_bar,
            "I0": material.rho_c * h * ints.I1_bar,
            "I1": material.rho_c * h**2 * ints.I2_bar,
            "I2": material.rho_c * h**3 * ints.I3_bar,
        })

    Kr, Kc, Kv, Mv = [], [], [], []
    for e, i in enumerate(mesh.element_segments):
        Ke, Me = _element_matrices(mesh.nodes[2 * e:2 * e + 3], p, sections[i], material.nu, material.kappa_sq)
        dofs = np.arange(DOF * 2 * e, DOF * (2 * e + 3))
        rr, cc = np.meshgrid(dofs, dofs, indexing="ij")
        Kr.append(rr.ravel())
        Kc.append(cc.ravel())
        Kv.append(Ke.ravel())
        Mv.append(Me.ravel())
    Kr, Kc = np.concatenate(Kr), np.concatenate(Kc)
    shape = (mesh.dofs, mesh.dofs)
    K_full = sparse.coo_matrix((np.concatenate(Kv), (Kr, Kc)), shape=shape).tocsr()
    M_full = sparse.coo_matrix((np.concatenate(Mv), (Kr, Kc)), shape=shape).tocsr()

    T = _constraint_transform(config, p, mesh)
    return OracleSystem(
        K=(T.T @ K_full @ T).tocsr(),
        M=(T.T @ M_full @ T).tocsr(),
        K_full=K_full,
        M_full=M_full,
        transform=T,
        mesh=mesh,
    )


def _residual_ok(K, M, lam: float, phi: np.ndarray) -> bool:
    Kphi = K @ phi
    Mphi = M @ phi
    # normwise backward error; ||K phi|| alone is tiny for rigid-body and thin-plate modes
    scale = (abs(K).sum(axis=0).max() + abs(lam) * abs(M).sum(axis=0).max()) * np.linalg.norm(phi, 1)
    return np.linalg.norm(Kphi - lam * Mphi, 1) <= RESIDUAL_RTOL * scale


def solve_eigens(K, M, count: int) -> EigenSolution:
    """Smallest `count` eigenpairs of K phi = omega^2 M phi."""
    K = sparse.csr_matrix(K)
    M = sparse.csr_matrix(M)
    n = K.shape[0]
    count = min(count, n)
    if count < 1:
        raise OracleError("no unknowns left after applying the edge conditions")

    if n <= settings.ORACLE_DENSE_MAX_DOF or count >= n - 1:
        try:
            values, vectors = linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, count - 1])
        except linalg.LinAlgError as exc:
            raise OracleError(f"generalized eigenproblem failed, mass matrix not positive definite: {exc}") from exc
    else:
        try:
            values, vectors = sparse_linalg.eigsh(K.tocsc(), k=count, M=M.tocsc(), sigma=-1.0, which="LM")
        except (sparse_linalg.ArpackError, RuntimeError) as exc:
            raise OracleError(f"sparse eigensolver did not converge: {exc}") from exc
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    floor = 1e-8 * max(abs(values).max(), 1.0)
    if np.any(values < -floor):
        raise OracleError(f"negative eigenvalue {values.min():.3e}: stiffness is not positive semidefinite")
    values = np.clip(values, 0.0, None)
    for j in range(count):
        if not _residual_ok(K, M, values[j], vectors[:, j]):
            raise OracleError(f"eigenpair {j + 1} failed the residual check")
    return EigenSolution(eigenvalues=values, frequencies=np.sqrt(values) / (2.0 * math.pi), modes=vectors)


def oracle_frequencies(config: PlateConfig, p: int, count: int, elements: Optional[int] = None) -> EigenSolution:
    mesh = build_mesh(config, p, elements)
    system = assemble(config, p, mesh)
    solution = solve_eigens(system.K, system.M, count)
    logger.debug("[ORACLE] p=%d %d elements, %d unknowns", p, mesh.elements, system.K.shape[0])
    return EigenSolution(
        eigenvalues=solution.eigenvalues,
        frequencies=solution.frequencies,
        modes=system.transform @ solution.modes,
        mesh=mesh,
    )


def count_below(solution: EigenSolution, frequency: float, floor: float = 0.0) -> int:
    """Eigenfrequencies in (floor, frequency]."""
    f = solution.frequencies
    return int(np.count_nonzero((f > floor) & (f <= frequency)))
