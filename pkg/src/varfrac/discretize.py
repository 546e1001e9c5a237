"""Sparse Laplacian assembly and region partitioning.

All assembled operators discretise ``-laplacian`` with homogeneous Neumann
conditions, so they are symmetric positive semi-definite with constant
vectors in the null space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh1D:
    n_nodes: int
    spacing: float
    origin: float = 0.0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise MeshError(f"a 1D mesh needs at least 2 nodes, got {self.n_nodes}")
        if not self.spacing > 0:
            raise MeshError(f"node spacing must be positive, got {self.spacing}")

    @classmethod
    def interval(cls, length: float, spacing: float, origin: float = 0.0) -> "Mesh1D":
        n = int(round(length / spacing)) + 1
        return cls(n, spacing, origin)

    @property
    def coords(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n_nodes)

    @property
    def length(self) -> float:
        return self.spacing * (self.n_nodes - 1)


def build_laplacian_1d(mesh: Mesh1D) -> sp.csr_matrix:
    """Three-point Neumann Laplacian with symmetric boundary rows."""
    n, h2 = mesh.n_nodes, mesh.spacing**2
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h2


@dataclass(frozen=True)
class TetMesh:
    nodes: np.ndarray  # (N, 3)
    elements: np.ndarray  # (E, 4), positively oriented

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        elements = np.asarray(self.elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise MeshError("nodes must have shape (N, 3)")
        if elements.ndim != 2 or elements.shape[1] != 4:
            raise MeshError("elements must have shape (E, 4)")
        if elements.size and (elements.min() < 0 or elements.max() >= nodes.shape[0]):
            raise MeshError("element refers to a node index out of range")
        vol = _signed_volumes(nodes, elements)
        flip = vol < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip, 2], elements[flip, 3] = elements[flip, 3], elements[flip, 2].copy()
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def volumes(self) -> np.ndarray:
        return _signed_volumes(self.nodes, self.elements)

    def is_connected(self) -> bool:
        from scipy.sparse.csgraph import connected_components

        n = self.n_nodes
        e = self.elements
        rows = np.repeat(e[:, 0], 3)
        cols = e[:, 1:].ravel()
        graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        ncomp, _ = connected_components(graph, directed=False)
        return ncomp == 1

    def scaled(self, factor: float) -> "TetMesh":
        return TetMesh(self.nodes * factor, self.elements)


def _signed_volumes(nodes, elements):
    p = nodes[elements]
    d = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(d) / 6.0


@dataclass(frozen=True)
class MassStiffness:
    M: np.ndarray  # lumped control-volume measures
    K: sp.csr_matrix

    def __post_init__(self):
        if np.any(~(np.asarray(self.M) > 0)):
            raise ValueError("mass entries must be positive")


def build_fvm_tet(mesh: TetMesh) -> MassStiffness:
    """Vertex-centred finite volumes on a median-dual of a tetrahedral mesh.

    With linear interpolation inside each element the dual-face fluxes give
    exactly the linear finite-element stiffness, and each node receives a
    quarter of every incident element's volume.
    """
    if not mesh.is_connected():
        raise MeshError("mesh is not connected (or has nodes outside every element)")
    vol = mesh.volumes()
    bad = np.flatnonzero(np.abs(vol) <= 1e-14 * max(np.abs(vol).max(initial=0.0), 1e-300))
    if bad.size:
        raise MeshError(f"degenerate (zero-volume) element {int(bad[0])}: nodes {mesh.elements[bad[0]].tolist()}")
    grads = element_gradients(mesh)  # (E, 4, 3)
    ke = vol[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)
    e = mesh.elements
    rows = np.repeat(e, 4, axis=1).ravel()
    cols = np.tile(e, (1, 4)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    K = (K + K.T) * 0.5
    M = np.bincount(e.ravel(), weights=np.repeat(vol / 4.0, 4), minlength=n)
    return MassStiffness(M, K.tocsr())


def element_gradients(mesh: TetMesh) -> np.ndarray:
    """Gradients of the four barycentric basis functions per element."""
    p = mesh.nodes[mesh.elements]
    J = np.transpose(p[:, 1:, :] - p[:, :1, :], (0, 2, 1))  # columns are edge vectors
    Jinv = np.linalg.inv(J)  # rows are grad(lambda_1..3)
    g = np.empty((p.shape[0], 4, 3))
    g[:, 1:, :] = Jinv
    g[:, 0, :] = -Jinv.sum(axis=1)
    return g


@dataclass(frozen=True)
class SymmetrizedOperator:
    """``A_tilde = M^{-1/2} K M^{-1/2}`` together with the scalings.

    ``f(M^{-1} K) b = M^{-1/2} f(A_tilde) M^{1/2} b``.
    """

    A: sp.csr_matrix
    sqrt_mass: np.ndarray
    inv_sqrt_mass: np.ndarray

    def to_symmetric(self, b):
        return self.sqrt_mass * b

    def from_symmetric(self, y):
        return self.inv_sqrt_mass * y


def symmetrize(ms: MassStiffness) -> SymmetrizedOperator:
    M = np.asarray(ms.M, dtype=float)
    if np.any(M <= 0):
        raise ValueError("mass entries must be positive")
    s = 1.0 / np.sqrt(M)
    D = sp.diags(s)
    A = (D @ sp.csr_matrix(ms.K) @ D).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    return SymmetrizedOperator(A, np.sqrt(M), s)


@dataclass(frozen=True)
class RegionPartition:
    """Two-region split of the nodes; ``region_of`` holds 1 or 2 per node."""

    region_of: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.region_of, dtype=np.int8)
        if r.size and not np.all((r == 1) | (r == 2)):
            raise ValueError("regions must be labelled 1 or 2")
        object.__setattr__(self, "region_of", r)

    @property
    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        return np.flatnonzero(self.region_of == 1), np.flatnonzero(self.region_of == 2)

    def mask(self, region: int) -> np.ndarray:
        """Diagonal of the selector ``E_region`` as a 0/1 float vector."""
        return (self.region_of == region).astype(float)

    def select(self, region: int, x):
        """``E_region @ x``."""
        return np.where(self.region_of == region, x, 0.0)

    @classmethod
    def uniform(cls, n: int) -> "RegionPartition":
        return cls(np.ones(n, dtype=np.int8))


Predicate = Callable[[np.ndarray], np.ndarray]


def partition_regions(node_coords, predicate: Predicate) -> RegionPartition:
    """Nodes where ``predicate`` holds form region 2; the rest region 1.

    ``node_coords`` has shape (N,) or (N, d); the predicate is vectorised over
    rows and returns booleans.
    """
    coords = np.asarray(node_coords, dtype=float)
    inside = np.asarray(predicate(coords), dtype=bool)
    if inside.shape != (coords.shape[0],):
        raise ValueError("predicate must return one boolean per node")
    return RegionPartition(np.where(inside, 2, 1).astype(np.int8))


def right_of(x_split: float) -> Predicate:
    """Half-interval split: ``x <= x_split`` stays in region 1."""

    def pred(coords):
        x = coords if coords.ndim == 1 else coords[:, 0]
        return x > x_split

    return pred


def half_interval(length: float, origin: float = 0.0) -> Predicate:
    return right_of(origin + 0.5 * length)


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box; use +-inf for unbounded sides."""

    lower: Sequence[float] = (-math.inf, -math.inf, -math.inf)
    upper: Sequence[float] = (math.inf, math.inf, math.inf)

    def contains(self, coords) -> np.ndarray:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        return np.all((coords > lo) & (coords < hi), axis=1)


def sphere(center, radius) -> Predicate:
    c = np.asarray(center, dtype=float)

    def pred(coords):
        return np.linalg.norm(np.atleast_2d(coords) - c, axis=1) <= radius

    return pred


def sphere_excluding_box(center, radius, exclusion: Box | None = None) -> Predicate:
    inside_sphere = sphere(center, radius)

    def pred(coords):
        coords = np.atleast_2d(coords)
        hit = inside_sphere(coords)
        if exclusion is not None:
            hit &= ~exclusion.contains(coords)
        return hit

    return pred


# Damaged region used for the rabbit-ventricle geometry.
HEART_DAMAGE_CENTER = (1.0352, -0.6256, 0.248)
HEART_DAMAGE_RADIUS = 1.25
HEART_DAMAGE_EXCLUSION = Box(lower=(-0.3, 0.095, -math.inf), upper=(1.3, math.inf, math.inf))
HEART_STIMULUS_CENTER = (0.3513, 0.0707, -1.0772)
HEART_STIMULUS_RADIUS = 0.5


def heart_damage_region() -> Predicate:
    return sphere_excluding_box(HEART_DAMAGE_CENTER, HEART_DAMAGE_RADIUS, HEART_DAMAGE_EXCLUSION)


# --- mesh files -----------------------------------------------------------


def _data_lines(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line.split()


def _is_int(tok: str) -> bool:
    try:
        int(tok)
    except ValueError:
        return False
    return True


def read_tet_mesh(node_path, ele_path, scale: float = 1.0) -> TetMesh:
    """Read ``.node`` / ``.ele`` style files (optional TetGen header lines).

    Node lines are ``index x y z [...]`` and element lines
    ``index n0 n1 n2 n3 [...]``; the index base (0 or 1) is taken from the
    first node index.
    """
    node_rows = list(_data_lines(node_path))
    if node_rows and all(_is_int(t) for t in node_rows[0]) and len(node_rows[0]) <= 4 \
            and len(node_rows[0]) >= 2 and node_rows[0][1] == "3" and len(node_rows) == int(node_rows[0][0]) + 1:
        node_rows = node_rows[1:]
    if not node_rows:
        raise MeshError(f"{node_path}: no nodes")
    try:
        idx = np.array([int(r[0]) for r in node_rows])
        xyz = np.array([[float(t) for t in r[1:4]] for r in node_rows])
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{node_path}: malformed node line ({exc})") from None
    base = int(idx[0])
    if base not in (0, 1):
        raise MeshError(f"{node_path}: first node index must be 0 or 1, got {base}")
    order = idx - base
    if not np.array_equal(np.sort(order), np.arange(order.size)):
        raise MeshError(f"{node_path}: node indices are not contiguous")
    nodes = np.empty_like(xyz)
    nodes[order] = xyz

    ele_rows = list(_data_lines(ele_path))
    if ele_rows and len(ele_rows[0]) < 5:
        ele_rows = ele_rows[1:]
    try:
        elements = np.array([[int(t) for t in r[1:5]] for r in ele_rows], dtype=np.int64) - base
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{ele_path}: malformed element line ({exc})") from None
    return TetMesh(nodes * scale, elements)


def box_tet_mesh(shape, spacing, origin=(0.0, 0.0, 0.0)) -> TetMesh:
    """Structured box split into six tetrahedra per cell (Kuhn triangulation).

    ``shape`` is the number of cells along each axis.
    """
    nx, ny, nz = shape
    hx, hy, hz = (spacing,) * 3 if np.isscalar(spacing) else spacing
    xs = origin[0] + hx * np.arange(nx + 1)
    ys = origin[1] + hy * np.arange(ny + 1)
    zs = origin[2] + hz * np.arange(nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    corner = {(a, b, c): nid(I + a, J + b, K + c) for a in (0, 1) for b in (0, 1) for c in (0, 1)}
    # the six monotone lattice paths from (0,0,0) to (1,1,1)
    tets = []
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        p = [0, 0, 0]
        verts = [corner[tuple(p)]]
        for axis in perm:
            p[axis] = 1
            verts.append(corner[tuple(p)])
        tets.append(np.column_stack(verts))
    return TetMesh(nodes, np.vstack(tets))


def write_tet_mesh(mesh: TetMesh, node_path, ele_path, base: int = 0) -> None:
    with open(node_path, "w") as fh:
        for i, (x, y, z) in enumerate(mesh.nodes):
            fh.write(f"{i + base} {float(x)!r} {float(y)!r} {float(z)!r}\n")
    with open(ele_path, "w") as fh:
        for i, e in enumerate(mesh.elements):
            fh.write(f"{i + base} " + " ".join(str(int(v) + base) for v in e) + "\n")


def mesh_paths(stem) -> tuple[Path, Path]:
    """``<stem>.node`` and ``<stem>.ele``; a trailing .node/.ele on ``stem`` is dropped."""
    stem = Path(stem)
    if stem.suffix in (".node", ".ele"):
        stem = stem.with_suffix("")
    return Path(f"{stem}.node"), Path(f"{stem}.ele")
