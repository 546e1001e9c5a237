import math

import numpy as np
import pytest
import scipy.sparse as sp

from varfrac.discretize import (
    HEART_DAMAGE_CENTER,
    Box,
    Mesh1D,
    MassStiffness,
    MeshError,
    RegionPartition,
    TetMesh,
    box_tet_mesh,
    build_fvm_tet,
    build_laplacian_1d,
    heart_damage_region,
    mesh_paths,
    partition_regions,
    read_tet_mesh,
    right_of,
    half_interval,
    sphere_excluding_box,
    symmetrize,
    write_tet_mesh,
)

UNIT_TET = TetMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float), np.array([[0, 1, 2, 3]]))


def element_stiffness_oracle(p):
    """Linear-element stiffness from barycentric gradients solved per element."""
    T = np.vstack([np.ones(4), p.T])  # rows: 1, x, y, z
    coeff = np.linalg.inv(T)  # lambda_i = coeff[i] @ (1, x, y, z)
    grads = coeff[:, 1:]
    vol = abs(np.linalg.det(T)) / 6.0
    return vol * grads @ grads.T


class TestLaplacian1D:
    def test_two_nodes(self):
        A = build_laplacian_1d(Mesh1D(2, 1.0)).toarray()
        np.testing.assert_array_equal(A, [[1, -1], [-1, 1]])

    def test_three_nodes(self):
        A = build_laplacian_1d(Mesh1D(3, 1.0)).toarray()
        np.testing.assert_array_equal(A, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_spacing_scales_entries(self):
        A = build_laplacian_1d(Mesh1D(4, 0.5)).toarray()
        assert A[1, 1] == pytest.approx(2 / 0.25)
        assert A[0, 1] == pytest.approx(-1 / 0.25)

    @pytest.mark.parametrize("n", [2, 5, 50, 200])
    def test_constants_in_null_space(self, n):
        A = build_laplacian_1d(Mesh1D(n, 0.1))
        assert np.max(np.abs(A @ np.ones(n))) <= 1e-12

    def test_symmetric_and_psd(self):
        A = build_laplacian_1d(Mesh1D(40, 0.25))
        assert abs(A - A.T).max() == 0
        lam = np.linalg.eigvalsh(A.toarray())
        assert lam.min() >= -1e-10 * lam.max()

    @pytest.mark.parametrize("n", [10, 101, 200])
    def test_analytic_neumann_spectrum(self, n):
        h = 0.1
        lam = np.linalg.eigvalsh(build_laplacian_1d(Mesh1D(n, h)).toarray())
        k = np.arange(n)
        exact = np.sort(4.0 / h**2 * np.sin(k * np.pi / (2 * n)) ** 2)
        np.testing.assert_allclose(lam[1:], exact[1:], rtol=1e-10)
        assert abs(lam[0]) <= 1e-10 * lam[-1]

    def test_invalid_mesh(self):
        with pytest.raises(MeshError):
            Mesh1D(1, 1.0)
        with pytest.raises(MeshError):
            Mesh1D(5, 0.0)

    def test_interval_coordinates(self):
        m = Mesh1D.interval(10.0, 0.05)
        assert m.n_nodes == 201
        assert m.coords[-1] == pytest.approx(10.0)


class TestFiniteVolume:
    def test_unit_tetrahedron_mass(self):
        ms = build_fvm_tet(UNIT_TET)
        np.testing.assert_allclose(ms.M, np.full(4, 1.0 / 24.0), rtol=1e-14)

    def test_unit_tetrahedron_stiffness(self):
        ms = build_fvm_tet(UNIT_TET)
        np.testing.assert_allclose(ms.K.toarray(), element_stiffness_oracle(UNIT_TET.nodes), atol=1e-14)

    def test_two_elements_match_elementwise_oracle(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1.0]])
        elems = np.array([[0, 1, 2, 3], [1, 2, 3, 4]])
        ms = build_fvm_tet(TetMesh(nodes, elems))
        K = np.zeros((5, 5))
        for e in elems:
            K[np.ix_(e, e)] += element_stiffness_oracle(nodes[e])
        np.testing.assert_allclose(ms.K.toarray(), K, atol=1e-13)
        assert abs(ms.K - ms.K.T).max() == 0

    def test_box_mesh_invariants(self):
        mesh = box_tet_mesh((3, 2, 2), (0.5, 0.25, 0.4))
        ms = build_fvm_tet(mesh)
        assert np.max(np.abs(ms.K @ np.ones(mesh.n_nodes))) <= 1e-12
        assert ms.M.sum() == pytest.approx(1.5 * 0.5 * 0.8, rel=1e-12)
        lam = np.linalg.eigvalsh(ms.K.toarray())
        assert lam.min() >= -1e-10 * lam.max()

    def test_inverted_element_is_repaired(self):
        flipped = TetMesh(UNIT_TET.nodes, np.array([[0, 2, 1, 3]]))
        assert flipped.volumes()[0] > 0
        np.testing.assert_allclose(build_fvm_tet(flipped).K.toarray(), build_fvm_tet(UNIT_TET).K.toarray())

    def test_degenerate_element_named(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0.0]])
        elems = np.array([[0, 1, 2, 3], [0, 1, 2, 4]])  # second one is flat
        with pytest.raises(MeshError, match="element 1"):
            build_fvm_tet(TetMesh(nodes, elems))

    def test_disconnected_mesh_rejected(self):
        nodes = np.vstack([UNIT_TET.nodes, UNIT_TET.nodes + 5.0])
        elems = np.array([[0, 1, 2, 3], [4, 5, 6, 7]])
        with pytest.raises(MeshError, match="connected"):
            build_fvm_tet(TetMesh(nodes, elems))

    def test_out_of_range_index(self):
        with pytest.raises(MeshError):
            TetMesh(UNIT_TET.nodes, np.array([[0, 1, 2, 4]]))


class TestSymmetrize:
    def test_identity_mass(self):
        K = build_fvm_tet(UNIT_TET).K
        S = symmetrize(MassStiffness(np.ones(4), K))
        np.testing.assert_allclose(S.A.toarray(), K.toarray(), atol=1e-15)

    def test_two_by_two_example(self):
        S = symmetrize(MassStiffness(np.array([4.0, 1.0]), sp.csr_matrix([[1.0, -1.0], [-1.0, 1.0]])))
        np.testing.assert_allclose(S.A.toarray(), [[0.25, -0.5], [-0.5, 1.0]], atol=1e-15)

    def test_same_spectrum_as_mass_scaled(self):
        ms = build_fvm_tet(box_tet_mesh((2, 2, 1), 0.5))
        S = symmetrize(ms)
        lam_sym = np.linalg.eigvalsh(S.A.toarray())
        lam_gen = np.sort(np.linalg.eigvals(ms.K.toarray() / ms.M[:, None]).real)
        np.testing.assert_allclose(lam_sym, lam_gen, atol=1e-10 * lam_sym.max())

    def test_scalings_invert(self, rng):
        S = symmetrize(build_fvm_tet(UNIT_TET))
        b = rng.standard_normal(4)
        np.testing.assert_allclose(S.from_symmetric(S.to_symmetric(b)), b, rtol=1e-14)

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ValueError):
            MassStiffness(np.array([1.0, 0.0]), sp.identity(2, format="csr"))


class TestPartition:
    def test_half_interval_closed_on_left(self):
        x = np.array([0.0, 4.99, 5.0, 5.01, 10.0])
        part = partition_regions(x, half_interval(10.0))
        np.testing.assert_array_equal(part.region_of, [1, 1, 1, 2, 2])

    def test_grid_split_at_midpoint(self):
        x = Mesh1D.interval(10.0, 0.01).coords
        part = partition_regions(x, right_of(5.0))
        i = int(np.argmin(np.abs(x - 5.0)))
        assert part.region_of[i] == 1 and part.region_of[i + 1] == 2

    def test_empty_region(self):
        part = partition_regions(np.linspace(0, 1, 7), lambda c: np.zeros(c.shape[0], bool))
        assert part.indices[1].size == 0
        np.testing.assert_array_equal(part.region_of, 1)

    def test_selectors_sum_to_identity(self, rng):
        part = RegionPartition(rng.integers(1, 3, size=30))
        x = rng.standard_normal(30)
        np.testing.assert_array_equal(part.select(1, x) + part.select(2, x), x)
        np.testing.assert_array_equal(part.mask(1) + part.mask(2), np.ones(30))
        i1, i2 = part.indices
        assert np.intersect1d(i1, i2).size == 0 and i1.size + i2.size == 30

    def test_bad_labels(self):
        with pytest.raises(ValueError):
            RegionPartition(np.array([1, 3]))

    def test_heart_damage_sphere_with_exclusion(self):
        c = np.array(HEART_DAMAGE_CENTER)
        pts = np.array([
            c,  # centre: x = 1.0352 < 1.3 but y < 0.095, so not excluded
            c + [0.0, 0.0, 1.2],  # inside the sphere
            c + [0.0, 0.0, 1.3],  # outside the sphere
            [1.0, 0.2, 0.248],  # inside the sphere but in the excluded box
            [1.4, 0.2, 0.248],  # inside the sphere, x >= 1.3 so not excluded
        ])
        dist = np.linalg.norm(pts - c, axis=1)
        assert dist[3] < 1.25 and dist[4] < 1.25
        part = partition_regions(pts, heart_damage_region())
        np.testing.assert_array_equal(part.region_of, [2, 2, 1, 1, 2])

    def test_open_box(self):
        pred = sphere_excluding_box((0, 0, 0), 1.0, Box(lower=(0, 0, 0), upper=(1, 1, 1)))
        hit = pred(np.array([[0.5, 0.5, 0.5], [-0.5, 0.5, 0.5], [0.0, 0.5, 0.5]]))
        np.testing.assert_array_equal(hit, [False, True, True])


class TestMeshFiles:
    @pytest.mark.parametrize("base", [0, 1])
    def test_round_trip(self, tmp_path, base):
        mesh = box_tet_mesh((2, 1, 1), 0.5)
        node, ele = mesh_paths(tmp_path / "box")
        write_tet_mesh(mesh, node, ele, base=base)
        back = read_tet_mesh(node, ele)
        np.testing.assert_array_equal(back.nodes, mesh.nodes)
        np.testing.assert_array_equal(back.elements, mesh.elements)

    def test_tetgen_headers_and_scale(self, tmp_path):
        (tmp_path / "m.1.node").write_text(
            "4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n# comment\n")
        (tmp_path / "m.1.ele").write_text("1 4 0\n1 1 2 3 4\n")
        node, ele = mesh_paths(tmp_path / "m.1")
        assert node.name == "m.1.node" and ele.name == "m.1.ele"
        mesh = read_tet_mesh(node, ele, scale=2.0)
        np.testing.assert_array_equal(mesh.nodes[1], [2.0, 0.0, 0.0])
        np.testing.assert_array_equal(mesh.elements[0], [0, 1, 2, 3])

    def test_mesh_paths_strip_suffix(self):
        assert mesh_paths("a/heart.node") == mesh_paths("a/heart.ele") == mesh_paths("a/heart")

    def test_malformed(self, tmp_path):
        (tmp_path / "bad.node").write_text("0 0 0 zero\n")
        (tmp_path / "bad.ele").write_text("0 0 0 0 0\n")
        with pytest.raises(MeshError, match="bad.node"):
            read_tet_mesh(tmp_path / "bad.node", tmp_path / "bad.ele")

    def test_scaled_volume(self):
        assert UNIT_TET.scaled(2.0).volumes()[0] == pytest.approx(8.0 / 6.0)
        assert math.isclose(build_fvm_tet(UNIT_TET.scaled(2.0)).M.sum(), 8.0 / 6.0, rel_tol=1e-14)
