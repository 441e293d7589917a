import math

import numpy as np
import pytest
import scipy.sparse as sp

from perfospec import fem
from perfospec import geometry as G
from perfospec import mesh as M
from perfospec.errors import InsufficientSamples, OutsideDomain, SingularElement

UNIT_TRI = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])

# closed-form P2 mass pattern (times area / 180), local order v0 v1 v2 m01 m12 m20
P2_MASS_PATTERN = np.array(
    [
        [6, -1, -1, 0, -4, 0],
        [-1, 6, -1, 0, 0, -4],
        [-1, -1, 6, -4, 0, 0],
        [0, 0, -4, 32, 16, 16],
        [-4, 0, 0, 16, 32, 16],
        [0, -4, 0, 16, 16, 32],
    ],
    dtype=float,
)


def single_triangle_mesh(p):
    be = np.array([[0, 1], [1, 2], [2, 0]])
    return M.Mesh2D(np.asarray(p, float), np.array([[0, 1, 2]]), be, np.full(3, M.OUTER, dtype=np.int8))


@pytest.fixture(scope="module")
def hole_mesh():
    hole = G.HoleInstance(G.StarShape.circle(), 0.1, (0.5, 0.5))
    return M.generate(M.Rectangle(1.0, 1.0), hole, h_far=0.08, h_near=0.02)


def test_p1_unit_triangle():
    K, Mm = fem.p1_element_matrices(UNIT_TRI)
    K_ref = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    M_ref = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    np.testing.assert_allclose(K[0], K_ref, atol=1e-15)
    np.testing.assert_allclose(Mm[0], M_ref, atol=1e-15)


def test_p2_mass_matches_closed_form():
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, (5, 3, 2))
    _, area = fem.barycentric_gradients(p)
    p[area < 0] = p[area < 0][:, [0, 2, 1]]
    _, Mm = fem.p2_element_matrices(p)
    _, area = fem.barycentric_gradients(p)
    for t in range(5):
        np.testing.assert_allclose(Mm[t], area[t] / 180.0 * P2_MASS_PATTERN, atol=1e-14)


def test_p2_stiffness_against_second_rule():
    # gradients of P2 functions are linear, so any rule exact for quadratics reproduces K
    p = np.array([[[0.1, 0.0], [1.2, 0.3], [0.4, 0.9]]])
    K, _ = fem.p2_element_matrices(p)
    grads, area = fem.barycentric_gradients(p)
    K_alt = np.zeros((6, 6))
    for lam, w in zip(fem.QUAD4_POINTS, fem.QUAD4_WEIGHTS):
        g = fem.p2_basis_gradients(lam, grads)[0]
        K_alt += w * g @ g.T
    np.testing.assert_allclose(K[0], area[0] * K_alt, atol=1e-13)
    np.testing.assert_allclose(K[0].sum(axis=1), 0.0, atol=1e-13)


def test_p2_basis_partition_of_unity():
    rng = np.random.default_rng(0)
    lam = rng.dirichlet(np.ones(3), 20)
    np.testing.assert_allclose(fem.p2_basis(lam).sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(fem.p2_basis(np.eye(3))[:, :3], np.eye(3), atol=1e-15)


@pytest.mark.parametrize("order", [1, 2])
def test_global_matrices_symmetric_and_neumann_null(hole_mesh, order):
    _, K, Mm = fem.assemble_global(hole_mesh, order)
    assert abs(K - K.T).max() <= 1e-14 * abs(K).max()
    assert abs(Mm - Mm.T).max() <= 1e-14 * abs(Mm).max()
    ones = np.ones(K.shape[0])
    assert np.max(np.abs(K @ ones)) <= 1e-12
    area = ones @ (Mm @ ones)
    assert area == pytest.approx(hole_mesh.total_area(), rel=1e-12)


def _dense_reference(mesh):
    """Element-by-element P1 assembly from the Jacobian formula."""
    n = mesh.n_vertices
    K = np.zeros((n, n))
    Mm = np.zeros((n, n))
    dref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        J = np.column_stack([p[1] - p[0], p[2] - p[0]])
        detJ = np.linalg.det(J)
        G_ = dref @ np.linalg.inv(J)
        K[np.ix_(tri, tri)] += 0.5 * abs(detJ) * G_ @ G_.T
        Mm[np.ix_(tri, tri)] += abs(detJ) / 24.0 * (np.ones((3, 3)) + np.eye(3))
    return K, Mm


def test_assembly_matches_dense_reference():
    mesh = M.structured_rectangle(1.3, 0.9, 4, 3, pattern="right")
    assert mesh.n_vertices <= 50
    _, K, Mm = fem.assemble_global(mesh, 1)
    K_ref, M_ref = _dense_reference(mesh)
    np.testing.assert_allclose(K.toarray(), K_ref, atol=1e-14)
    np.testing.assert_allclose(Mm.toarray(), M_ref, atol=1e-15)


def test_dirichlet_elimination(hole_mesh):
    op = fem.assemble(hole_mesh)
    outer = set(hole_mesh.tagged_vertices(M.OUTER).tolist())
    assert not outer & set(op.free_map.tolist())
    hole = set(hole_mesh.tagged_vertices(M.HOLE).tolist())
    assert hole <= set(op.free_map.tolist())
    assert op.n_free == hole_mesh.n_vertices - len(outer)


def test_singular_element_rejected():
    mesh = single_triangle_mesh([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(SingularElement):
        fem.assemble(mesh)


@pytest.mark.parametrize("order", [1, 2])
def test_evaluate_reproduces_linears(hole_mesh, order):
    op = fem.assemble(hole_mesh, order)
    # a linear function vanishing on the outer boundary does not exist, so use the full nodal vector
    space = op.space
    u = 0.3 + 2.0 * space.nodes[:, 0] - 1.5 * space.nodes[:, 1]
    pts = np.array([[0.2, 0.3], [0.71, 0.62], [0.5, 0.35]])
    vals = fem.evaluate_nodal_many(space, u, pts)
    np.testing.assert_allclose(vals, 0.3 + 2.0 * pts[:, 0] - 1.5 * pts[:, 1], atol=1e-13)


def test_evaluate_interpolant():
    mesh = M.structured_rectangle(1.0, 1.0, 32, 32)
    op = fem.assemble(mesh, 2)
    f = fem.interpolate(op, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    assert fem.evaluate(f, mesh, (0.5, 0.5)) == pytest.approx(1.0, abs=1e-12)
    assert fem.evaluate(f, mesh, (0.31, 0.77)) == pytest.approx(
        math.sin(0.31 * math.pi) * math.sin(0.77 * math.pi), abs=1e-4
    )


def test_outside_domain(hole_mesh):
    op = fem.assemble(hole_mesh)
    f = fem.interpolate(op, lambda x, y: x * 0)
    with pytest.raises(OutsideDomain):
        fem.evaluate(f, hole_mesh, (0.5, 0.5))
    with pytest.raises(OutsideDomain):
        fem.evaluate(f, hole_mesh, (1.5, 0.5))


@pytest.mark.parametrize("order", [1, 2])
def test_recover_gradient_exact_on_quadratics(order):
    mesh = M.structured_rectangle(1.0, 1.0, 16, 16)
    op = fem.assemble(mesh, order)
    p = np.array([0.43, 0.58])
    f = fem.interpolate(op, lambda x, y: x)
    np.testing.assert_allclose(fem.recover_gradient(f, mesh, p, 0.2), [1.0, 0.0], atol=1e-12)
    f = fem.interpolate(op, lambda x, y: 0.5 * (x * x + y * y))
    np.testing.assert_allclose(fem.recover_gradient(f, mesh, p, 0.2), p, atol=1e-12)


def test_recover_gradient_errors():
    mesh = M.structured_rectangle(1.0, 1.0, 4, 4)
    op = fem.assemble(mesh)
    f = fem.interpolate(op, lambda x, y: x)
    with pytest.raises(InsufficientSamples):
        fem.recover_gradient(f, mesh, (0.5, 0.5), 0.2)
    with pytest.raises(ValueError):
        fem.recover_gradient(f, mesh, (0.1, 0.5), 0.2)


def test_export_coo(tmp_path):
    A = sp.csr_matrix(np.array([[2.0, 0.0], [0.5, 1.0 / 3.0]]))
    path = tmp_path / "a.coo"
    fem.export_coo(A, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "2 2 3"
    rows = [l.split() for l in lines[1:]]
    got = {(int(i), int(j)): float(v) for i, j, v in rows}
    assert got == {(1, 1): 2.0, (2, 1): 0.5, (2, 2): 1.0 / 3.0}
