import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.eigensolver import EigenPairs, dense_eigen_oracle
from core.exceptions import ClusteredEigenvalueError, IncompatibleRightHandSideError, InvalidInputError
from core.fem_assembly import eigen_gradient_field
from core.grid import BoundaryTag, build_dof_map
from core.sensitivity import (
    BorderedSystem,
    eigenfunction_derivative,
    eigenvalue_derivative,
    first_cluster_gradient,
    reassemble,
    semi_derivative_first,
)
from models.materials import CutoffParams
from tests.conftest import direction, interior_phase


@pytest.fixture
def design(cantilever, cantilever_dofs, mats2, cutoff2, rng):
    phi = interior_phase(cantilever.n_vertices, 2, rng)
    h = direction(cantilever.n_vertices, 2, rng)
    K, M, dK, dM = reassemble(cantilever, cantilever_dofs, phi, h, mats2, cutoff2)
    return phi, h, K, M, dK, dM, dense_eigen_oracle(K, M)


def _oracle(mesh, dofmap, phi, mats, p):
    K, M, _, _ = reassemble(mesh, dofmap, phi, np.zeros_like(phi), mats, p)
    return dense_eigen_oracle(K, M)


@pytest.mark.parametrize("index", [0, 1, 2])
def test_eigenvalue_derivative_matches_central_difference(design, cantilever, cantilever_dofs,
                                                          mats2, cutoff2, index):
    phi, h, *_, pairs = design
    t = 1e-4
    plus = _oracle(cantilever, cantilever_dofs, phi + t * h, mats2, cutoff2).lambdas[index]
    minus = _oracle(cantilever, cantilever_dofs, phi - t * h, mats2, cutoff2).lambdas[index]
    exact = eigenvalue_derivative(cantilever, cantilever_dofs, phi, pairs, index, h, mats2, cutoff2)
    assert exact == pytest.approx((plus - minus) / (2 * t), rel=1e-5)


def test_gradient_field_represents_derivative(design, cantilever, cantilever_dofs, mats2, cutoff2):
    phi, h, *_, pairs = design
    g = eigen_gradient_field(cantilever, cantilever_dofs, phi, pairs.vectors[:, 0],
                             float(pairs.lambdas[0]), mats2, cutoff2)
    exact = eigenvalue_derivative(cantilever, cantilever_dofs, phi, pairs, 0, h, mats2, cutoff2)
    assert np.sum(g * h) == pytest.approx(exact, rel=1e-10)


def test_eigenvalue_derivative_rejects_clusters(design, cantilever, cantilever_dofs, mats2, cutoff2):
    phi, h, *_, pairs = design
    clustered = EigenPairs(pairs.lambdas[:2], pairs.vectors[:, :2], pairs.residuals[:2], ((0, 2),))
    with pytest.raises(ClusteredEigenvalueError):
        eigenvalue_derivative(cantilever, cantilever_dofs, phi, clustered, 0, h, mats2, cutoff2)


def test_eigenfunction_derivative(design, cantilever, cantilever_dofs, mats2, cutoff2):
    phi, h, K, M, dK, dM, pairs = design
    lam, w = float(pairs.lambdas[0]), pairs.vectors[:, 0]
    dlam = float(w @ (dK @ w)) - lam * float(w @ (dM @ w))
    dw = eigenfunction_derivative(K, M, dK, dM, lam, w, dlam)
    # normalization constraint (Mw)ᵀw′ = −½ wᵀM′w
    assert float((M @ w) @ dw) == pytest.approx(-0.5 * float(w @ (dM @ w)), abs=1e-10)

    t = 1e-4
    shifted = []
    for s in (t, -t):
        other = _oracle(cantilever, cantilever_dofs, phi + s * h, mats2, cutoff2).vectors[:, 0]
        shifted.append(other if other @ (M @ w) > 0.0 else -other)
    fd = (shifted[0] - shifted[1]) / (2 * t)
    assert np.linalg.norm(dw - fd) <= 1e-5 * np.linalg.norm(dw)


def test_eigenfunction_derivative_rejects_wrong_eigenvalue_derivative(design):
    _, _, K, M, dK, dM, pairs = design
    lam, w = float(pairs.lambdas[0]), pairs.vectors[:, 0]
    dlam = float(w @ (dK @ w)) - lam * float(w @ (dM @ w))
    with pytest.raises(IncompatibleRightHandSideError):
        eigenfunction_derivative(K, M, dK, dM, lam, w, dlam + 10.0 * lam)


@pytest.mark.parametrize("ordering", ["MMD_AT_PLUS_A", "NATURAL"])
def test_column_ordering_does_not_change_the_solution(design, ordering):
    _, _, K, M, dK, dM, pairs = design
    lam, w = float(pairs.lambdas[0]), pairs.vectors[:, 0]
    dlam = float(w @ (dK @ w)) - lam * float(w @ (dM @ w))
    system = BorderedSystem.build(K, M, lam, w)
    rhs = -(dK @ w) + lam * (dM @ w) + dlam * system.border
    u_ref, alpha_ref = system.solve(rhs, 0.25, permc_spec="COLAMD")
    u, alpha = system.solve(rhs, 0.25, permc_spec=ordering)
    assert np.linalg.norm(u - u_ref) <= 1e-10 * np.linalg.norm(u_ref)
    assert alpha == pytest.approx(alpha_ref, abs=1e-10 * (1.0 + abs(alpha_ref)))

    reference = eigenfunction_derivative(K, M, dK, dM, lam, w, dlam, permc_spec="COLAMD")
    dw = eigenfunction_derivative(K, M, dK, dM, lam, w, dlam, permc_spec=ordering)
    assert np.linalg.norm(dw - reference) <= 1e-10 * np.linalg.norm(reference)


def test_bordered_system_needs_nonzero_border(design):
    _, _, K, M, *_ = design
    with pytest.raises(InvalidInputError):
        BorderedSystem.build(K, M, 1.0, np.zeros(K.shape[0]))


def test_semi_derivative_reduces_to_derivative_for_simple_eigenvalue(design, cantilever, cantilever_dofs,
                                                                      mats2, cutoff2):
    phi, h, *_, pairs = design
    semi = semi_derivative_first(cantilever, cantilever_dofs, phi, pairs.vectors[:, 0],
                                 float(pairs.lambdas[0]), h, mats2, cutoff2)
    exact = eigenvalue_derivative(cantilever, cantilever_dofs, phi, pairs, 0, h, mats2, cutoff2)
    assert semi == pytest.approx(exact, rel=1e-10)
    field = first_cluster_gradient(cantilever, cantilever_dofs, phi, pairs.vectors[:, :1],
                                   float(pairs.lambdas[0]), mats2, cutoff2)
    assert np.sum(field * h) == pytest.approx(exact, rel=1e-10)


def test_semi_derivative_rejects_non_orthonormal_basis(design, cantilever, cantilever_dofs, mats2, cutoff2):
    phi, h, *_, pairs = design
    with pytest.raises(InvalidInputError):
        semi_derivative_first(cantilever, cantilever_dofs, phi, 2.0 * pairs.vectors[:, :2],
                              float(pairs.lambdas[0]), h, mats2, cutoff2)


def test_repeated_first_eigenvalue(symmetric_square, mats_double, rng):
    mesh, mats = symmetric_square, mats_double
    p = CutoffParams.default_for(mats)
    dofmap = build_dof_map(mesh, BoundaryTag.DIRICHLET_D)
    phi = np.tile([0.5, 0.5], (mesh.n_vertices, 1))
    pairs = _oracle(mesh, dofmap, phi, mats, p)
    start, stop = pairs.group_of(0)
    assert stop - start == 2
    lam1 = float(pairs.lambdas[0])
    basis = pairs.vectors[:, :2]
    h = direction(mesh.n_vertices, 2, rng, scale=0.1)

    semi = semi_derivative_first(mesh, dofmap, phi, basis, lam1, h, mats, p)
    t = 1e-5
    one_sided = (_oracle(mesh, dofmap, phi + t * h, mats, p).lambdas[0] - lam1) / t
    assert semi == pytest.approx(one_sided, abs=1e-4 * lam1)

    # the minimum over the eigenspace lies below every basis direction
    for u in basis.T:
        single = semi_derivative_first(mesh, dofmap, phi, u, lam1, h, mats, p)
        assert semi <= single + 1e-12 * lam1
    # λ₁ is concave along ±h at a double eigenvalue
    assert semi + semi_derivative_first(mesh, dofmap, phi, basis, lam1, -h, mats, p) <= 1e-12 * lam1
