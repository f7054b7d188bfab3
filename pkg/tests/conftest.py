import pytest

from ldglayer import MeshKind, MeshSpec, build_mesh, boundary_layer_case, solve_ldg
from ldglayer.errors import error_record


@pytest.fixture(scope="session")
def layer_solution_s_k1():
    """One mid-size solved benchmark case shared by several tests."""
    case = boundary_layer_case(1e-4)
    mesh = build_mesh(MeshSpec(MeshKind.SHISHKIN, 32, 1e-4, 2.5))
    solution = solve_ldg(case.problem, mesh, 1)
    return case, mesh, solution


def solve_and_measure(kind, k, eps, n, sigma=None):
    case = boundary_layer_case(eps)
    sigma = (k + 1.5) if sigma is None else sigma
    mesh = build_mesh(MeshSpec(kind, n, eps, sigma))
    w = solve_ldg(case.problem, mesh, k)
    rec = error_record(case.exact_u, case.exact_p, case.exact_q, w, case.problem)
    return case, mesh, w, rec
