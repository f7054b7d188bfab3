"""Energy/L2/Linf error measures, convergence rates, and identity checks.

The energy norm of the error e = (u - U, p - P, q - Q) uses the same four
terms as the scheme-induced norm; interior jumps of the continuous exact
functions vanish, so [e_p]_j = -[P]_j there, while the boundary jumps use the
exact boundary values ([e]_0 = e_0^+, [e]_N = -e_N^-).

Error quadrature defaults to 20 Gauss points per element; layer-adapted
meshes resolve the layer factor within each fine element, and
``energy_quadrature_drift`` exposes the 20-vs-40-point self-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import (LayerFn, PiecewisePoly, ProjectionSign, Quadrature,
                    element_values, eval_fn, gauss_quadrature, layer_moments,
                    project_gauss_radau, quad_points)
from .cases import TestCase, boundary_layer_case
from .meshes import Mesh
from .solver import LdgSolution, Problem, solve_ldg

ERROR_QUAD_POINTS = 20


@dataclass(frozen=True)
class ErrorRecord:
    """Error measures of one solved case.

    ``energy`` is the square root of the sum of the four stored parts
    (eps-weighted P jumps, a-weighted P misfit, (c-b'/2)-weighted U misfit,
    b-weighted U jumps); ``jump_u`` / ``jump_p`` are the unweighted jump-sum
    roots.
    """

    energy: float
    l2_u: float
    l2_p: float
    l2_q: float
    linf_u_fine: float
    jump_u: float
    jump_p: float
    part_p_jump: float
    part_p_l2: float
    part_u_l2: float
    part_u_jump: float


def _boundary_values(fn) -> tuple[float, float]:
    left = float(np.asarray(eval_fn(fn, 0.0, 1.0), dtype=float))
    right = float(np.asarray(eval_fn(fn, 1.0, 0.0), dtype=float))
    return left, right


def _error_jumps(exact_fn, v: PiecewisePoly) -> np.ndarray:
    """[exact - v]_j for j = 0..N, using continuity of the exact function."""
    minus = v.trace_minus_all()
    plus = v.trace_plus_all()
    left, right = _boundary_values(exact_fn)
    out = np.empty(v.mesh.n_elements + 1)
    out[0] = left - plus[0]
    out[1:-1] = minus[:-1] - plus[1:]   # -[v]_j at interior nodes
    out[-1] = minus[-1] - right
    return out


def error_record(exact_u, exact_p, exact_q, w: LdgSolution, problem: Problem,
                 quad: Quadrature | None = None) -> ErrorRecord:
    """All error measures of a solved case against the exact triple."""
    if quad is None:
        quad = gauss_quadrature(ERROR_QUAD_POINTS)
    mesh = w.U.mesh
    hw = 0.5 * mesh.widths[:, None] * quad.weights[None, :]
    x, _ = quad_points(mesh, quad)

    eu = element_values(exact_u, mesh, quad) - w.U.values_at(quad)
    ep = element_values(exact_p, mesh, quad) - w.P.values_at(quad)
    eq = element_values(exact_q, mesh, quad) - w.Q.values_at(quad)

    aq = np.broadcast_to(np.asarray(problem.a(x), dtype=float), x.shape)
    cbq = np.broadcast_to(np.asarray(problem.c(x), dtype=float)
                          - 0.5 * np.asarray(problem.bprime(x), dtype=float),
                          x.shape)
    bn = np.broadcast_to(np.asarray(problem.b(mesh.nodes), dtype=float),
                         mesh.nodes.shape)

    jumps_p = _error_jumps(exact_p, w.P)
    jumps_u = _error_jumps(exact_u, w.U)

    part_p_jump = 0.5 * problem.eps * float((jumps_p**2).sum())
    part_p_l2 = float((hw * aq * ep**2).sum())
    part_u_l2 = float((hw * cbq * eu**2).sum())
    part_u_jump = 0.5 * float((np.abs(bn) * jumps_u**2).sum())

    fine = slice(mesh.n_coarse, mesh.n_elements)
    eu_fine = np.abs(eu[fine]).max() if mesh.n_elements >= 2 else np.abs(eu).max()
    eu_fine = max(float(eu_fine), _linf_trace_misfit(exact_u, w.U, fine))

    return ErrorRecord(
        energy=math.sqrt(part_p_jump + part_p_l2 + part_u_l2 + part_u_jump),
        l2_u=float(np.sqrt((hw * eu**2).sum())),
        l2_p=float(np.sqrt((hw * ep**2).sum())),
        l2_q=float(np.sqrt((hw * eq**2).sum())),
        linf_u_fine=eu_fine,
        jump_u=float(np.sqrt((jumps_u**2).sum())),
        jump_p=float(np.sqrt((jumps_p**2).sum())),
        part_p_jump=part_p_jump,
        part_p_l2=part_p_l2,
        part_u_l2=part_u_l2,
        part_u_jump=part_u_jump,
    )


def _linf_trace_misfit(exact_fn, v: PiecewisePoly, elems: slice) -> float:
    """Max |exact - v| over the element endpoints of the selected range."""
    mesh = v.mesh
    idx = np.arange(mesh.n_elements)[elems]
    lefts = np.abs(
        np.asarray(eval_fn(exact_fn, mesh.nodes[idx], mesh.offsets[idx]), dtype=float)
        - v.trace_plus_all()[idx])
    rights = np.abs(
        np.asarray(eval_fn(exact_fn, mesh.nodes[idx + 1], mesh.offsets[idx + 1]),
                   dtype=float)
        - v.trace_minus_all()[idx])
    return float(max(lefts.max(), rights.max()))


def error_energy_norm(exact_triple, w: LdgSolution, problem: Problem,
                      quad: Quadrature | None = None) -> float:
    """Energy norm of (u, p, q) - (U, P, Q)."""
    exact_u, exact_p, exact_q = exact_triple
    return error_record(exact_u, exact_p, exact_q, w, problem, quad).energy


def l2_error(exact, v: PiecewisePoly, quad: Quadrature | None = None) -> float:
    """Composite Gauss L2 distance between a function and a piecewise poly."""
    if quad is None:
        quad = gauss_quadrature(ERROR_QUAD_POINTS)
    mesh = v.mesh
    hw = 0.5 * mesh.widths[:, None] * quad.weights[None, :]
    diff = element_values(exact, mesh, quad) - v.values_at(quad)
    return float(np.sqrt((hw * diff**2).sum()))


def linf_error_fine(exact, v: PiecewisePoly,
                    quad: Quadrature | None = None) -> float:
    """Max-norm misfit over the fine region, sampled at quadrature nodes
    plus element endpoints."""
    if quad is None:
        quad = gauss_quadrature(ERROR_QUAD_POINTS)
    mesh = v.mesh
    fine = slice(mesh.n_coarse, mesh.n_elements)
    diff = element_values(exact, mesh, quad) - v.values_at(quad)
    return max(float(np.abs(diff[fine]).max()),
               _linf_trace_misfit(exact, v, fine))


def energy_quadrature_drift(exact_triple, w: LdgSolution,
                            problem: Problem) -> float:
    """Relative change of the energy error when doubling 20 -> 40 points."""
    e20 = error_energy_norm(exact_triple, w, problem, gauss_quadrature(20))
    e40 = error_energy_norm(exact_triple, w, problem, gauss_quadrature(40))
    return abs(e20 - e40) / max(e40, 1e-300)


# ---------------------------------------------------------------------------
# Convergence rates
# ---------------------------------------------------------------------------

def rate_r2(e_n: float, e_2n: float) -> float:
    """log2 error-ratio rate between N and 2N elements."""
    if e_n <= 0.0 or e_2n <= 0.0:
        raise ValueError("errors must be positive")
    return math.log(e_n / e_2n) / math.log(2.0)


def rate_rs(e_n: float, e_2n: float, n: int) -> float:
    """Rate with respect to the logarithmic factor: the N -> 2N error ratio
    measured against log(2 ln N / ln 2N)."""
    if e_n <= 0.0 or e_2n <= 0.0:
        raise ValueError("errors must be positive")
    if n < 4:
        raise ValueError(f"N must be >= 4, got {n}")
    return math.log(e_n / e_2n) / math.log(2.0 * math.log(n) / math.log(2 * n))


def fit_rate(xs, errs) -> float:
    """Least-squares slope of log(err) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if xs.size != errs.size or xs.size < 2:
        raise ValueError("need at least two matching samples")
    return float(np.polyfit(np.log(xs), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------
# Gauss-Radau approximation-error suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionErrors:
    """The seven approximation-error measures of the projection triple."""

    l2_u: float          # ||u - proj_minus u||
    l2_p: float          # ||p - proj_plus p||
    l2_q: float          # ||q - proj_plus q||
    linf_p_fine: float
    linf_q_fine: float
    jump_u: float        # sqrt(sum_j [u - proj_minus u]_j^2)
    jump_p: float        # sqrt(sum_j [p - proj_plus p]_j^2)


def projection_error_suite(mesh: Mesh, k: int, eps: float,
                           quad: Quadrature | None = None,
                           case: TestCase | None = None) -> ProjectionErrors:
    """Approximation errors of the Gauss-Radau projections for the benchmark
    layer case (or an explicit case) on the given mesh."""
    if quad is None:
        quad = gauss_quadrature(ERROR_QUAD_POINTS)
    if case is None:
        case = boundary_layer_case(eps)
    proj_u = project_gauss_radau(ProjectionSign.MINUS, case.exact_u, mesh, k, quad)
    proj_p = project_gauss_radau(ProjectionSign.PLUS, case.exact_p, mesh, k, quad)
    proj_q = project_gauss_radau(ProjectionSign.PLUS, case.exact_q, mesh, k, quad)
    return ProjectionErrors(
        l2_u=l2_error(case.exact_u, proj_u, quad),
        l2_p=l2_error(case.exact_p, proj_p, quad),
        l2_q=l2_error(case.exact_q, proj_q, quad),
        linf_p_fine=linf_error_fine(case.exact_p, proj_p, quad),
        linf_q_fine=linf_error_fine(case.exact_q, proj_q, quad),
        jump_u=float(np.sqrt((_error_jumps(case.exact_u, proj_u) ** 2).sum())),
        jump_p=float(np.sqrt((_error_jumps(case.exact_p, proj_p) ** 2).sum())),
    )


# ---------------------------------------------------------------------------
# Local identity for the auxiliary variable
# ---------------------------------------------------------------------------

def _hybrid_inner(f, v: PiecewisePoly, quad: Quadrature) -> np.ndarray:
    """Per-element <f, v> with the layer part integrated exactly."""
    mesh = v.mesh
    hw = 0.5 * mesh.widths[:, None] * quad.weights[None, :]
    if isinstance(f, LayerFn):
        x, _ = quad_points(mesh, quad)
        smooth_part = (hw * np.asarray(f.smooth(x), dtype=float)
                       * v.values_at(quad)).sum(axis=1)
        lm = layer_moments(mesh, f.eps, v.k)
        return smooth_part + f.coeff * (lm * v.coeffs).sum(axis=1)
    vals = element_values(f, mesh, quad)
    return (hw * vals * v.values_at(quad)).sum(axis=1)


def auxiliary_identity_residuals(case: TestCase, mesh: Mesh, k: int,
                                 solution: LdgSolution | None = None,
                                 quad: Quadrature | None = None) -> np.ndarray:
    """Element-wise check of the local relation satisfied by X = P - proj(p),
    Y = Q - proj(q):

        ||Y||_j^2 = eps * (<X', Y>_j + Y_j^- [X]_j) + <q - proj(q), Y>_j,

    with [X]_N = -X_N^- on the last element.  The relation follows from the
    scheme's second equation combined with the moment and collocation
    properties of the plus-side Gauss-Radau projection.

    Evaluation notes keeping this closed at roundoff level: the volume and
    jump pair is evaluated in the integration-by-parts-equivalent grouping

        -eps <X, Y'>_j + eps (Xhat_j Y_j^- - Xhat_{j-1} Y_{j-1}^+),

    where Xhat are the plus-side traces with the projection's endpoint
    collocation applied exactly (Xhat_j = P_j^+ - p(x_j), Xhat_N = 0);
    summing rounded projection coefficients instead would reintroduce the
    eps_machine * |p| collocation defect, amplified by eps/h.  The
    projections share one integration rule with the <q - proj(q), Y> term.

    Returns |lhs - rhs| / (|lhs| + sum |rhs terms|) per element, the
    denominator floored at machine epsilon times its global maximum so that
    elements whose terms consist purely of solver roundoff dust are measured
    against the relation's actual scale.
    """
    if quad is None:
        quad = gauss_quadrature(ERROR_QUAD_POINTS)
    if solution is None:
        solution = solve_ldg(case.problem, mesh, k)
    eps = case.eps

    proj_p = project_gauss_radau(ProjectionSign.PLUS, case.exact_p, mesh, k, quad)
    proj_q = project_gauss_radau(ProjectionSign.PLUS, case.exact_q, mesh, k, quad)
    xi_p = solution.P - proj_p
    xi_q = solution.Q - proj_q

    lhs = (xi_q.coeffs**2).sum(axis=1)

    dxq = xi_q.derivative()
    t_vol = -eps * (xi_p.coeffs * dxq.coeffs).sum(axis=1)

    nodes_plus = mesh.nodes[:-1]
    p_exact_plus = np.broadcast_to(np.asarray(
        eval_fn(case.exact_p, nodes_plus, mesh.offsets[:-1]), dtype=float),
        nodes_plus.shape)
    xhat = solution.P.trace_plus_all() - p_exact_plus   # nodes 0..N-1; Xhat_N = 0
    y_minus = xi_q.trace_minus_all()
    y_plus = xi_q.trace_plus_all()
    xhat_right = np.append(xhat[1:], 0.0)
    t_flux = eps * (xhat_right * y_minus - xhat * y_plus)

    t_eta = (_hybrid_inner(case.exact_q, xi_q, quad)
             - (proj_q.coeffs * xi_q.coeffs).sum(axis=1))

    denom = np.abs(lhs) + np.abs(t_vol) + np.abs(t_flux) + np.abs(t_eta)
    denom = denom + np.finfo(float).eps * denom.max() + 1e-300
    return np.abs(lhs - t_vol - t_flux - t_eta) / denom
