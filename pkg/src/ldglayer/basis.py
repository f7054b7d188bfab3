"""Reference-element polynomials, quadrature, and piecewise representation.

Every element carries the L2-orthonormal shifted-Legendre basis

    phi_l(x) = sqrt((2l+1)/h_j) * P_l(2(x - x_{j-1})/h_j - 1),

so the element L2 norm of a piecewise polynomial equals the Euclidean norm of
its coefficient vector and mass matrices are identities regardless of h_j.

Functions with a boundary-layer factor exp(-(1-x)/eps) are represented by
``LayerFn`` (smooth part + layer coefficient).  Their moments against the
basis are integrated exactly through scaled modified spherical Bessel
functions, which stays accurate for element-width-to-eps ratios from ~0 to
1e12; plain callables fall back to Gauss quadrature evaluated at the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import ive

from .meshes import Mesh

_MAX_QUAD_POINTS = 64


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on [-1, 1]: exact for degree <= 2n - 1."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=None)
def _leggauss_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def gauss_quadrature(n: int) -> Quadrature:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if not 1 <= n <= _MAX_QUAD_POINTS:
        raise ValueError(f"supported point counts are 1..{_MAX_QUAD_POINTS}, got {n}")
    nodes, weights = _leggauss_cached(n)
    return Quadrature(nodes=nodes.copy(), weights=weights.copy())


def legendre_table(k: int, t: np.ndarray) -> np.ndarray:
    """P_0..P_k evaluated at points t, shape (k+1, len(t))."""
    t = np.asarray(t, dtype=float)
    table = np.empty((k + 1, t.size))
    table[0] = 1.0
    if k >= 1:
        table[1] = t
    for l in range(2, k + 1):
        table[l] = ((2 * l - 1) * t * table[l - 1] - (l - 1) * table[l - 2]) / l
    return table


def legendre_deriv_table(k: int, t: np.ndarray) -> np.ndarray:
    """P_0'..P_k' at points t via P_l' = P_{l-2}' + (2l-1) P_{l-1}."""
    t = np.asarray(t, dtype=float)
    p = legendre_table(k, t)
    table = np.zeros((k + 1, t.size))
    if k >= 1:
        table[1] = 1.0
    for l in range(2, k + 1):
        table[l] = table[l - 2] + (2 * l - 1) * p[l - 1]
    return table


class LayerFn:
    """A function smooth(x) + coeff * exp(-(1 - x)/eps).

    The layer factor is evaluated from 1 - x directly when the caller can
    supply it (mesh offsets), which preserves full relative accuracy inside
    the layer where float64 x has absorbed into 1.0.
    """

    __slots__ = ("smooth", "coeff", "eps")

    def __init__(self, smooth: Callable, coeff: float, eps: float):
        self.smooth = smooth
        self.coeff = float(coeff)
        self.eps = float(eps)

    def __call__(self, x, one_minus_x=None):
        x = np.asarray(x, dtype=float)
        omx = 1.0 - x if one_minus_x is None else np.asarray(one_minus_x, dtype=float)
        return self.smooth(x) + self.coeff * np.exp(-omx / self.eps)


def eval_fn(f, x, one_minus_x=None):
    """Evaluate f at x; LayerFn instances receive 1 - x when available."""
    if isinstance(f, LayerFn):
        return f(x, one_minus_x)
    return f(np.asarray(x, dtype=float))


def quad_points(mesh: Mesh, quad: Quadrature) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points x and offsets 1 - x, each (N, nq)."""
    theta = 0.5 * (quad.nodes + 1.0)
    x = mesh.nodes[:-1, None] + theta[None, :] * mesh.widths[:, None]
    elem = np.arange(mesh.n_elements)[:, None]
    omx = mesh.one_minus_x(np.broadcast_to(elem, x.shape),
                           np.broadcast_to(theta[None, :], x.shape))
    return x, omx


def _scaled_sph_bessel(k: int, beta: np.ndarray) -> np.ndarray:
    """exp(-beta) * i_l(beta) for l = 0..k, shape (len(beta), k+1).

    i_l is the modified spherical Bessel function of the first kind.  Three
    regimes: a power series below beta = 1e-6, the scaled Bessel ive in the
    middle, and the exact finite closed form

        (1/2b) [sum_m (-1)^m c_m b^-m  -  (-1)^l e^{-2b} sum_m c_m b^-m],
        c_m = (l+m)! / (m! (l-m)! 2^m),

    for large beta, where ive becomes unreliable (NaN near 1e9) but the
    alternating sum has decaying terms and no cancellation.
    """
    beta = np.asarray(beta, dtype=float)
    out = np.empty((beta.size, k + 1))
    small = beta < 1e-6
    large = beta > max(30.0, 2.0 * k * (k + 1))
    mid = ~(small | large)
    safe = np.where(mid, beta, 1.0)
    for l in range(k + 1):
        out[:, l] = np.sqrt(np.pi / (2.0 * safe)) * ive(l + 0.5, safe)
    if np.any(small):
        # i_l(b) ~ b^l / (2l+1)!! * (1 + O(b^2)); include the e^{-b} factor.
        bs = beta[small]
        dfact = 1.0
        for l in range(k + 1):
            if l > 0:
                dfact *= 2 * l + 1
            out[small, l] = bs**l / dfact * np.exp(-bs)
    if np.any(large):
        bl = beta[large]
        decay = np.exp(-2.0 * bl)
        for l in range(k + 1):
            alt = np.zeros_like(bl)
            plain = np.zeros_like(bl)
            c = 1.0
            for m in range(l + 1):
                if m > 0:
                    c *= (l + m) * (l - m + 1) / (2.0 * m)
                term = c * bl ** (-m)
                alt += (-1.0) ** m * term
                plain += term
            out[large, l] = (alt - (-1.0) ** l * decay * plain) / (2.0 * bl)
    return out


def layer_moments(mesh: Mesh, eps: float, k: int) -> np.ndarray:
    """Exact moments of exp(-(1-x)/eps) against the orthonormal basis.

    Returns (N, k+1) with entry (e, l) = integral over element e of
    exp(-(1-x)/eps) * phi_l(x) dx, computed as

        sqrt((2l+1) h) * exp(-d_right/eps) * [exp(-beta) i_l(beta)],

    beta = h/(2 eps), d_right the offset of the element's right node.
    """
    h = mesh.widths
    d_right = mesh.offsets[1:]
    beta = h / (2.0 * eps)
    bess = _scaled_sph_bessel(k, beta)
    scale = np.sqrt((2.0 * np.arange(k + 1)[None, :] + 1.0) * h[:, None])
    return scale * np.exp(-d_right / eps)[:, None] * bess


def element_moments(f, mesh: Mesh, k: int, quad: Quadrature) -> np.ndarray:
    """Per-element moments <f, phi_l>, shape (N, k+1).

    The smooth part goes through Gauss quadrature; a LayerFn's layer part is
    integrated exactly via ``layer_moments``.
    """
    x, _omx = quad_points(mesh, quad)
    p_table = legendre_table(k, quad.nodes)
    if isinstance(f, LayerFn):
        vals = np.asarray(f.smooth(x), dtype=float)
    else:
        vals = np.asarray(f(x), dtype=float)
    vals = np.broadcast_to(vals, x.shape)
    h = mesh.widths
    scale = np.sqrt((2.0 * np.arange(k + 1)[None, :] + 1.0) / h[:, None])
    core = np.einsum("q,eq,lq->el", quad.weights, vals, p_table)
    moments = scale * (0.5 * h[:, None]) * core
    if isinstance(f, LayerFn):
        moments = moments + f.coeff * layer_moments(mesh, f.eps, k)
    return moments


def element_values(f, mesh: Mesh, quad: Quadrature) -> np.ndarray:
    """f at the quadrature points of every element, offset-aware, (N, nq)."""
    x, omx = quad_points(mesh, quad)
    vals = np.asarray(eval_fn(f, x, omx), dtype=float)
    return np.broadcast_to(vals, x.shape)


@dataclass
class PiecewisePoly:
    """Element-wise polynomial of degree <= k in the orthonormal basis.

    coeffs has shape (N, k+1); row j-1 holds the coefficients on element j.
    """

    mesh: Mesh
    k: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.mesh.n_elements, self.k + 1)
        if self.coeffs.shape != expected:
            raise ValueError(f"coeffs shape {self.coeffs.shape} != {expected}")

    @property
    def scale(self) -> np.ndarray:
        """sqrt((2l+1)/h_j) basis scale factors, (N, k+1)."""
        l = np.arange(self.k + 1)
        return np.sqrt((2.0 * l[None, :] + 1.0) / self.mesh.widths[:, None])

    # -- evaluation ---------------------------------------------------------

    def values_at(self, quad: Quadrature) -> np.ndarray:
        """Values at the quadrature points of every element, (N, nq)."""
        p_table = legendre_table(self.k, quad.nodes)
        return np.einsum("em,mq->eq", self.coeffs * self.scale, p_table)

    def deriv_values_at(self, quad: Quadrature) -> np.ndarray:
        """Derivative values at the quadrature points, (N, nq)."""
        dp_table = legendre_deriv_table(self.k, quad.nodes)
        scaled = self.coeffs * self.scale * (2.0 / self.mesh.widths[:, None])
        return np.einsum("em,mq->eq", scaled, dp_table)

    def __call__(self, x) -> np.ndarray:
        """Global evaluation (points at interior nodes use the left element)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        elem = np.clip(np.searchsorted(self.mesh.nodes, x, side="left") - 1,
                       0, self.mesh.n_elements - 1)
        t = 2.0 * (x - self.mesh.nodes[elem]) / self.mesh.widths[elem] - 1.0
        l = np.arange(self.k + 1)
        p = legendre_table(self.k, t)  # (k+1, npts)
        s = np.sqrt((2.0 * l[:, None] + 1.0) / self.mesh.widths[elem][None, :])
        return np.einsum("ml,ml->l", self.coeffs[elem].T * s, p)

    # -- traces and jumps ---------------------------------------------------

    def trace_minus_all(self) -> np.ndarray:
        """Left-limit values v_j^- at nodes j = 1..N, shape (N,)."""
        return (self.coeffs * self.scale).sum(axis=1)

    def trace_plus_all(self) -> np.ndarray:
        """Right-limit values v_j^+ at nodes j = 0..N-1, shape (N,)."""
        signs = (-1.0) ** np.arange(self.k + 1)
        return (self.coeffs * self.scale * signs[None, :]).sum(axis=1)

    def jumps(self) -> np.ndarray:
        """[v]_j for j = 0..N: v^+ - v^- inside, v_0^+ at 0, -v_N^- at N."""
        minus = self.trace_minus_all()
        plus = self.trace_plus_all()
        out = np.empty(self.mesh.n_elements + 1)
        out[0] = plus[0]
        out[1:-1] = plus[1:] - minus[:-1]
        out[-1] = -minus[-1]
        return out

    # -- algebra ------------------------------------------------------------

    def derivative(self) -> "PiecewisePoly":
        """Element-wise derivative, expanded in the same basis (degree k)."""
        m = self.k + 1
        l = np.arange(m)
        pair = np.zeros((m, m))
        for a in range(m):
            for b in range(m):
                if b > a and (b - a) % 2 == 1:
                    pair[a, b] = 2.0 * math.sqrt((2 * a + 1) * (2 * b + 1))
        dcoeffs = np.einsum("ab,eb->ea", pair, self.coeffs) / self.mesh.widths[:, None]
        return PiecewisePoly(self.mesh, self.k, dcoeffs)

    def l2(self) -> float:
        """Global L2 norm (orthonormal basis: Euclidean coefficient norm)."""
        return float(np.sqrt((self.coeffs**2).sum()))

    def element_l2(self) -> np.ndarray:
        return np.sqrt((self.coeffs**2).sum(axis=1))

    def _check_same(self, other: "PiecewisePoly") -> None:
        if self.mesh is not other.mesh or self.k != other.k:
            raise ValueError("operands must share mesh and degree")

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        self._check_same(other)
        return PiecewisePoly(self.mesh, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        self._check_same(other)
        return PiecewisePoly(self.mesh, self.k, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "PiecewisePoly":
        return PiecewisePoly(self.mesh, self.k, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "PiecewisePoly":
        return PiecewisePoly(self.mesh, self.k, -self.coeffs)


def zero_poly(mesh: Mesh, k: int) -> PiecewisePoly:
    return PiecewisePoly(mesh, k, np.zeros((mesh.n_elements, k + 1)))


def eval_trace(v: PiecewisePoly, j: int, side: str) -> float:
    """One-sided limit of v at node j: 'minus' from element j, 'plus' from j+1."""
    n = v.mesh.n_elements
    if side == "minus":
        if not 1 <= j <= n:
            raise ValueError(f"minus trace needs 1 <= j <= {n}, got {j}")
        return float(v.trace_minus_all()[j - 1])
    if side == "plus":
        if not 0 <= j <= n - 1:
            raise ValueError(f"plus trace needs 0 <= j <= {n - 1}, got {j}")
        return float(v.trace_plus_all()[j])
    raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")


class ProjectionSign(Enum):
    """Endpoint collocated by the Gauss-Radau projection."""

    MINUS = "minus"  # collocates the right endpoint of each element
    PLUS = "plus"    # collocates the left endpoint of each element


def project_gauss_radau(sign: ProjectionSign, f, mesh: Mesh, k: int,
                        quad: Quadrature | None = None) -> PiecewisePoly:
    """Local Gauss-Radau projection of f onto degree-k piecewise polynomials.

    On each element the result matches the first k moments of f and
    collocates f exactly at one endpoint: the right one for MINUS, the left
    one for PLUS.  For k = 0 there are no moment conditions and the
    projection is endpoint interpolation.

    Each element solves a (k+1)x(k+1) system (k identity moment rows plus
    one collocation row); a singular system is impossible for positive
    widths but numpy's solve still guards the pivots.
    """
    if quad is None:
        quad = gauss_quadrature(k + 3)
    n = mesh.n_elements
    m = k + 1
    moments = element_moments(f, mesh, k, quad)

    if sign is ProjectionSign.MINUS:
        colloc_x = mesh.nodes[1:]
        colloc_omx = mesh.offsets[1:]
        trace_row = np.sqrt((2.0 * np.arange(m)[None, :] + 1.0) / mesh.widths[:, None])
    elif sign is ProjectionSign.PLUS:
        colloc_x = mesh.nodes[:-1]
        colloc_omx = mesh.offsets[:-1]
        signs = (-1.0) ** np.arange(m)
        trace_row = (np.sqrt((2.0 * np.arange(m)[None, :] + 1.0)
                             / mesh.widths[:, None]) * signs[None, :])
    else:
        raise ValueError(f"unknown projection sign {sign!r}")

    fvals = np.asarray(eval_fn(f, colloc_x, colloc_omx), dtype=float)
    fvals = np.broadcast_to(fvals, (n,))

    system = np.zeros((n, m, m))
    rhs = np.empty((n, m))
    for l in range(k):
        system[:, l, l] = 1.0
        rhs[:, l] = moments[:, l]
    system[:, k, :] = trace_row
    rhs[:, k] = fvals
    coeffs = np.linalg.solve(system, rhs[:, :, None])[:, :, 0]
    return PiecewisePoly(mesh, k, coeffs)
