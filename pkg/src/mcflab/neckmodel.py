"""Axisymmetric surface geometry in two representations.

A CrossSectionFamily stores a surface as a height-indexed family of
convex cross-section curves (the representation used by the neck
comparison integrals); a GeneratingCurve stores an axisymmetric surface
by its profile curve in the (axis, radius) half-plane (the
representation evolved by the flow).  Both expose mean curvature, the
vertical-gradient factor, area elements, and JSON/CSV serialization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import InitVar, dataclass
from functools import cached_property

import numpy as np

from mcflab import curve2d
from mcflab.curve2d import ClosedCurve2D

S_SPACING_RATIO_MAX = 10.0
POLE_TRANSVERSALITY_MIN = 0.05


def _nonuniform_d1_d2(x: np.ndarray, f: np.ndarray):
    """First and second derivatives of f (leading axis) on the non-uniform
    grid x; three-point interior stencils, one-sided at the ends."""
    m = x.shape[0]
    if m < 3:
        raise ValueError("need at least 3 grid points for derivatives")
    shape = (m,) + (1,) * (f.ndim - 1)
    h = np.diff(x)
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)

    hm = h[:-1].reshape((m - 2,) + shape[1:])
    hp = h[1:].reshape((m - 2,) + shape[1:])
    fm, f0, fp = f[:-2], f[1:-1], f[2:]
    d1[1:-1] = (-hp / (hm * (hm + hp))) * fm + ((hp - hm) / (hm * hp)) * f0 + (
        hm / (hp * (hm + hp))
    ) * fp
    d2[1:-1] = 2.0 * (fm / (hm * (hm + hp)) - f0 / (hm * hp) + fp / (hp * (hm + hp)))

    h0, h1 = h[0], h[1]
    d1[0] = (
        -(2 * h0 + h1) / (h0 * (h0 + h1)) * f[0]
        + (h0 + h1) / (h0 * h1) * f[1]
        - h0 / (h1 * (h0 + h1)) * f[2]
    )
    d2[0] = 2.0 * (f[0] / (h0 * (h0 + h1)) - f[1] / (h0 * h1) + f[2] / (h1 * (h0 + h1)))
    ha, hb = h[-1], h[-2]
    d1[-1] = (
        (2 * ha + hb) / (ha * (ha + hb)) * f[-1]
        - (ha + hb) / (ha * hb) * f[-2]
        + ha / (hb * (ha + hb)) * f[-3]
    )
    d2[-1] = 2.0 * (
        f[-1] / (ha * (ha + hb)) - f[-2] / (ha * hb) + f[-3] / (hb * (ha + hb))
    )
    return d1, d2


@dataclass(frozen=True, eq=False)
class CrossSectionFamily:
    """A surface given by one convex cross-section curve per height.

    Vertices of all cross sections share the cyclic parameter index, so
    finite differences across heights are well defined.  Geometry is
    stored in normalized units and scaled by `size` (the neck scale) in
    every physical quantity.
    """

    s_grid: np.ndarray
    curves: tuple
    size: float = 1.0
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool) -> None:
        s = np.asarray(self.s_grid, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "curves", tuple(self.curves))
        if validate:
            self._check_invariants()

    def _check_invariants(self) -> None:
        s = self.s_grid
        if s.ndim != 1 or s.shape[0] != len(self.curves):
            raise ValueError("one cross-section curve required per height")
        if s.shape[0] < 3:
            raise ValueError("need at least 3 heights")
        h = np.diff(s)
        if np.any(h <= 0.0):
            raise ValueError("heights must be strictly increasing")
        ratio = np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])
        if ratio.size and np.max(ratio) > S_SPACING_RATIO_MAX:
            raise ValueError("height spacing not quasi-uniform")
        if self.size <= 0.0:
            raise ValueError("size must be positive")
        n = self.curves[0].n
        for c in self.curves:
            if c.n != n:
                raise ValueError("all cross sections must share the vertex count")
        for c in self.curves:
            if np.min(curve2d.curvature(c)) <= 0.0:
                raise ValueError("cross sections must be convex")

    @cached_property
    def n_heights(self) -> int:
        return self.s_grid.shape[0]

    @cached_property
    def n_vertices(self) -> int:
        return self.curves[0].n

    @cached_property
    def grid_points(self) -> np.ndarray:
        """Physical surface points, shape (n_heights, n_vertices, 3)."""
        m, n = self.n_heights, self.n_vertices
        pts = np.empty((m, n, 3))
        for i, c in enumerate(self.curves):
            pts[i, :, :2] = c.points
            pts[i, :, 2] = self.s_grid[i]
        return pts * self.size

    @cached_property
    def _fields(self):
        """(H, grad_x3, area_element, normal) on the full grid."""
        P = self.grid_points
        m, n = P.shape[0], P.shape[1]
        s_phys = self.s_grid * self.size
        x_t = (np.roll(P, -1, axis=1) - np.roll(P, 1, axis=1)) * (n / 2.0)
        x_tt = (np.roll(P, -1, axis=1) - 2.0 * P + np.roll(P, 1, axis=1)) * (n * n)
        x_s, x_ss = _nonuniform_d1_d2(s_phys, P)
        x_st, _ = _nonuniform_d1_d2(s_phys, x_t)

        E = np.einsum("ijk,ijk->ij", x_s, x_s)
        F = np.einsum("ijk,ijk->ij", x_s, x_t)
        G = np.einsum("ijk,ijk->ij", x_t, x_t)
        cross = np.cross(x_t, x_s)
        cross_norm = np.linalg.norm(cross, axis=2)
        if np.any(cross_norm <= 0.0):
            raise ValueError("degenerate metric on cross-section family")
        nu = -cross / cross_norm[..., None]
        LL = np.einsum("ijk,ijk->ij", x_ss, nu)
        MM = np.einsum("ijk,ijk->ij", x_st, nu)
        NN = np.einsum("ijk,ijk->ij", x_tt, nu)
        det = E * G - F * F
        if np.any(det <= 0.0):
            raise ValueError("degenerate metric on cross-section family")
        H = (E * NN - 2.0 * F * MM + G * LL) / det

        nu3sq = nu[..., 2] ** 2
        if np.any(nu3sq > 1.0 + 1e-10):
            raise ValueError("normal component exceeds 1 beyond tolerance")
        grad = np.sqrt(np.clip(1.0 - nu3sq, 0.0, 1.0))
        return H, grad, cross_norm, nu

    @cached_property
    def mean_curvature_field(self) -> np.ndarray:
        return self._fields[0]

    @cached_property
    def grad_x3_field(self) -> np.ndarray:
        return self._fields[1]


def surface_point(family: CrossSectionFamily, i_s: int, i_t: int) -> np.ndarray:
    """Physical 3-space point of vertex i_t on cross section i_s."""
    m, n = family.n_heights, family.n_vertices
    if not (0 <= i_s < m and 0 <= i_t < n):
        raise IndexError("index out of range")
    xy = family.curves[i_s].points[i_t]
    return family.size * np.array([xy[0], xy[1], family.s_grid[i_s]])


def mean_curvature(family: CrossSectionFamily, i_s: int, i_t: int) -> float:
    """Mean curvature (sum of principal curvatures) at a grid point,
    positive for a cylinder with inward normal (H = 1/radius)."""
    return float(family.mean_curvature_field[i_s, i_t])


def grad_x3_norm(family: CrossSectionFamily, i_s: int, i_t: int) -> float:
    """|grad of the height function| along the surface, in [0, 1]."""
    return float(family.grad_x3_field[i_s, i_t])


def family_area(family: CrossSectionFamily) -> float:
    """Total area from the |X_t x X_s| element, trapezoid in s, exact in t."""
    elem = family._fields[2]
    dt = 1.0 / family.n_vertices
    per_height = elem.sum(axis=1) * dt
    return float(np.trapezoid(per_height, family.s_grid * family.size))


def product_family(
    curve: ClosedCurve2D, s_grid: np.ndarray, size: float = 1.0
) -> CrossSectionFamily:
    """Exact product: the same cross section at every height."""
    s_grid = np.asarray(s_grid, dtype=float)
    return CrossSectionFamily(s_grid, tuple([curve] * s_grid.shape[0]), size)


def cylinder_family(
    radius: float, s_grid: np.ndarray, n: int = 256, size: float = 1.0
) -> CrossSectionFamily:
    return product_family(curve2d.circle_curve(radius, n=n), s_grid, size)


def sphere_family(
    radius: float, n_heights: int = 65, n: int = 128, band: float = 0.95
) -> CrossSectionFamily:
    """Sphere as a family of horizontal circles over |s| <= band * radius
    (the polar caps cannot be represented by nondegenerate sections)."""
    s = np.linspace(-band * radius, band * radius, n_heights)
    curves = tuple(
        curve2d.circle_curve(math.sqrt(radius**2 - si**2), n=n) for si in s
    )
    return CrossSectionFamily(s, curves, 1.0)


# --------------------------------------------------------------------------
# generating curves


@dataclass(frozen=True, eq=False)
class GeneratingCurve:
    """Profile curve (s, u) of an axisymmetric surface, u >= 0.

    u vanishes exactly at flagged pole endpoints, where the surface
    closes on the axis; the discrete tangent there must be transverse to
    the axis.
    """

    nodes: np.ndarray
    closed_left: bool = False
    closed_right: bool = False
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool) -> None:
        nd = np.array(self.nodes, dtype=float, copy=True, order="C")
        nd.setflags(write=False)
        object.__setattr__(self, "nodes", nd)
        if validate:
            self._check_invariants()

    def _check_invariants(self) -> None:
        nd = self.nodes
        if nd.ndim != 2 or nd.shape[1] != 2:
            raise ValueError("nodes must be an (m, 2) array of (s, u)")
        m = nd.shape[0]
        if m < 4:
            raise ValueError("need at least 4 nodes")
        u = nd[:, 1]
        scale = float(np.max(np.abs(nd))) + 1e-30
        tol = 1e-12 * scale
        if np.any(u < -tol):
            raise ValueError("radius must be nonnegative")
        if np.any(u[1:-1] <= tol):
            raise ValueError("interior radius must be positive")
        for idx, flag in ((0, self.closed_left), (-1, self.closed_right)):
            if flag and u[idx] > tol:
                raise ValueError("pole endpoint must lie on the axis")
            if not flag and u[idx] <= tol:
                raise ValueError("axis endpoint must carry a pole flag")
        seg = np.diff(nd, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len <= 1e-14 * scale):
            raise ValueError("degenerate edge")
        if _open_polyline_self_intersects(nd):
            raise ValueError("profile is not simple")
        for idx, flag in ((0, self.closed_left), (-1, self.closed_right)):
            if flag:
                t = seg[0] / seg_len[0] if idx == 0 else seg[-1] / seg_len[-1]
                if abs(t[1]) < POLE_TRANSVERSALITY_MIN:
                    raise ValueError("pole tangent not transverse to the axis")

    @cached_property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def seg_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    @cached_property
    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.seg_lengths)])

    @cached_property
    def tangent_field(self) -> np.ndarray:
        """Unit tangents: central chords inside, one-sided at ends."""
        nd = self.nodes
        d = np.empty_like(nd)
        d[1:-1] = nd[2:] - nd[:-2]
        d[0] = nd[1] - nd[0]
        d[-1] = nd[-1] - nd[-2]
        return d / np.linalg.norm(d, axis=1)[:, None]


def _open_polyline_self_intersects(nd: np.ndarray) -> bool:
    m = nd.shape[0]
    if m < 4:
        return False
    a, b = nd[:-1], nd[1:]
    i_idx, j_idx = np.triu_indices(m - 1, k=2)
    p, q = a[i_idx], b[i_idx]
    r, s = a[j_idx], b[j_idx]

    def orient(o, u, v):
        return (u[:, 0] - o[:, 0]) * (v[:, 1] - o[:, 1]) - (u[:, 1] - o[:, 1]) * (
            v[:, 0] - o[:, 0]
        )

    d1 = orient(p, q, r)
    d2 = orient(p, q, s)
    d3 = orient(r, s, p)
    d4 = orient(r, s, q)
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def profile_signed_curvature(g: GeneratingCurve) -> np.ndarray:
    """Menger curvature of the profile with the inward-normal sign
    convention (positive where the surface bends like a sphere)."""
    nd = g.nodes
    m = nd.shape[0]
    kappa = np.empty(m)
    a, b, c = nd[:-2], nd[1:-1], nd[2:]
    ab = b - a
    ac = c - a
    bc = c - b
    cross = ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0]
    denom = (
        np.linalg.norm(ab, axis=1)
        * np.linalg.norm(bc, axis=1)
        * np.linalg.norm(ac, axis=1)
    )
    kappa[1:-1] = -2.0 * cross / denom
    kappa[0] = _triple_curvature(nd[0], nd[1], nd[2])
    kappa[-1] = _triple_curvature(nd[-3], nd[-2], nd[-1])
    return kappa


def _triple_curvature(a, b, c) -> float:
    ab = b - a
    ac = c - a
    bc = c - b
    cross = ab[0] * ac[1] - ab[1] * ac[0]
    denom = (
        np.linalg.norm(ab) * np.linalg.norm(bc) * np.linalg.norm(ac)
    )
    return float(-2.0 * cross / denom)


def mean_curvature_axi_field(g: GeneratingCurve) -> np.ndarray:
    """Mean curvature at every profile node: meridian curvature plus the
    rotational curvature T_s/u; at poles H = 2 * (meridian curvature)."""
    kappa_m = profile_signed_curvature(g)
    t = g.tangent_field
    u = g.nodes[:, 1]
    H = np.empty(g.n_nodes)
    interior = np.ones(g.n_nodes, dtype=bool)
    if g.closed_left:
        interior[0] = False
        H[0] = 2.0 * kappa_m[0]
    if g.closed_right:
        interior[-1] = False
        H[-1] = 2.0 * kappa_m[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        kp = t[:, 0] / u
    H[interior] = kappa_m[interior] + kp[interior]
    return H


def mean_curvature_axi(g: GeneratingCurve, i: int) -> float:
    if not (0 <= i < g.n_nodes):
        raise IndexError("index out of range")
    u = g.nodes[i, 1]
    is_pole = (i == 0 and g.closed_left) or (i == g.n_nodes - 1 and g.closed_right)
    if u <= 0.0 and not is_pole:
        raise ValueError("zero radius at a non-pole node")
    return float(mean_curvature_axi_field(g)[i])


def profile_area(g: GeneratingCurve) -> float:
    """Area of the surface of revolution, 2*pi * integral of u d(arclength)."""
    u = g.nodes[:, 1]
    mid = 0.5 * (u[:-1] + u[1:])
    return float(2.0 * math.pi * np.sum(mid * g.seg_lengths))


def grad_x3_axi_field(g: GeneratingCurve) -> np.ndarray:
    """|grad x3| along the profile: |du/dl| (s is the x3 axis)."""
    return np.abs(g.tangent_field[:, 1])


# --------------------------------------------------------------------------
# neck certification and detection


@dataclass(frozen=True)
class NeckCertificate:
    """Result of measuring how close a family is to a product neck."""

    alpha_hat: float
    delta_hat: float
    eps: float
    L: float
    measured_eps: float
    passed: bool


def certify_neck(
    family: CrossSectionFamily,
    *,
    alpha_hat: float,
    delta_hat: float,
    eps: float,
    L: float,
) -> NeckCertificate:
    """Measure the discrete C2 distance to the best-fit product family and
    check every cross section for 1/(1+delta_hat)-noncollapsedness.

    The reference curve of the product is the vertexwise mean of all
    cross sections; the measured distance sums the sup norms of the
    deviation field and of its first and second differences in (s, t).
    """
    stack = np.stack([c.points for c in family.curves])  # (m, n, 2)
    # subtract a reference section first so an exact product yields exact zeros
    rel = stack - stack[0][None, :, :]
    dev = rel - rel.mean(axis=0)[None, :, :]
    n = family.n_vertices
    s = np.asarray(family.s_grid)

    def supnorm(f):
        return float(np.max(np.linalg.norm(f, axis=-1)))

    d_t = (np.roll(dev, -1, axis=1) - np.roll(dev, 1, axis=1)) * (n / 2.0)
    d_tt = (np.roll(dev, -1, axis=1) - 2 * dev + np.roll(dev, 1, axis=1)) * (n * n)
    d_s, d_ss = _nonuniform_d1_d2(s, dev)
    d_st, _ = _nonuniform_d1_d2(s, d_t)
    measured = (
        supnorm(dev)
        + supnorm(d_s)
        + supnorm(d_t)
        + supnorm(d_ss)
        + supnorm(d_st)
        + supnorm(d_tt)
    )
    floor = 1.0 / (1.0 + delta_hat)
    noncollapsed = all(
        curve2d.noncollapsedness_ratio(c) >= floor - 1e-9 for c in family.curves
    )
    passed = bool(measured <= eps and noncollapsed)
    return NeckCertificate(alpha_hat, delta_hat, eps, L, measured, passed)


@dataclass(frozen=True)
class NeckLocation:
    s_center: float
    r: float
    s_lo: float
    s_hi: float


def detect_neck(g: GeneratingCurve, h1: float, eps: float, L: float):
    """Find a surgery-scale neck on the profile: an interior radius
    minimum with radius in [1/(2*h1), 1/h1] whose relative radius
    variation stays below eps over an axial interval of length at least
    2*L*r.  Returns a NeckLocation or None.

    Candidates are interior local minima of the radius (the global
    minimum of u on a closed profile always sits at the poles); on
    min-radius plateaus the plateau center is used.
    """
    s = g.nodes[:, 0]
    u = g.nodes[:, 1]
    m = g.n_nodes
    lo, hi = 1.0 / (2.0 * h1), 1.0 / h1

    cands = []
    for i in range(1, m - 1):
        if u[i] <= u[i - 1] and u[i] <= u[i + 1] and (u[i] < u[i - 1] or u[i] < u[i + 1]):
            cands.append(i)
    if not cands:
        interior = u[1:-1]
        if interior.size:
            umin = interior.min()
            flat = np.flatnonzero(np.abs(u - umin) <= 1e-12 * (umin + 1.0))
            flat = flat[(flat > 0) & (flat < m - 1)]
            if flat.size:
                cands = [int(flat[flat.size // 2])]
    cands.sort(key=lambda i: u[i])

    for i in cands:
        r = float(u[i])
        if not (lo - 1e-12 <= r <= hi + 1e-12):
            continue
        cap = r * (1.0 + eps)
        a = i
        while a > 0 and u[a - 1] <= cap:
            a -= 1
        b = i
        while b < m - 1 and u[b + 1] <= cap:
            b += 1
        if s[b] - s[a] >= 2.0 * L * r:
            return NeckLocation(float(s[i]), r, float(s[a]), float(s[b]))
    return None


# --------------------------------------------------------------------------
# serialization


def family_to_json(family: CrossSectionFamily) -> dict:
    return {
        "heights": family.s_grid.tolist(),
        "curves": [c.points.tolist() for c in family.curves],
        "size": family.size,
    }


def family_from_json(data: dict) -> CrossSectionFamily:
    curves = tuple(ClosedCurve2D(np.asarray(c, dtype=float)) for c in data["curves"])
    return CrossSectionFamily(
        np.asarray(data["heights"], dtype=float), curves, float(data.get("size", 1.0))
    )


def generating_curve_to_json(g: GeneratingCurve) -> dict:
    return {
        "nodes": g.nodes.tolist(),
        "closed_left": g.closed_left,
        "closed_right": g.closed_right,
    }


def generating_curve_from_json(data: dict) -> GeneratingCurve:
    return GeneratingCurve(
        np.asarray(data["nodes"], dtype=float),
        bool(data["closed_left"]),
        bool(data["closed_right"]),
    )


def family_diagnostics_rows(family: CrossSectionFamily) -> list:
    """Per-height diagnostic rows: s, mean radius, H range, |grad x3| range."""
    H = family.mean_curvature_field
    G = family.grad_x3_field
    rows = []
    for i in range(family.n_heights):
        radii = np.linalg.norm(family.curves[i].points, axis=1) * family.size
        rows.append(
            {
                "s": family.s_grid[i] * family.size,
                "mean_radius": float(np.mean(radii)),
                "H_min": float(np.min(H[i])),
                "H_max": float(np.max(H[i])),
                "grad_x3_min": float(np.min(G[i])),
                "grad_x3_max": float(np.max(G[i])),
            }
        )
    return rows


def write_diagnostics_csv(family: CrossSectionFamily, path) -> None:
    rows = family_diagnostics_rows(family)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
