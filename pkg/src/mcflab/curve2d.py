"""Discrete geometry of simple closed planar curves.

Curves are uniform-parameter polylines: vertex j sits at parameter
t = j/n, indices are cyclic.  The module provides signed curvature,
arclength barycenter, inscribed-ball noncollapsedness, C1 distance to
the unit circle, an explicit curve shortening flow step, and the
rounding homotopy that deforms a convex near-circle into the exactly
sampled unit circle.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

MIN_VERTICES = 32
EDGE_RATIO_MAX = 4.0
TURNING_TOL = 1e-6
# CFL safety factor for the explicit curve shortening step.
CSF_CFL = 0.25


def smooth_step(x):
    """C-infinity ramp: 0 for x <= 0, 1 for x >= 1, strictly monotone between.

    Built from exp(-1/x); both endpoint plateaus are flat to all orders,
    which is what makes the homotopy slices glue smoothly.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(arr)
    out[arr >= 1.0] = 1.0
    mid = (arr > 0.0) & (arr < 1.0)
    if np.any(mid):
        xm = arr[mid]
        a = np.exp(-1.0 / xm)
        b = np.exp(-1.0 / (1.0 - xm))
        out[mid] = a / (a + b)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out[0])
    return out


@dataclass(frozen=True, eq=False)
class ClosedCurve2D:
    """Simple closed polyline in R^2, positively oriented, cyclic indexing.

    Invariants enforced at construction: at least MIN_VERTICES vertices,
    no degenerate edges, consecutive-edge-length ratio at most 4, total
    turning of the discrete tangent equal to 2*pi, and no
    self-intersections.
    """

    points: np.ndarray
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool) -> None:
        pts = np.array(self.points, dtype=float, copy=True, order="C")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if validate:
            self._check_invariants()

    @cached_property
    def n(self) -> int:
        return self.points.shape[0]

    @cached_property
    def edges(self) -> np.ndarray:
        return np.roll(self.points, -1, axis=0) - self.points

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edges, axis=1)

    @cached_property
    def total_length(self) -> float:
        return float(self.edge_lengths.sum())

    @cached_property
    def vertex_weights(self) -> np.ndarray:
        """Dual arclength weight per vertex, (|e_{i-1}| + |e_i|) / 2."""
        ell = self.edge_lengths
        return 0.5 * (np.roll(ell, 1) + ell)

    @cached_property
    def vertex_arclength(self) -> np.ndarray:
        """Cumulative arclength at each vertex, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(self.edge_lengths)])[:-1]

    def _check_invariants(self) -> None:
        pts = self.points
        n = pts.shape[0]
        if n < MIN_VERTICES:
            raise ValueError(f"need at least {MIN_VERTICES} vertices, got {n}")
        ell = self.edge_lengths
        scale = float(np.max(np.abs(pts))) + 1.0
        if np.any(ell <= 1e-14 * scale):
            raise ValueError("degenerate edge")
        ratio = np.maximum(ell / np.roll(ell, 1), np.roll(ell, 1) / ell)
        if np.max(ratio) > EDGE_RATIO_MAX * (1.0 + 1e-9):
            raise ValueError("edge length ratio exceeds 4, sampling not quasi-uniform")
        e_prev = np.roll(self.edges, 1, axis=0)
        turn = np.arctan2(
            e_prev[:, 0] * self.edges[:, 1] - e_prev[:, 1] * self.edges[:, 0],
            np.einsum("ij,ij->i", e_prev, self.edges),
        )
        total_turn = float(turn.sum())
        if abs(total_turn - 2.0 * math.pi) > TURNING_TOL:
            raise ValueError(
                "total turning is not 2*pi, curve not embedded and positively oriented"
                f" (got {total_turn:.6f})"
            )
        if _polyline_self_intersects(pts):
            raise ValueError("curve is not simple (self-intersection)")


def _polyline_self_intersects(pts: np.ndarray) -> bool:
    """Exact-ish segment pair test over all non-adjacent closed-polyline edges."""
    n = pts.shape[0]
    a = pts
    b = np.roll(pts, -1, axis=0)
    i_idx, j_idx = np.triu_indices(n, k=2)
    # edge (n-1, 0) is adjacent to edge 0; drop that wrapped pair
    keep = ~((i_idx == 0) & (j_idx == n - 1))
    i_idx, j_idx = i_idx[keep], j_idx[keep]
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
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    return bool(np.any(crossing))


def unit_circle(n: int = 256) -> ClosedCurve2D:
    """The unit circle sampled at vertices (cos 2*pi*j/n, sin 2*pi*j/n)."""
    t = np.arange(n) / n
    ang = 2.0 * np.pi * t
    return ClosedCurve2D(np.column_stack([np.cos(ang), np.sin(ang)]))


def circle_curve(radius: float, center=(0.0, 0.0), n: int = 256) -> ClosedCurve2D:
    t = np.arange(n) / n
    ang = 2.0 * np.pi * t
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * radius + np.asarray(center)
    return ClosedCurve2D(pts)


def ellipse_curve(a: float, b: float, center=(0.0, 0.0), n: int = 256) -> ClosedCurve2D:
    t = np.arange(n) / n
    ang = 2.0 * np.pi * t
    pts = np.column_stack([a * np.cos(ang), b * np.sin(ang)]) + np.asarray(center)
    return ClosedCurve2D(pts)


def translate(curve: ClosedCurve2D, vec) -> ClosedCurve2D:
    return ClosedCurve2D(curve.points + np.asarray(vec, dtype=float))


def rotate(curve: ClosedCurve2D, angle: float, center=(0.0, 0.0)) -> ClosedCurve2D:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    ctr = np.asarray(center, dtype=float)
    return ClosedCurve2D((curve.points - ctr) @ rot.T + ctr)


def scale(curve: ClosedCurve2D, factor: float, center=(0.0, 0.0)) -> ClosedCurve2D:
    ctr = np.asarray(center, dtype=float)
    return ClosedCurve2D(ctr + factor * (curve.points - ctr))


def curvature(curve: ClosedCurve2D) -> np.ndarray:
    """Per-vertex signed curvature via the circumscribed circle of each
    vertex triple; positive on positively oriented convex curves."""
    p = curve.points
    a = np.roll(p, 1, axis=0)
    c = np.roll(p, -1, axis=0)
    ab = p - a
    ac = c - a
    bc = c - p
    la = np.linalg.norm(ab, axis=1)
    lb = np.linalg.norm(bc, axis=1)
    lc = np.linalg.norm(ac, axis=1)
    scale_len = float(np.max(np.abs(p))) + 1.0
    if np.any(la <= 1e-14 * scale_len) or np.any(lb <= 1e-14 * scale_len):
        raise ValueError("degenerate edge")
    cross = ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0]
    return 2.0 * cross / (la * lb * lc)


def tangents(curve: ClosedCurve2D) -> np.ndarray:
    """Unit discrete tangents from the central chord p_{i+1} - p_{i-1}."""
    d = np.roll(curve.points, -1, axis=0) - np.roll(curve.points, 1, axis=0)
    return d / np.linalg.norm(d, axis=1)[:, None]


def inward_normals(curve: ClosedCurve2D) -> np.ndarray:
    """Left normal of the tangent; points into the enclosed region for a
    positively oriented curve."""
    t = tangents(curve)
    return np.column_stack([-t[:, 1], t[:, 0]])


def center_of_mass(curve: ClosedCurve2D) -> np.ndarray:
    """Arclength-weighted barycenter (edge midpoints weighted by edge length)."""
    mid = 0.5 * (curve.points + np.roll(curve.points, -1, axis=0))
    w = curve.edge_lengths
    return (mid * w[:, None]).sum(axis=0) / w.sum()


def enclosed_area(curve: ClosedCurve2D) -> float:
    """Shoelace area, positive for positive orientation."""
    p = curve.points
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def noncollapsedness_ratio(curve: ClosedCurve2D) -> float:
    """Min over vertices of (largest inscribed ball radius touching there)
    times the local curvature.  Equals 1 exactly on a circle.

    The inscribed radius at vertex i is min over other vertices j of
    |p_j - p_i|^2 / (2 <p_j - p_i, n_i>) with n_i the inward normal.
    """
    kappa = curvature(curve)
    if np.min(kappa) <= 0.0:
        raise ValueError("nonconvex curve")
    p = curve.points
    n_in = inward_normals(curve)
    diff = p[None, :, :] - p[:, None, :]  # diff[i, j] = p_j - p_i
    num = np.einsum("ijk,ijk->ij", diff, diff)
    den = 2.0 * np.einsum("ijk,ik->ij", diff, n_in)
    scale_len = float(np.max(np.abs(p))) + 1.0
    ok = den > 1e-14 * scale_len
    radii = np.where(ok, num / np.where(ok, den, 1.0), np.inf)
    np.fill_diagonal(radii, np.inf)
    inscribed = radii.min(axis=1)
    return float(np.min(kappa * inscribed))


def c1_distance_to_unit_circle(curve: ClosedCurve2D) -> float:
    """Recenter, then sup over arclength-matched parameters of position
    mismatch plus tangent mismatch against the unit circle, minimized
    over the rotation that aligns the two."""
    pts = curve.points - center_of_mass(curve)
    u = curve.vertex_arclength / curve.total_length
    tans = tangents(curve)
    ang = 2.0 * np.pi * u

    def sup_mismatch(phi: float) -> float:
        ca = np.cos(ang + phi)
        sa = np.sin(ang + phi)
        dpos = np.hypot(pts[:, 0] - ca, pts[:, 1] - sa)
        dtan = np.hypot(tans[:, 0] + sa, tans[:, 1] - ca)
        return float(np.max(dpos + dtan))

    theta = np.arctan2(pts[:, 1], pts[:, 0])
    off = theta - ang
    phi0 = math.atan2(float(np.mean(np.sin(off))), float(np.mean(np.cos(off))))
    coarse = phi0 + np.linspace(-math.pi, math.pi, 65)
    vals = [sup_mismatch(ph) for ph in coarse]
    best = coarse[int(np.argmin(vals))]
    res = minimize_scalar(
        sup_mismatch, bounds=(best - 0.2, best + 0.2), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(res.fun, np.min(vals)))


def csf_step(curve: ClosedCurve2D, dt: float, redistribute: bool = False) -> ClosedCurve2D:
    """One explicit curve shortening step: each vertex moves by
    curvature * dt along the inward normal.

    Requires dt <= CSF_CFL * (min edge length)^2 and a convex curve.
    With redistribute=True the result is resampled to uniform arclength
    through a periodic cubic spline.
    """
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    min_edge = float(np.min(curve.edge_lengths))
    if dt > CSF_CFL * min_edge * min_edge * (1.0 + 1e-12):
        raise ValueError("timestep too large")
    kappa = curvature(curve)
    if np.min(kappa) <= 0.0:
        raise ValueError("nonconvex curve")
    new_pts = curve.points + dt * kappa[:, None] * inward_normals(curve)
    if redistribute:
        new_pts = _resample_uniform(new_pts)
    return ClosedCurve2D(new_pts)


def _resample_uniform(pts: np.ndarray) -> np.ndarray:
    """Resample a closed polygon at uniform arclength, periodic cubic spline."""
    n = pts.shape[0]
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    ell = np.concatenate([[0.0], np.cumsum(seg)])
    spl_x = CubicSpline(ell, closed[:, 0], bc_type="periodic")
    spl_y = CubicSpline(ell, closed[:, 1], bc_type="periodic")
    targets = np.arange(n) * (ell[-1] / n)
    return np.column_stack([spl_x(targets), spl_y(targets)])


@dataclass(frozen=True, eq=False)
class Homotopy:
    """Family of curves deforming an input curve into the sampled unit circle.

    Slices at r <= 1/4 are the input curve itself (same array), slices at
    r >= 1/2 are the exactly sampled unit circle; every intermediate slice
    stays noncollapsed at the input's tolerance.  omega records the
    measured sup of first and second discrete differences in r (and the
    mixed r,t difference), the discrete stand-in for the homotopy's
    C2-smallness in the deformation parameter.
    """

    r_grid: np.ndarray
    curves: tuple
    omega: float
    omega_parts: tuple

    def at(self, r: float) -> ClosedCurve2D:
        """Slice at arbitrary r: exact plateaus, linear interpolation between
        stored slices elsewhere."""
        if r <= 0.25:
            return self.curves[0]
        if r >= 0.5:
            return self.curves[-1]
        k = int(np.searchsorted(self.r_grid, r, side="right")) - 1
        k = min(max(k, 0), len(self.r_grid) - 2)
        r0, r1 = self.r_grid[k], self.r_grid[k + 1]
        lam = (r - r0) / (r1 - r0)
        pts = (1.0 - lam) * self.curves[k].points + lam * self.curves[k + 1].points
        return ClosedCurve2D(pts)


def build_homotopy(
    curve: ClosedCurve2D,
    delta_hat: float,
    r_count: int = 81,
    method_tol: float | None = None,
) -> Homotopy:
    """Construct the rounding homotopy for a convex near-circle.

    The input must pass the noncollapsedness test at 1/(1+delta_hat) and
    have C1 distance to the unit circle at most delta_hat.  Interior
    slices run an area-preserving curve shortening flow, time-reparametrized
    by the smooth ramp, and blend (by the same ramp) into the exactly
    sampled unit circle while unwinding the residual rotation.
    """
    if delta_hat <= 0.0:
        raise ValueError("delta_hat must be positive")
    ratio = noncollapsedness_ratio(curve)
    dist = c1_distance_to_unit_circle(curve)
    if ratio < 1.0 / (1.0 + delta_hat) - 1e-9 or dist > delta_hat * (1.0 + 1e-9):
        raise ValueError("input curve not delta_hat-close")

    n = curve.n
    circle = unit_circle(n)
    target = max(delta_hat / 10.0, 1e-7) if method_tol is None else method_tol

    # area-preserving curve shortening run, recorded densely; convergence is
    # judged on roundness (distance to the unit circle after rescaling to
    # area pi), since the area-preserving flow cannot remove a radius offset
    def roundness(c: ClosedCurve2D) -> float:
        com = center_of_mass(c)
        f = math.sqrt(math.pi / enclosed_area(c))
        return c1_distance_to_unit_circle(ClosedCurve2D(f * (c.points - com)))

    area0 = enclosed_area(curve)
    states = [curve.points]
    times = [0.0]
    state = curve
    t_flow = 0.0
    max_steps = 20000
    for _ in range(max_steps):
        if roundness(state) <= target:
            break
        dt = CSF_CFL * 0.8 * float(np.min(state.edge_lengths)) ** 2
        stepped = csf_step(state, dt, redistribute=True)
        com = center_of_mass(stepped)
        factor = math.sqrt(area0 / enclosed_area(stepped))
        pts = com + factor * (stepped.points - com)
        state = ClosedCurve2D(pts)
        t_flow += dt
        states.append(pts)
        times.append(t_flow)
    times_arr = np.asarray(times)

    def flow_at(time: float) -> np.ndarray:
        if time <= 0.0 or len(states) == 1:
            return states[0]
        if time >= times_arr[-1]:
            return states[-1]
        k = int(np.searchsorted(times_arr, time, side="right")) - 1
        lam = (time - times_arr[k]) / (times_arr[k + 1] - times_arr[k])
        return (1.0 - lam) * states[k] + lam * states[k + 1]

    # residual rotation of the flow endpoint relative to phase-0 sampling
    end = states[-1]
    end_c = end - center_of_mass(ClosedCurve2D(end, validate=False))
    ang = 2.0 * np.pi * np.arange(n) / n
    off = np.arctan2(end_c[:, 1], end_c[:, 0]) - ang
    phi_star = math.atan2(float(np.mean(np.sin(off))), float(np.mean(np.cos(off))))
    circle_phi = np.column_stack([np.cos(ang + phi_star), np.sin(ang + phi_star)])

    r_grid = np.linspace(0.0, 1.0, r_count)
    slices: list[ClosedCurve2D] = []
    min_ratio = 1.0 / (1.0 + delta_hat) - 1e-6
    for r in r_grid:
        if r <= 0.25 + 1e-15:
            slices.append(curve)
            continue
        if r >= 0.5 - 1e-15:
            slices.append(circle)
            continue
        uu = (r - 0.25) / 0.25
        w = smooth_step(uu)
        pts = (1.0 - w) * flow_at(w * t_flow) + w * circle_phi
        c, s = math.cos(-phi_star * w), math.sin(-phi_star * w)
        rot = np.array([[c, -s], [s, c]])
        sl = ClosedCurve2D(pts @ rot.T)
        if noncollapsedness_ratio(sl) < min_ratio:
            raise ValueError("homotopy slice failed the noncollapsedness test")
        slices.append(sl)

    stack = np.stack([sl.points for sl in slices])  # (nr, n, 2)
    dr = r_grid[1] - r_grid[0]
    d_r = np.diff(stack, axis=0) / dr
    d_rr = np.diff(stack, n=2, axis=0) / dr**2
    dt_param = 1.0 / n
    d_rt = (np.roll(d_r, -1, axis=1) - np.roll(d_r, 1, axis=1)) / (2.0 * dt_param)
    sup_r = float(np.max(np.linalg.norm(d_r, axis=2)))
    sup_rr = float(np.max(np.linalg.norm(d_rr, axis=2)))
    sup_rt = float(np.max(np.linalg.norm(d_rt, axis=2)))
    return Homotopy(
        r_grid=r_grid,
        curves=tuple(slices),
        omega=sup_r + sup_rt + sup_rr,
        omega_parts=(sup_r, sup_rt, sup_rr),
    )


def curve_to_json(curve: ClosedCurve2D) -> list:
    """JSON-ready nested list of [x, y] vertex pairs."""
    return curve.points.tolist()


def curve_from_json(data) -> ClosedCurve2D:
    """Rebuild a curve from the JSON vertex list, re-validating invariants."""
    return ClosedCurve2D(np.asarray(data, dtype=float))
