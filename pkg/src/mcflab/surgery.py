"""The explicit neck-rounding surgery construction.

A neck of size 1 is modified in four stages along its height s: the
surface is kept for s <= 0, dilated by the factor rho(s) = 1 - e^(-4 L/s)
(L the cap-scale parameter) for small positive s, blended to its
reference cross section and then rounded to circles through the
homotopy as s grows, and finally closed by an axially symmetric cap
whose cross-section diameter v(s) shrinks to zero.  The same radius
profile, rescaled by the neck size, drives dynamic surgery on
generating curves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from mcflab import curve2d
from mcflab.curve2d import ClosedCurve2D, Homotopy, smooth_step
from mcflab.neckmodel import CrossSectionFamily, GeneratingCurve, NeckLocation, certify_neck

SMOOTHING_HALFWIDTH = 0.01  # |z| below which the mollified absolute value bends
_BUMP_NORM = 315.0 / 256.0  # normalizes (1 - w^2)^4 on [-1, 1]


@dataclass(frozen=True)
class SurgeryParams:
    """Parameters of a single surgery.

    cap_scale is the dilation/cap length parameter (serialized as
    "Lambda"), neck_halflength the neck's half-length budget (serialized
    as "L"); h1 is the surgery scale: necks operated on have radius in
    [1/(2 h1), 1/h1].  Derived values: cap_constant, the limiting ratio
    controlling the cap's curvature bound, and cap_end, the height at
    which the cap closes.
    """

    alpha_hat: float = 1.0
    delta_hat: float = 0.02
    eps: float = 1e-4
    neck_halflength: float = 10.0
    cap_scale: float = 2.0
    h1: float = 1.0
    theorem_mode: bool = False

    def __post_init__(self) -> None:
        if self.cap_scale <= 0.0:
            raise ValueError("cap_scale must be positive")
        if self.h1 <= 0.0:
            raise ValueError("h1 must be positive")
        if self.neck_halflength < self.cap_end + 2.0:
            raise ValueError(
                "neck_halflength must be at least cap_scale + 2*cap_scale^(1/4) + 2"
            )
        if self.cap_constant >= 1.0:
            if self.theorem_mode:
                raise ValueError(
                    "cap_constant >= 1: theorem-grade verification needs a larger cap_scale"
                )
            warnings.warn(
                "cap_constant >= 1 (small cap_scale); theorem-grade bounds are "
                "not guaranteed, inequalities are measured only",
                stacklevel=2,
            )

    @property
    def cap_constant(self) -> float:
        return cap_constant(self.cap_scale)

    @property
    def cap_end(self) -> float:
        return self.cap_scale + 2.0 * self.cap_scale**0.25


def dilation_factor(s, cap_scale: float):
    """rho(s) = 1 - e^(-4*cap_scale/s): strictly decreasing on s > 0,
    tends to 1 (flat to all orders) as s -> 0+."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("height must be positive")
    out = -np.expm1(-4.0 * cap_scale / arr)
    return float(out) if np.ndim(s) == 0 else out


def smooth_cutoff(z):
    """Monotone C-infinity cutoff: 1 on (-inf, 1], 0 on [2, inf)."""
    arr = np.asarray(z, dtype=float)
    out = 1.0 - smooth_step(arr - 1.0)
    return float(out) if np.ndim(z) == 0 else out


def smooth_abs(z):
    """Even convex mollification of |z|, exact for |z| >= 1/100.

    Mollifier: the even bump proportional to (1 - (100 y)^2)^4 on
    [-1/100, 1/100]; the convolution has the closed form used here.
    """
    h = SMOOTHING_HALFWIDTH
    arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.abs(arr)
    inside = out < h
    if np.any(inside):
        t = arr[inside] / h
        poly = t * (1.0 - t**2 * (4.0 / 3.0 - t**2 * (6.0 / 5.0 - t**2 * (4.0 / 7.0 - t**2 / 9.0))))
        out[inside] = arr[inside] * (2.0 * _BUMP_NORM * poly) + (
            _BUMP_NORM * h / 5.0
        ) * (1.0 - t**2) ** 5
    if np.ndim(z) == 0:
        return float(out[0])
    return out


def cap_constant(cap_scale: float) -> float:
    """a = 1 - e^(-4) + (1/3) (1 - e^(-4))^2 * cap_scale^(-1/4)."""
    if cap_scale <= 0.0:
        raise ValueError("cap_scale must be positive")
    base = -math.expm1(-4.0)
    return base + (base * base / 3.0) * cap_scale ** (-0.25)


def cap_diameter(s, params: SurgeryParams):
    """Cross-section diameter v(s) of the axially symmetric cap on
    [cap_scale, cap_end]; v(cap_end) = 0.

    On the first quarter-length the diameter is the smooth minimum of
    the dilation branch and the closing branch; past it, the closing
    branch alone.
    """
    lam = params.cap_scale
    a = params.cap_constant
    b = params.cap_end
    q = lam**0.25
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(arr < lam - 1e-9) or np.any(arr > b + 1e-9):
        raise ValueError("height outside the cap region")
    arr = np.clip(arr, lam, b)
    w = b - arr
    branch_b = a * np.sqrt(w / (a + w))
    out = 2.0 * branch_b
    first = arr <= lam + q
    if np.any(first):
        aa = -np.expm1(-4.0 * lam / arr[first])
        bb = branch_b[first]
        out[first] = aa + bb - smooth_abs(q * (aa - bb)) / q
    if np.ndim(s) == 0:
        return float(out[0])
    return out


def normalized_radius_profile(sigma, params: SurgeryParams):
    """Radius of the surgered surface over a size-1 neck: the dilation
    factor on (0, cap_scale], half the cap diameter on (cap_scale,
    cap_end]; 0 at the closing height."""
    arr = np.atleast_1d(np.asarray(sigma, dtype=float))
    lam, b = params.cap_scale, params.cap_end
    if np.any(arr <= 0.0) or np.any(arr > b + 1e-9):
        raise ValueError("normalized height outside (0, cap_end]")
    out = np.empty_like(arr)
    neck = arr <= lam
    out[neck] = dilation_factor(arr[neck], lam)
    cap = ~neck
    if np.any(cap):
        out[cap] = 0.5 * cap_diameter(np.minimum(arr[cap], b), params)
    if np.ndim(sigma) == 0:
        return float(out[0])
    return out


def theorem_neck_grid(
    cap_scale: float,
    n_neck: int = 400,
    n_cap: int = 160,
    s_min: float = 1e-2,
    neg_extent: float = 2.0,
    n_neg: int = 25,
) -> np.ndarray:
    """Height grid resolving the whole construction: a graded identity
    stretch below 0, a geometric rise over the dilation span, a refining
    transition into the cap, and cap heights graded toward the closing
    height (cubic grading plus a geometric tail at the tip).  Consecutive
    spacing ratios stay within the family's quasi-uniformity bound.
    """
    lam = cap_scale
    q2 = 2.0 * lam**0.25

    k = np.arange(1, n_cap - 1)
    w_cubic = q2 * (1.0 - k / n_cap) ** 3
    w_tail = w_cubic[-1] * np.geomspace(1.0, 1e-5, 20)[1:]
    w = np.concatenate([w_cubic, w_tail])
    cap = lam + (q2 - w)
    h_entry = cap[1] - cap[0]

    log_rg = math.log(lam / s_min) / max(n_neck - 1, 1)
    c_g = 1.0 - math.exp(-log_rg)
    trans = [lam]
    gap = h_entry
    while True:
        nxt = trans[-1] - gap
        if nxt <= 2.0 * s_min or gap >= 0.9 * c_g * nxt:
            break
        trans.append(nxt)
        gap *= 1.6
    s_join = trans[-1]
    n_geom = max(8, int(math.ceil(math.log(s_join / s_min) / log_rg)) + 1)
    pos = np.geomspace(s_min, s_join, n_geom)

    neg = -np.geomspace(s_min, neg_extent, n_neg)[::-1]
    return np.concatenate([neg, [0.0], pos[:-1], trans[::-1], cap])


@dataclass(frozen=True, eq=False)
class ModifiedNeck:
    """A neck family together with its surgered counterpart.

    `modified` agrees with `original` exactly for s <= 0, carries the
    dilated/rounded sections up to s = cap_scale, and continues with cap
    sections (circles of radius v(s)/2) up to just below the closing
    height.  `joins` records the cross-branch C0/C1 mismatches at the
    four region boundaries.
    """

    original: CrossSectionFamily
    modified: CrossSectionFamily
    params: SurgeryParams
    joins: dict


def _section_formula(
    s: float,
    curve_at,
    base: ClosedCurve2D,
    homotopy: Homotopy,
    params: SurgeryParams,
    circle_pts: np.ndarray,
):
    """Vertex array of the modified section at height s > 0."""
    lam = params.cap_scale
    q = lam**0.25
    if s <= q:
        return dilation_factor(s, lam) * curve_at(s).points
    if s <= 2.0 * q:
        chi = smooth_cutoff(s / q)
        blend = chi * curve_at(s).points + (1.0 - chi) * base.points
        return dilation_factor(s, lam) * blend
    if s <= lam:
        return dilation_factor(s, lam) * homotopy.at(s / lam).points
    return 0.5 * cap_diameter(s, params) * circle_pts


def build_modified_neck(
    neck: CrossSectionFamily,
    params: SurgeryParams,
    homotopy: Homotopy,
    cap_heights: np.ndarray | None = None,
) -> ModifiedNeck:
    """Apply the surgery construction to a certified size-1 neck.

    The modified family reuses the neck's own grid up to s = cap_scale
    and adds cap sections at the neck's heights inside (cap_scale,
    cap_end) when present (otherwise at `cap_heights`, or at a default
    grid graded toward the closing height).
    """
    if abs(neck.size - 1.0) > 1e-12:
        raise ValueError("surgery construction expects a size-1 neck")
    base = homotopy.curves[0]
    cert = certify_neck(
        neck,
        alpha_hat=params.alpha_hat,
        delta_hat=params.delta_hat,
        eps=params.eps,
        L=params.neck_halflength,
    )
    if not cert.passed:
        raise ValueError(
            f"neck not certified: measured distance {cert.measured_eps:.3e} "
            f"exceeds eps {params.eps:.3e} or a section is collapsed"
        )
    stack = np.stack([c.points for c in neck.curves])
    ref = stack[0] + (stack - stack[0]).mean(axis=0)
    if float(np.max(np.linalg.norm(ref - base.points, axis=1))) > max(
        20.0 * params.eps, 1e-8
    ):
        raise ValueError("homotopy base curve does not match the neck reference curve")
    com = curve2d.center_of_mass(base)
    if float(np.hypot(com[0], com[1])) > max(20.0 * params.eps, 1e-8):
        raise ValueError("neck reference curve must have center of mass at the origin")

    lam, b = params.cap_scale, params.cap_end
    n = neck.n_vertices
    ang = 2.0 * np.pi * np.arange(n) / n
    circle_pts = np.column_stack([np.cos(ang), np.sin(ang)])

    s_grid = np.asarray(neck.s_grid)
    curve_of_height = {float(s): c for s, c in zip(s_grid, neck.curves)}

    def curve_at(s: float) -> ClosedCurve2D:
        key = float(s)
        if key in curve_of_height:
            return curve_of_height[key]
        i = int(np.argmin(np.abs(s_grid - s)))
        return neck.curves[i]

    heights: list[float] = []
    sections: list[ClosedCurve2D] = []
    for s, c in zip(s_grid, neck.curves):
        if s > lam:
            continue
        heights.append(float(s))
        if s <= 0.0:
            sections.append(c)
        else:
            pts = _section_formula(float(s), curve_at, base, homotopy, params, circle_pts)
            sections.append(ClosedCurve2D(pts))

    if cap_heights is None:
        inside = s_grid[(s_grid > lam) & (s_grid < b)]
        if inside.size >= 8:
            cap_heights = inside
        else:
            qlen = b - lam
            frac = 1.0 - np.geomspace(1e-6, 1.0, 96)[::-1]
            cap_heights = lam + qlen * np.concatenate([frac, [1.0 - 2e-7]])
    for s in np.asarray(cap_heights, dtype=float):
        if not (lam < s < b):
            raise ValueError("cap heights must lie strictly inside the cap region")
        heights.append(float(s))
        pts = 0.5 * cap_diameter(s, params) * circle_pts
        sections.append(ClosedCurve2D(pts))

    modified = CrossSectionFamily(np.asarray(heights), tuple(sections), 1.0)
    joins = _join_diagnostics(neck, params, homotopy, base, circle_pts, curve_at)
    return ModifiedNeck(original=neck, modified=modified, params=params, joins=joins)


def _join_diagnostics(neck, params, homotopy, base, circle_pts, curve_at) -> dict:
    """C0 and C1 mismatch of adjacent branch formulas at each region boundary."""
    lam = params.cap_scale
    q = lam**0.25
    tiny = 1e-12

    def branch(s: float, region: int) -> np.ndarray:
        if region == 0:
            return curve_at(s).points
        s = max(s, tiny)
        if region == 1:
            return dilation_factor(s, lam) * curve_at(s).points
        if region == 2:
            chi = smooth_cutoff(s / q)
            return dilation_factor(s, lam) * (
                chi * curve_at(s).points + (1.0 - chi) * base.points
            )
        if region == 3:
            return dilation_factor(s, lam) * homotopy.at(s / lam).points
        return 0.5 * cap_diameter(min(s, params.cap_end), params) * circle_pts

    out = {}
    specs = [
        ("keep/dilate", 0.0, 0, 1),
        ("dilate/blend", q, 1, 2),
        ("blend/round", 2.0 * q, 2, 3),
        ("round/cap", lam, 3, 4),
    ]
    for name, s0, rl, rr in specs:
        h = 1e-5 * max(1.0, abs(s0))
        left_val = branch(s0, rl)
        right_val = branch(s0, rr)
        c0 = float(np.max(np.linalg.norm(left_val - right_val, axis=1)))
        dl = (branch(s0, rl) - branch(s0 - h, rl)) / h
        dr = (branch(s0 + h, rr) - branch(s0, rr)) / h
        c1 = float(np.max(np.linalg.norm(dl - dr, axis=1)))
        out[name] = {"c0": c0, "c1": c1}
    return out


def apply_surgery_axi(
    g: GeneratingCurve, loc: NeckLocation, params: SurgeryParams
) -> list[GeneratingCurve]:
    """Cut an axisymmetric profile at a detected neck and close both sides
    with the scaled dilation/cap radius profile.

    Returns [left, right]: the left piece keeps all nodes with s <=
    s_center and continues with radius r * profile((s - s_center)/r) up
    to its closing pole; the right piece is the mirror image.  Nodes
    away from the neck are untouched (bitwise).
    """
    r = loc.r
    h1 = params.h1
    if not (1.0 / (2.0 * h1) - 1e-12 <= r <= 1.0 / h1 + 1e-12):
        raise ValueError("neck radius outside the surgery scale window")
    b = params.cap_end
    if loc.s_center + r * b > loc.s_hi + 1e-12 or loc.s_center - r * b < loc.s_lo - 1e-12:
        raise ValueError("neck too short")

    s = g.nodes[:, 0]
    spacing = float(np.median(g.seg_lengths))
    n_neck = max(32, int(math.ceil(params.cap_scale * r / spacing)))
    sigma_neck = np.linspace(0.0, params.cap_scale, n_neck + 1)[1:]
    w_hi = b - params.cap_scale
    frac = 1.0 - np.geomspace(1e-4, 1.0, 48)[::-1]
    sigma_cap = params.cap_scale + w_hi * np.concatenate([frac[1:], [1.0]])
    sigma = np.concatenate([sigma_neck, sigma_cap])
    radius = np.empty_like(sigma)
    closing = sigma >= b - 1e-15
    radius[~closing] = normalized_radius_profile(sigma[~closing], params)
    radius[closing] = 0.0

    left_keep = g.nodes[s <= loc.s_center + 1e-15]
    cap_left = np.column_stack([loc.s_center + r * sigma, r * radius])
    left_nodes = np.vstack([left_keep, cap_left])
    left = GeneratingCurve(left_nodes, closed_left=g.closed_left, closed_right=True)

    right_keep = g.nodes[s >= loc.s_center - 1e-15]
    cap_right = np.column_stack([loc.s_center - r * sigma, r * radius])[::-1]
    right_nodes = np.vstack([cap_right, right_keep])
    right = GeneratingCurve(right_nodes, closed_left=True, closed_right=g.closed_right)
    return [left, right]
