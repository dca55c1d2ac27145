"""Gridded probability transport under the continuity equation.

A non-negative density on a regular 2-D or 3-D lattice is advected by a
flow with a first-order donor-cell (upwind) finite-volume update.  The
scheme is exactly conservative: interior fluxes telescope, and anything
crossing the domain boundary lands in the ``leaked_mass`` ledger, so the
total is checkable to round-off.  Positivity holds by construction within
the CFL bound.  The update is linear in the density no matter how
nonlinear the flow is; that linearity is itself one of the properties
under test, so the solver deliberately stays first order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .dynamics import FlowSystem, integrate

__all__ = [
    "CflError",
    "DensityField",
    "gaussian_blob",
    "normalize",
    "evolve_density",
    "total_mass",
    "comoving_volume",
    "linearity_check",
    "courant_number",
    "write_density_csv",
]


class CflError(ValueError):
    """Time step too large for stable upwind transport."""

    def __init__(self, cfl: float, admissible_dt: float):
        super().__init__(
            f"CFL number {cfl:.3g} exceeds 0.5; largest admissible dt is "
            f"{admissible_dt:.6g}"
        )
        self.cfl = cfl
        self.admissible_dt = admissible_dt


@dataclass(frozen=True)
class DensityField:
    """Density values on a regular rectangular lattice.

    ``mins`` is the lower domain corner, ``dx`` the per-axis cell size;
    cell (i, j, ...) is centered at mins + (i + 1/2) * dx.  ``signed``
    fields relax the non-negativity requirement; they exist only so the
    linearity check can evolve arbitrary combinations.
    """

    mins: np.ndarray
    dx: np.ndarray
    values: np.ndarray
    leaked_mass: float = 0.0
    signed: bool = False

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float)
        dx = np.asarray(self.dx, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim not in (2, 3):
            raise ValueError("density grids must be 2-D or 3-D")
        if mins.shape != (vals.ndim,) or dx.shape != (vals.ndim,):
            raise ValueError("mins and dx must match the grid dimension")
        if np.any(dx <= 0):
            raise ValueError("cell sizes must be positive")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if not self.signed and np.any(vals < 0):
            raise ValueError("density values must be non-negative")
        if self.leaked_mass < 0:
            raise ValueError("leaked_mass must be non-negative")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "values", vals)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.mins[axis] + (np.arange(n) + 0.5) * self.dx[axis]


def gaussian_blob(bounds, shape, center, sigma: float) -> DensityField:
    """Isotropic Gaussian density on the grid, normalized to unit mass."""
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    shape = tuple(int(s) for s in shape)
    dx = (hi - lo) / np.array(shape)
    field = DensityField(lo, dx, np.zeros(shape))
    axes = [field.axis_centers(a) for a in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, np.asarray(center, dtype=float)))
    vals = np.exp(-r2 / (2.0 * sigma**2))
    return normalize(DensityField(lo, dx, vals))


def normalize(rho: DensityField) -> DensityField:
    """Rescale cell values so the total mass is 1; leaked mass is reset."""
    total = float(rho.values.sum()) * rho.cell_volume
    if total <= 0:
        raise ValueError("cannot normalize a field with no mass")
    return DensityField(rho.mins, rho.dx, rho.values / total, 0.0, rho.signed)


def total_mass(rho: DensityField) -> float:
    """Grid mass plus everything accumulated in the boundary-leak ledger."""
    return float(rho.values.sum()) * rho.cell_volume + rho.leaked_mass


def _eval_velocity(system: FlowSystem, pts: np.ndarray) -> np.ndarray:
    """rhs evaluated on an (..., dim) array of positions."""
    if system.vectorized:
        return system.rhs(pts)
    flat = pts.reshape(-1, pts.shape[-1])
    out = np.array([system.rhs(p) for p in flat])
    return out.reshape(pts.shape)


def _face_velocities(system: FlowSystem, rho: DensityField) -> list[np.ndarray]:
    """Face-normal velocity component per axis, evaluated at face centers."""
    d = rho.ndim
    face_u = []
    for axis in range(d):
        coords = []
        for a in range(d):
            if a == axis:
                n = rho.values.shape[a]
                coords.append(rho.mins[a] + np.arange(n + 1) * rho.dx[a])
            else:
                coords.append(rho.axis_centers(a))
        mesh = np.meshgrid(*coords, indexing="ij")
        pts = np.stack(mesh, axis=-1)
        face_u.append(_eval_velocity(system, pts)[..., axis])
    return face_u


def courant_number(system: FlowSystem, rho: DensityField, dt: float) -> float:
    """max |u_axis| * dt / dx_axis over the domain faces."""
    face_u = _face_velocities(system, rho)
    return max(
        float(np.max(np.abs(u))) * dt / rho.dx[a] for a, u in enumerate(face_u)
    )


def _shifted_slices(ndim: int, axis: int):
    lower = [slice(None)] * ndim
    upper = [slice(None)] * ndim
    lower[axis] = slice(None, -1)
    upper[axis] = slice(1, None)
    return tuple(lower), tuple(upper)


def evolve_density(
    system: FlowSystem, rho: DensityField, dt: float, n_steps: int
) -> DensityField:
    """Advance the density ``n_steps`` donor-cell steps of size ``dt``.

    Outflow through the domain boundary accumulates in ``leaked_mass``;
    nothing flows in from outside.  Raises :class:`CflError` before doing
    any work when max |u| dt / dx exceeds 0.5 on any axis.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if system.dim != rho.ndim:
        raise ValueError("system dimension must match the grid dimension")
    face_u = _face_velocities(system, rho)
    cfl = max(float(np.max(np.abs(u))) * dt / rho.dx[a] for a, u in enumerate(face_u))
    if cfl > 0.5 + 1e-12:
        raise CflError(cfl, 0.5 * dt / cfl)

    d = rho.ndim
    pos = [np.maximum(u, 0.0) for u in face_u]
    neg = [np.minimum(u, 0.0) for u in face_u]
    vals = rho.values.copy()
    leaked = rho.leaked_mass
    cell_volume = rho.cell_volume

    for _ in range(n_steps):
        new_vals = vals.copy()
        for axis in range(d):
            lower, upper = _shifted_slices(d, axis)
            flux = np.zeros(face_u[axis].shape)
            # interior faces: donor cell, outside treated as vacuum
            flux[upper][lower] = pos[axis][upper][lower] * vals[lower] \
                + neg[axis][upper][lower] * vals[upper]
            # boundary faces: only outward-going parts carry mass
            first = [slice(None)] * d
            first[axis] = 0
            last = [slice(None)] * d
            last[axis] = -1
            flux[tuple(first)] = neg[axis][tuple(first)] * vals[tuple(first)]
            flux[tuple(last)] = pos[axis][tuple(last)] * vals[tuple(last)]
            div = (flux[upper] - flux[lower]) / rho.dx[axis]
            new_vals -= dt * div
            out_bottom = -flux[tuple(first)].sum()
            out_top = flux[tuple(last)].sum()
            leaked += dt * (out_bottom + out_top) * cell_volume / rho.dx[axis]
        if not rho.signed:
            # round-off guard; the scheme itself preserves positivity
            np.maximum(new_vals, 0.0, out=new_vals)
        vals = new_vals
    return DensityField(rho.mins, rho.dx, vals, leaked, rho.signed)


def comoving_volume(system: FlowSystem, region, t: float, dt: float) -> float:
    """V(t)/V(0) for a small box transported by the flow.

    Box corners plus edge midpoints are integrated forward and the volume
    read off the convex hull, which is exact while the flow is locally
    linear over the region.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    lo, hi = (np.asarray(b, dtype=float) for b in region)
    if lo.shape != (system.dim,) or hi.shape != (system.dim,) or np.any(hi <= lo):
        raise ValueError("region must be (lower, upper) corners with upper > lower")
    corners = np.array(
        [[(hi if bit else lo)[i] for i, bit in enumerate(bits)]
         for bits in np.ndindex(*(2,) * system.dim)]
    )
    midpoints = []
    for a in range(len(corners)):
        for b in range(a + 1, len(corners)):
            if np.sum(corners[a] != corners[b]) == 1:  # edge of the box
                midpoints.append(0.5 * (corners[a] + corners[b]))
    pts0 = np.vstack([corners, midpoints])
    n_steps = round(t / dt)
    pts_t = np.array(
        [integrate(system, p, dt, n_steps).points[-1] for p in pts0]
    )
    return float(ConvexHull(pts_t).volume / ConvexHull(pts0).volume)


def linearity_check(
    system: FlowSystem,
    rho1: DensityField,
    rho2: DensityField,
    alpha: float,
    beta: float,
    dt: float,
    n_steps: int,
) -> float:
    """Max-over-cells deviation of evolve(a*r1 + b*r2) from a*evolve(r1) + b*evolve(r2).

    The transport update is linear in the density, so the deviation is
    round-off only, regardless of how nonlinear the flow is.
    """
    same_grid = (
        rho1.values.shape == rho2.values.shape
        and np.array_equal(rho1.mins, rho2.mins)
        and np.array_equal(rho1.dx, rho2.dx)
    )
    if not same_grid:
        raise ValueError("rho1 and rho2 must live on identical grids")
    combined = DensityField(
        rho1.mins,
        rho1.dx,
        alpha * rho1.values + beta * rho2.values,
        0.0,
        signed=True,
    )
    evolved_combined = evolve_density(system, combined, dt, n_steps)
    ev1 = evolve_density(
        system, DensityField(rho1.mins, rho1.dx, rho1.values, 0.0, signed=True), dt, n_steps
    )
    ev2 = evolve_density(
        system, DensityField(rho2.mins, rho2.dx, rho2.values, 0.0, signed=True), dt, n_steps
    )
    target = alpha * ev1.values + beta * ev2.values
    return float(np.max(np.abs(evolved_combined.values - target)))


def write_density_csv(rho: DensityField, path) -> None:
    """Cell-center coordinates and values, C order."""
    d = rho.ndim
    axes = [rho.axis_centers(a) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + ["value"])
        coords = [m.ravel() for m in mesh]
        for row in zip(*coords, rho.values.ravel()):
            writer.writerow([repr(float(v)) for v in row])
