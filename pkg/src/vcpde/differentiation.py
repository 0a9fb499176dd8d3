"""Derivative estimation on uniform grids: centered stencils and local polynomial fits.

Both methods only ever evaluate where their full stencil/window fits inside the
grid; edge strips are dropped from the valid region instead of being
extrapolated, since biased edge derivatives would contaminate the regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import SpatioTemporalField

# centered stencils, formal order two
_FD_STENCILS = {
    1: np.array([-0.5, 0.0, 0.5]),
    2: np.array([1.0, -2.0, 1.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}

MAX_SPACE_ORDER = 4


def polyfit_kernel(width: int, degree: int, order: int, h: float) -> np.ndarray:
    """Weights that differentiate a least-squares local polynomial at the window center."""
    if width % 2 == 0:
        raise ValueError("poly_fit window width must be odd")
    if width <= degree:
        raise ValueError("poly_fit window width must exceed the degree")
    if degree < order:
        raise ValueError("poly_fit degree must be at least the derivative order")
    offsets = (np.arange(width) - width // 2) * h
    vand = np.vander(offsets, degree + 1, increasing=True)
    return np.linalg.pinv(vand)[order] * math.factorial(order)


@dataclass(frozen=True)
class DerivativeField:
    """One derivative on the full grid; entries outside the valid region are NaN."""

    values: np.ndarray
    axis: str
    order: int
    trim: int  # points dropped at each end of the differentiated axis

    def valid(self) -> np.ndarray:
        if self.trim == 0:
            return self.values
        sl = slice(self.trim, -self.trim)
        return self.values[sl, :] if self.axis == "space" else self.values[:, sl]


def differentiate(
    field: SpatioTemporalField,
    axis: str,
    order: int,
    method: str = "finite_difference",
    width: int | None = None,
    degree: int | None = None,
) -> DerivativeField:
    """Differentiate along one axis; returns full-shape values with NaN edges."""
    if axis not in ("space", "time"):
        raise ValueError("axis must be 'space' or 'time'")
    if axis == "time" and order != 1:
        raise ValueError("time derivatives are only taken at order 1")
    if not 1 <= order <= MAX_SPACE_ORDER:
        raise ValueError(f"derivative order must be in 1..{MAX_SPACE_ORDER}")
    ax = 0 if axis == "space" else 1
    h = field.dx if axis == "space" else field.dt

    if method == "finite_difference":
        kernel = _FD_STENCILS[order] / h**order
    elif method == "poly_fit":
        if width is None or degree is None:
            raise ValueError("poly_fit requires width and degree")
        kernel = polyfit_kernel(width, degree, order, h)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")

    trim = len(kernel) // 2
    if field.values.shape[ax] < len(kernel):
        raise ValueError(
            f"grid too small along {axis}: {field.values.shape[ax]} points for a "
            f"{len(kernel)}-point stencil"
        )
    out = ndimage.correlate1d(field.values, kernel, axis=ax, mode="constant", cval=0.0)
    if trim:
        edge = [slice(None), slice(None)]
        edge[ax] = slice(0, trim)
        out[tuple(edge)] = np.nan
        edge[ax] = slice(-trim, None)
        out[tuple(edge)] = np.nan
    return DerivativeField(out, axis, order, trim)


@dataclass(frozen=True)
class DerivativeStack:
    """u, u_t and spatial derivatives restricted to a common valid region."""

    u: np.ndarray
    u_t: np.ndarray
    space: dict[int, np.ndarray]  # derivative order -> values
    x_coords: np.ndarray
    t_coords: np.ndarray
    valid_x: tuple[int, int]  # half-open index range into the source grid
    valid_t: tuple[int, int]

    def __post_init__(self):
        shape = (self.x_coords.size, self.t_coords.size)
        for name, arr in [("u", self.u), ("u_t", self.u_t)] + [
            (f"d{q}", a) for q, a in self.space.items()
        ]:
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != valid region {shape}")

    @property
    def max_order(self) -> int:
        return max(self.space) if self.space else 0


def build_derivative_stack(
    field: SpatioTemporalField,
    max_space_order: int = MAX_SPACE_ORDER,
    space_method: str = "finite_difference",
    time_method: str = "finite_difference",
    space_width: int = 9,
    space_degree: int = 4,
    time_width: int = 5,
    time_degree: int = 3,
) -> DerivativeStack:
    """Estimate u_t and u_x..u_(x^max) and trim all to a common valid region.

    With the poly_fit method every stack entry is a derivative of the same
    locally fitted polynomial surface: the window's order-zero smoothing is
    applied to u and (along the non-differentiated axis) to every other entry
    as well.  Differentiating a smoothed surface inconsistently (smoothing
    only the derivative columns) would systematically attenuate the small
    regression coefficients under noise.
    """
    if not 1 <= max_space_order <= MAX_SPACE_ORDER:
        raise ValueError(f"max_space_order must be in 1..{MAX_SPACE_ORDER}")
    if space_method == "poly_fit" and space_degree < max_space_order:
        raise ValueError("space poly_fit degree must reach max_space_order")
    for name, method in (("space", space_method), ("time", time_method)):
        if method not in ("finite_difference", "poly_fit"):
            raise ValueError(f"unknown {name} differentiation method {method!r}")

    def kernel(axis: str, order: int) -> np.ndarray | None:
        method = space_method if axis == "space" else time_method
        h = field.dx if axis == "space" else field.dt
        if method == "finite_difference":
            return None if order == 0 else _FD_STENCILS[order] / h**order
        width, degree = (
            (space_width, space_degree) if axis == "space" else (time_width, time_degree)
        )
        return polyfit_kernel(width, degree, order, h)

    def apply_pair(qx: int, qt: int) -> np.ndarray:
        out = field.values
        kx = kernel("space", qx)
        if kx is not None:
            if field.n_x < kx.size:
                raise ValueError(f"grid too small along space for a {kx.size}-point stencil")
            out = ndimage.correlate1d(out, kx, axis=0, mode="constant")
        kt = kernel("time", qt)
        if kt is not None:
            if field.n_t < kt.size:
                raise ValueError(f"grid too small along time for a {kt.size}-point stencil")
            out = ndimage.correlate1d(out, kt, axis=1, mode="constant")
        return out

    trim_x = max(
        (kernel("space", q).size // 2 for q in range(max_space_order + 1) if kernel("space", q) is not None),
        default=0,
    )
    trim_t = max(
        (kernel("time", q).size // 2 for q in (0, 1) if kernel("time", q) is not None), default=0
    )
    sx = slice(trim_x, field.n_x - trim_x)
    st = slice(trim_t, field.n_t - trim_t)
    return DerivativeStack(
        u=apply_pair(0, 0)[sx, st],
        u_t=apply_pair(0, 1)[sx, st],
        space={q: apply_pair(q, 0)[sx, st] for q in range(1, max_space_order + 1)},
        x_coords=field.x_coords[sx],
        t_coords=field.t_coords[st],
        valid_x=(trim_x, field.n_x - trim_x),
        valid_t=(trim_t, field.n_t - trim_t),
    )
