"""Uniform periodic mesh with a modal Legendre basis of degree k.

Cell j covers (a + j*h, a + (j+1)*h) and carries the shifted Legendre
basis P_m(2*(x - x_j)/h), m = 0..k, with x_j the cell midpoint.  Modal
orthogonality makes the mass operator diagonal with entries h/(2m+1).
Coefficient vectors are ordered cell-major, mode-minor.

Point evaluation wraps x periodically onto [a, b) and uses the half-open
cell convention at interfaces.  The L2/Linf error norms sample each cell
at its own k+3 Gauss-Lobatto nodes, so interface nodes are evaluated
cell-locally and never touch the wrap convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .quadrature import gauss_legendre, gauss_lobatto

__all__ = [
    "DgSpace",
    "FieldCoeffs",
    "MassOperator",
    "make_space",
    "eval_field",
    "l2_project",
    "basis_moments",
    "l2_error",
    "linf_error",
]


@dataclass(frozen=True)
class MassOperator:
    """Diagonal mass operator; entries h/(2m+1) repeated per cell."""

    diag: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.diag * v

    def solve(self, v: np.ndarray) -> np.ndarray:
        return v / self.diag


@dataclass(frozen=True)
class DgSpace:
    a: float
    b: float
    n_cells: int
    degree: int
    h: float
    centers: np.ndarray = field(repr=False)
    # reference Gauss-Legendre table used for projections: nodes/weights on
    # (-1, 1) and basis values P_m(node), shape (nq, k+1)
    proj_nodes: np.ndarray = field(repr=False)
    proj_weights: np.ndarray = field(repr=False)
    proj_basis: np.ndarray = field(repr=False)
    # reference Gauss-Lobatto table (k+3 nodes) used for error norms
    lob_nodes: np.ndarray = field(repr=False)
    lob_weights: np.ndarray = field(repr=False)
    lob_basis: np.ndarray = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.n_cells * (self.degree + 1)

    @property
    def mass_block(self) -> np.ndarray:
        """Per-cell diagonal of the mass operator, length k+1."""
        return self.h / (2.0 * np.arange(self.degree + 1) + 1.0)

    @property
    def mass(self) -> MassOperator:
        return MassOperator(diag=np.tile(self.mass_block, self.n_cells))


@dataclass(frozen=True)
class FieldCoeffs:
    """Modal coefficients of a piecewise-polynomial field, cell-major."""

    space: DgSpace
    coeffs: np.ndarray

    def by_cell(self) -> np.ndarray:
        """View of the coefficients with shape (n_cells, k+1)."""
        return self.coeffs.reshape(self.space.n_cells, self.space.degree + 1)


def make_space(a: float, b: float, n_cells: int, degree: int) -> DgSpace:
    """Build a uniform periodic mesh with precomputed basis tables.

    Requires a < b, n_cells >= 2 (so shift operators can wrap without a
    cell seeing itself on both sides) and degree >= 0.
    """
    if not a < b:
        raise ValueError(f"domain endpoints must satisfy a < b, got ({a}, {b})")
    if n_cells < 2:
        raise ValueError(f"n_cells={n_cells} must be >= 2 for periodic wrap")
    if degree < 0:
        raise ValueError(f"degree={degree} must be >= 0")
    h = (b - a) / n_cells
    centers = a + (np.arange(n_cells) + 0.5) * h

    nq = max(degree + 3, 8)
    gl = gauss_legendre(nq, -1.0, 1.0)
    lob = gauss_lobatto(degree + 3, -1.0, 1.0)
    return DgSpace(
        a=a,
        b=b,
        n_cells=n_cells,
        degree=degree,
        h=h,
        centers=centers,
        proj_nodes=gl.nodes,
        proj_weights=gl.weights,
        proj_basis=npleg.legvander(gl.nodes, degree),
        lob_nodes=lob.nodes,
        lob_weights=lob.weights,
        lob_basis=npleg.legvander(lob.nodes, degree),
    )


def _eval_on_grid(fn: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate a callable on an array, tolerating scalar-only callables."""
    try:
        fx = np.asarray(fn(x), dtype=float)
        if fx.shape == x.shape:
            return fx
    except (TypeError, ValueError):
        pass
    return np.vectorize(fn, otypes=[float])(x)


def eval_field(f: FieldCoeffs, x) -> float | np.ndarray:
    """Evaluate a DG field at physical points with periodic wrapping.

    At interfaces the value comes from the cell whose half-open interval
    [x_{j-1/2}, x_{j+1/2}) contains the wrapped point.
    """
    sp = f.space
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xw = sp.a + np.mod(xa - sp.a, sp.b - sp.a)
    cells = np.minimum((np.floor((xw - sp.a) / sp.h)).astype(int), sp.n_cells - 1)
    xi = 2.0 * (xw - sp.centers[cells]) / sp.h
    vander = npleg.legvander(np.atleast_1d(xi), sp.degree)
    vals = np.einsum("ij,ij->i", vander, f.by_cell()[np.atleast_1d(cells)])
    return float(vals[0]) if scalar else vals.reshape(xa.shape)


def basis_moments(space: DgSpace, fn: Callable) -> np.ndarray:
    """Moment vector int_{I_j} f(x) phi_{j,m}(x) dx, cell-major."""
    xq = space.centers[:, None] + 0.5 * space.h * space.proj_nodes[None, :]
    fx = _eval_on_grid(fn, xq)
    moments = 0.5 * space.h * (fx * space.proj_weights) @ space.proj_basis
    return moments.ravel()


def l2_project(space: DgSpace, fn: Callable) -> FieldCoeffs:
    """L2 projection onto the broken polynomial space.

    Coefficients are c_{j,m} = (2m+1)/h * int_{I_j} f phi_{j,m} dx with the
    inner integral evaluated by the max(k+3, 8)-point Gauss rule per cell.
    """
    moments = basis_moments(space, fn)
    coeffs = moments / np.tile(space.mass_block, space.n_cells)
    return FieldCoeffs(space=space, coeffs=coeffs)


def _lobatto_diff(f_h: FieldCoeffs, f_exact: Callable) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise error at the per-cell Lobatto nodes, plus physical weights."""
    sp = f_h.space
    xq = sp.centers[:, None] + 0.5 * sp.h * sp.lob_nodes[None, :]
    approx = f_h.by_cell() @ sp.lob_basis.T
    diff = _eval_on_grid(f_exact, xq) - approx
    weights = 0.5 * sp.h * np.broadcast_to(sp.lob_weights, diff.shape)
    return diff, weights


def l2_error(f_h: FieldCoeffs, f_exact: Callable) -> float:
    """Discrete L2 error sampled at k+3 Gauss-Lobatto nodes per cell."""
    diff, weights = _lobatto_diff(f_h, f_exact)
    return float(np.sqrt(np.sum(weights * diff**2)))


def linf_error(f_h: FieldCoeffs, f_exact: Callable) -> float:
    """Max error over the same k+3 Gauss-Lobatto nodes per cell."""
    diff, _ = _lobatto_diff(f_h, f_exact)
    return float(np.max(np.abs(diff)))
