"""Cell-centred rectangular grids with homogeneous Neumann boundaries.

Everything here works on the same five-point (three-point in 1D) stencil
with reflected ghost cells, written in flux form so that the discrete
Laplacian of any field sums to zero up to rounding.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.fft import dctn, idctn
from scipy.linalg import lapack

DEFAULT_MAX_CELLS = 1 << 22


class SolverError(RuntimeError):
    """Raised when an iterative elliptic solve misses its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[0, extent[0]] x ... `` with ``cells[k]`` cells per axis."""

    extent: tuple[float, ...]
    cells: tuple[int, ...]
    max_cells: int = field(default=DEFAULT_MAX_CELLS, compare=False)

    def __post_init__(self):
        extent = tuple(float(e) for e in self.extent)
        cells = tuple(int(c) for c in self.cells)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)
        if len(extent) != len(cells) or len(cells) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        if any(c < 3 for c in cells):
            raise ValueError(f"need at least 3 cells per axis, got {cells}")
        if any(not np.isfinite(e) or e <= 0 for e in extent):
            raise ValueError(f"extents must be positive, got {extent}")
        if int(np.prod(cells)) > self.max_cells:
            raise ValueError(f"{int(np.prod(cells))} cells exceeds the cap of {self.max_cells}")

    @classmethod
    def uniform(cls, dim: int, length: float, n: int) -> "Grid":
        return cls((length,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates along each axis."""
        return [(np.arange(n) + 0.5) * hk for n, hk in zip(self.cells, self.h)]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.centers(), indexing="ij"))


@dataclass(frozen=True)
class Field:
    """Scalar values at the cell centres of ``grid``; read-only once built."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))


# ---------------------------------------------------------------- stencils

def laplacian_array(w: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Neumann Laplacian of a raw array, built from face fluxes."""
    out = np.zeros_like(w)
    for axis, hk in enumerate(h):
        flux = np.diff(w, axis=axis) / (hk * hk)
        lo = [slice(None)] * w.ndim
        hi = [slice(None)] * w.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] += flux
        out[tuple(hi)] -= flux
    return out


def laplacian_neumann(x: Field) -> Field:
    return Field(x.grid, laplacian_array(x.values, x.grid.h))


def integrate(x: Field) -> float:
    """Midpoint rule: cell volume times the cell sum."""
    return float(np.sum(x.values) * x.grid.cell_volume)


def grad_sq_norm(x: Field) -> float:
    """Forward-difference Dirichlet energy summed over interior faces."""
    total = 0.0
    for axis, hk in enumerate(x.grid.h):
        d = np.diff(x.values, axis=axis) / hk
        total += float(np.sum(d * d))
    return total * x.grid.cell_volume


# ---------------------------------------------------------------- Helmholtz

@lru_cache(maxsize=32)
def _tridiag_factor(n: int, h: float):
    r = 1.0 / (h * h)
    diag = np.full(n, 1.0 + 2.0 * r)
    diag[0] = diag[-1] = 1.0 + r
    off = np.full(n - 1, -r)
    dl, d, du, du2, ipiv, info = lapack.dgttrf(off.copy(), diag, off.copy())
    if info != 0:
        raise SolverError("tridiagonal factorization failed", np.inf, 0)
    return dl, d, du, du2, ipiv


def _solve_tridiagonal(rhs: np.ndarray, h: float) -> np.ndarray:
    dl, d, du, du2, ipiv = _tridiag_factor(rhs.shape[0], h)
    z, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
    if info != 0:
        raise SolverError("tridiagonal back-substitution failed", np.inf, 0)
    return z


@lru_cache(maxsize=32)
def _dct_symbol(cells: tuple[int, ...], h: tuple[float, ...]) -> np.ndarray:
    # eigenvalues of I - Delta_h on the DCT-II basis (cell-centred Neumann)
    symbol = np.ones(cells)
    for axis, (n, hk) in enumerate(zip(cells, h)):
        lam = (4.0 / (hk * hk)) * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2
        shape = [1] * len(cells)
        shape[axis] = n
        symbol = symbol + lam.reshape(shape)
    return symbol


def _solve_dct(rhs: np.ndarray, grid: Grid) -> np.ndarray:
    coeffs = dctn(rhs, type=2, norm="ortho")
    return idctn(coeffs / _dct_symbol(grid.cells, grid.h), type=2, norm="ortho")


def _solve_cg(rhs: np.ndarray, grid: Grid, x0: np.ndarray | None, tol: float, maxiter: int):
    h = grid.h

    def apply(z):
        return z - laplacian_array(z, h)

    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0
    z = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - apply(z)
    p = r.copy()
    rr = float(np.vdot(r, r))
    it = 0
    while np.sqrt(rr) > tol * bnorm:
        if it >= maxiter:
            raise SolverError("CG did not converge", np.sqrt(rr) / bnorm, it)
        q = apply(p)
        alpha = rr / float(np.vdot(p, q))
        z += alpha * p
        r -= alpha * q
        rr_new = float(np.vdot(r, r))
        p *= rr_new / rr
        p += r
        rr = rr_new
        it += 1
    return z, it


def helmholtz_array(
    grid: Grid,
    rhs: np.ndarray,
    method: str | None = None,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    maxiter: int = 20000,
) -> np.ndarray:
    """Solve ``z - Delta_h z = rhs`` on raw arrays.

    ``method`` is one of ``"tridiagonal"`` (1D only), ``"cg"`` or ``"dct"``;
    ``None`` selects the tridiagonal solver in 1D and CG in 2D.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if method is None:
        method = "tridiagonal" if grid.dim == 1 else "cg"
    if method == "tridiagonal":
        if grid.dim != 1:
            raise ValueError("tridiagonal solver is 1D only")
        return _solve_tridiagonal(rhs, grid.h[0])
    if method == "dct":
        return _solve_dct(rhs, grid)
    if method == "cg":
        z, _ = _solve_cg(rhs, grid, x0, tol, maxiter)
        # a constant shift only moves the residual's mean, so this can only help
        z += np.mean(rhs) - np.mean(z)
        return z
    raise ValueError(f"unknown Helmholtz method {method!r}")


def helmholtz_solve(grid: Grid, rhs: Field | np.ndarray, method: str | None = None, **kw) -> Field:
    values = rhs.values if isinstance(rhs, Field) else rhs
    if not np.all(np.isfinite(values)):
        raise ValueError("right-hand side must be finite")
    return Field(grid, helmholtz_array(grid, values, method=method, **kw))


def cg_iterations(grid: Grid, rhs: np.ndarray, x0: np.ndarray | None = None, tol: float = 1e-10) -> int:
    """Number of CG iterations needed for ``rhs``; used for solver reports."""
    return _solve_cg(np.asarray(rhs, dtype=np.float64), grid, x0, tol, 10**6)[1]


# ---------------------------------------------------------------- export

def write_field_csv(x: Field, path: str | Path) -> None:
    names = ["x", "y"][: x.grid.dim]
    coords = [c.ravel() for c in x.grid.mesh()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "value"])
        for row in zip(*coords, x.values.ravel()):
            w.writerow([repr(float(c)) for c in row])


def write_snapshot(x: Field, t: float, path: str | Path) -> None:
    """Binary dump: dim, cells, extents, time, then float64 values row-major."""
    g = x.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", g.dim))
        fh.write(struct.pack(f"<{g.dim}i", *g.cells))
        fh.write(struct.pack(f"<{g.dim}d", *g.extent))
        fh.write(struct.pack("<d", float(t)))
        fh.write(np.ascontiguousarray(x.values, dtype="<f8").tobytes(order="C"))


def read_snapshot(path: str | Path) -> tuple[Field, float]:
    data = Path(path).read_bytes()
    (dim,) = struct.unpack_from("<i", data, 0)
    off = 4
    cells = struct.unpack_from(f"<{dim}i", data, off)
    off += 4 * dim
    extent = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(cells)
    return Field(Grid(extent, cells), values), t
