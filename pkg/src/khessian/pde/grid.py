"""Cartesian grids on a disk or square and finite-difference k-Hessian solvers (n = 2).

Unknowns live on interior nodes.  Second derivatives along grid lines use
Shortley-Weller stencils, whose arms end at the exact boundary crossing
(where u = 0).  The mixed derivative averages the one-sided quadrant
formulas whose nodes all carry values; with all four quadrants present this
is the usual centred 4-point stencil.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

INTERIOR, BOUNDARY, OUTSIDE = 1, 0, -1


class SolverError(RuntimeError):
    """Newton stagnation or unrecoverable loss of discrete admissibility."""


class Grid2D:
    """Uniform grid of spacing h covering ``disk(R)`` or ``square(side)``, centred at 0."""

    def __init__(self, shape: str, size: float = 1.0, h: float = 1.0 / 64):
        if shape not in ("disk", "square"):
            raise ValueError(f"unknown grid shape {shape!r}")
        if size <= 0 or h <= 0:
            raise ValueError("size and spacing must be positive")
        self.shape = shape
        self.size = float(size)
        self.h = float(h)
        if shape == "disk":
            half = int(np.floor(self.size / h + 1e-9)) + 1
            self.nx = self.ny = 2 * half + 1
            self.x = (np.arange(self.nx) - half) * h
        else:
            cells = self.size / h
            if abs(cells - round(cells)) > 1e-9:
                raise ValueError("square side must be a multiple of h")
            self.nx = self.ny = int(round(cells)) + 1
            self.x = np.arange(self.nx) * h - self.size / 2
        self.y = self.x.copy()
        self.X, self.Y = np.meshgrid(self.x, self.y)  # rows are y-lines
        self._classify()

    # -- geometry -----------------------------------------------------------------
    def _classify(self):
        h = self.h
        status = np.full(self.X.shape, OUTSIDE, dtype=int)
        if self.shape == "disk":
            gap = self.size - np.hypot(self.X, self.Y)
            status[gap > 1e-3 * h] = INTERIOR
            status[np.abs(gap) <= 1e-3 * h] = BOUNDARY
        else:
            status[:, :] = BOUNDARY
            status[1:-1, 1:-1] = INTERIOR
        self.status = status
        self.iy, self.ix = np.nonzero(status == INTERIOR)
        self.index = np.full(status.shape, -1, dtype=int)
        self.index[self.iy, self.ix] = np.arange(self.iy.size)

    @property
    def n_interior(self) -> int:
        return self.iy.size

    @property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the interior nodes."""
        return self.X[self.iy, self.ix], self.Y[self.iy, self.ix]

    @property
    def volume(self) -> float:
        return np.pi * self.size**2 if self.shape == "disk" else self.size**2

    @property
    def weights(self) -> np.ndarray:
        """Node-centred cell areas h^2 at interior nodes."""
        return np.full(self.n_interior, self.h**2)

    @property
    def discrete_volume(self) -> float:
        return self.n_interior * self.h**2

    @property
    def dropped_volume(self) -> float:
        """|Omega| minus the area covered by interior node cells (cut-cell remainder)."""
        return self.volume - self.discrete_volume

    @property
    def outside_theory(self) -> bool:
        """The square has corners; results there are not covered by the smooth-domain theory."""
        return self.shape == "square"

    def boundary_distance(self) -> np.ndarray:
        """Distance from each interior node to the boundary."""
        x, y = self.xy
        if self.shape == "disk":
            return self.size - np.hypot(x, y)
        half = self.size / 2
        return np.minimum(half - np.abs(x), half - np.abs(y))

    def integrate(self, g) -> float:
        return float(np.dot(self.weights, np.asarray(g, dtype=float)))

    def describe(self) -> str:
        return f"{self.shape}({self.size:g}), h={self.h:g}"

    def _arm(self, direction: str) -> np.ndarray:
        """Length of the stencil arm from each interior node in one axis direction."""
        h = self.h
        step = {"+x": (0, 1), "-x": (0, -1), "+y": (1, 0), "-y": (-1, 0)}[direction]
        ny_, nx_ = self.iy + step[0], self.ix + step[1]
        arm = np.full(self.n_interior, h)
        if self.shape == "disk":
            nb = self.status[ny_, nx_]
            cut = nb == OUTSIDE
            x, y = self.xy
            R = self.size
            if direction[1] == "x":
                along, across, sign = x, y, 1 if direction[0] == "+" else -1
            else:
                along, across, sign = y, x, 1 if direction[0] == "+" else -1
            reach = np.sqrt(np.maximum(R**2 - across**2, 0.0))
            dist = reach - sign * along
            arm[cut] = np.clip(dist[cut], 1e-12 * h, h)
        return arm

    # -- difference operators --------------------------------------------------------
    def _second_difference(self, axis: str) -> sp.csr_matrix:
        lo, hi = self._arm("-" + axis), self._arm("+" + axis)
        N = self.n_interior
        rows, cols, vals = [np.arange(N)], [np.arange(N)], [-2.0 / (lo * hi)]
        for sgn, arm, other in ((-1, lo, hi), (1, hi, lo)):
            dy, dx = (0, sgn) if axis == "x" else (sgn, 0)
            nbr = self.index[self.iy + dy, self.ix + dx]
            has = (nbr >= 0) & (arm == self.h)
            rows.append(np.flatnonzero(has))
            cols.append(nbr[has])
            vals.append((2.0 / (arm * (lo + hi)))[has])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))

    @cached_property
    def Dxx(self) -> sp.csr_matrix:
        return self._second_difference("x")

    @cached_property
    def Dyy(self) -> sp.csr_matrix:
        return self._second_difference("y")

    @cached_property
    def Dxy(self) -> sp.csr_matrix:
        N = self.n_interior
        h2 = self.h**2
        count = np.zeros(N)
        rows, cols, vals = [], [], []
        for sx in (1, -1):
            for sy in (1, -1):
                pts = [(0, sx), (sy, 0), (sy, sx)]
                ok = np.ones(N, dtype=bool)
                for dy, dx in pts:
                    ok &= self.status[self.iy + dy, self.ix + dx] != OUTSIDE
                count += ok
                sign = 1.0 / (sx * sy * h2)
                for (dy, dx), c in zip(pts + [(0, 0)], (-1.0, -1.0, 1.0, 1.0)):
                    nbr = self.index[self.iy + dy, self.ix + dx]
                    use = ok & (nbr >= 0)
                    rows.append(np.flatnonzero(use))
                    cols.append(nbr[use])
                    vals.append(np.full(use.sum(), c * sign))
        if np.any(count == 0):
            raise ValueError("grid too coarse: a node has no usable mixed-derivative quadrant")
        r = np.concatenate(rows)
        v = np.concatenate(vals) / count[r]
        return sp.csr_matrix((v, (r, np.concatenate(cols))), shape=(N, N))

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (self.Dxx + self.Dyy).tocsr()

    @cached_property
    def laplacian_lu(self):
        return splu(self.laplacian.tocsc())


def _values_on(grid: Grid2D, f) -> np.ndarray:
    """Interior values of a GridFunction, callable f(x, y), full/interior array, or scalar."""
    if isinstance(f, GridFunction):
        return f.interior
    if callable(f):
        x, y = grid.xy
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).astype(float)
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return np.full(grid.n_interior, float(f))
    if f.shape == grid.X.shape:
        return f[grid.iy, grid.ix].copy()
    if f.shape == (grid.n_interior,):
        return f.copy()
    raise ValueError(f"cannot interpret array of shape {f.shape} on this grid")


@dataclass
class GridFunction:
    """Node values on the full grid; zero on boundary and outside nodes."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.X.shape:
            raise ValueError("values must have the grid's shape")
        self.values[self.grid.status != INTERIOR] = 0.0

    @classmethod
    def from_interior(cls, grid: Grid2D, vec) -> "GridFunction":
        full = np.zeros(grid.X.shape)
        full[grid.iy, grid.ix] = vec
        return cls(grid, full)

    @classmethod
    def from_callable(cls, grid: Grid2D, fn) -> "GridFunction":
        return cls.from_interior(grid, _values_on(grid, fn))

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.iy, self.grid.ix]

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values)

    __rmul__ = __mul__

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def hessian(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Discrete (u_xx, u_xy, u_yy) at interior nodes."""
        v = self.interior
        g = self.grid
        return g.Dxx @ v, g.Dxy @ v, g.Dyy @ v

    def s_k(self, k: int) -> np.ndarray:
        a, c, b = self.hessian()
        return grid_s_k(a, b, c, k)

    def admissible(self, k: int) -> bool:
        a, c, b = self.hessian()
        return bool(_admissible(a, b, c, k).all())

    def save(self, path) -> None:
        """Plain-text matrix, one row per grid line, after a ``# shape h nx ny`` header."""
        g = self.grid
        header = f"{g.shape}({g.size:.17g}) {g.h:.17g} {g.nx} {g.ny}"
        np.savetxt(path, self.values, fmt="%.17g", header=header, comments="# ")

    @classmethod
    def load(cls, path) -> "GridFunction":
        first = Path(path).read_text().splitlines()[0]
        parts = first.lstrip("#").split()
        shape, size = parts[0].rstrip(")").split("(")
        grid = Grid2D(shape, float(size), float(parts[1]))
        if (grid.nx, grid.ny) != (int(parts[2]), int(parts[3])):
            raise ValueError("header dimensions do not match the reconstructed grid")
        return cls(grid, np.loadtxt(path, ndmin=2))


def grid_s_k(a, b, c, k: int) -> np.ndarray:
    """S_k of the 2x2 matrices [[a, c], [c, b]]."""
    if k == 1:
        return a + b
    if k == 2:
        return a * b - c * c
    raise ValueError("grid solvers support k in {1, 2}")


def _admissible(a, b, c, k: int) -> np.ndarray:
    ok = a + b > 0.0
    if k == 2:
        ok &= a * b - c * c > 0.0
    return ok


@dataclass
class NewtonInfo:
    iterations: int = 0
    halvings: int = 0
    restarts: int = 0
    residual: float = 0.0


def _newton_det(grid: Grid2D, f: np.ndarray, u: np.ndarray, tol: float, max_iter: int,
                max_step: float, info: NewtonInfo) -> np.ndarray:
    Dxx, Dyy, Dxy = grid.Dxx, grid.Dyy, grid.Dxy
    target = tol * max(np.max(f), 1e-300)
    for _ in range(max_iter):
        a, b, c = Dxx @ u, Dyy @ u, Dxy @ u
        F = a * b - c * c - f
        res = np.max(np.abs(F))
        info.residual = res
        if res <= target:
            if not _admissible(a, b, c, 2).all():
                raise SolverError("Newton converged to a discretely non-convex solution")
            return u
        J = sp.diags(b) @ Dxx + sp.diags(a) @ Dyy - 2.0 * sp.diags(c) @ Dxy
        du = splu(J.tocsc()).solve(-F)
        t = max_step
        norm0 = np.linalg.norm(F)
        # an inadmissible start (Poisson start near square corners) may only improve
        bad0 = np.count_nonzero(~_admissible(*(D @ u for D in (Dxx, Dyy, Dxy)), 2))
        for _half in range(31):
            trial = u + t * du
            a, b, c = Dxx @ trial, Dyy @ trial, Dxy @ trial
            bad = np.count_nonzero(~_admissible(a, b, c, 2))
            if bad <= bad0 and np.linalg.norm(a * b - c * c - f) < norm0:
                break
            t /= 2.0
            info.halvings += 1
        else:
            raise SolverError("Newton step cannot stay in the discrete Gamma_2 cone")
        u = trial
        info.iterations += 1
    raise SolverError(f"Newton stagnated: residual {info.residual:.3e} after {max_iter} iterations")


def _poisson_sweeps(grid: Grid2D, f: np.ndarray, u: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Fixed point Delta u = sqrt((u_xx - u_yy)^2 + 4 u_xy^2 + 4 f).

    Any fixed point has det = f and Delta u > 0, i.e. it is the discretely
    convex branch; used to reach the basin of Newton when the plain Poisson
    start is not convex (corners of a square).
    """
    lu = grid.laplacian_lu
    for _ in range(max_iter):
        a, b, c = grid.Dxx @ u, grid.Dyy @ u, grid.Dxy @ u
        new = lu.solve(np.sqrt((a - b) ** 2 + 4.0 * c * c + 4.0 * f))
        step = np.max(np.abs(new - u))
        u = new
        if step <= tol * max(np.max(np.abs(u)), 1e-300):
            break
    return u


def solve_grid(grid: Grid2D, k: int, f, warm_start: GridFunction | None = None, *,
               tol: float = 1e-10, max_iter: int = 50, info: NewtonInfo | None = None) -> GridFunction:
    """Solve S_k(D^2 u) = f on the grid with u = 0 on the boundary.

    k = 1 is one sparse solve with the Shortley-Weller Laplacian.  k = 2 is a
    damped Newton iteration for u_xx u_yy - u_xy^2 = f started from
    ``warm_start`` (if admissible) or from the Poisson solution of
    Delta u = 2 sqrt(f); steps are halved until the residual decreases without
    losing discrete admissibility.  On failure the start is improved by
    convex-branch Poisson sweeps and Newton is rerun with damped steps.
    """
    fv = _values_on(grid, f)
    if not np.all(np.isfinite(fv)) or np.any(fv < 0.0):
        raise ValueError("right-hand side must be finite and nonnegative")
    if k == 1:
        return GridFunction.from_interior(grid, grid.laplacian_lu.solve(fv))
    if k != 2:
        raise ValueError("grid solvers support k in {1, 2}")
    if np.any(fv <= 0.0):
        raise ValueError("k=2 grid solve needs a strictly positive right-hand side")
    info = info if info is not None else NewtonInfo()
    start = grid.laplacian_lu.solve(2.0 * np.sqrt(fv))
    if warm_start is not None and warm_start.admissible(2):
        u0 = warm_start.interior.copy()
    elif GridFunction.from_interior(grid, start).admissible(2):
        u0 = start
    else:
        u0 = _poisson_sweeps(grid, fv, start, 1e-4, 2000)
    try:
        u = _newton_det(grid, fv, u0, tol, max_iter, 1.0, info)
    except SolverError as exc:
        log.warning("Newton restart from convex-branch sweeps: %s", exc)
        info.restarts += 1
        start = _poisson_sweeps(grid, fv, start, 1e-6, 2000)
        u = _newton_det(grid, fv, start, tol, 4 * max_iter, 0.5, info)
    return GridFunction.from_interior(grid, u)


def grid_rayleigh_quotient(u: GridFunction, k: int) -> float:
    """R_k(u) with node-centred cell quadrature over interior nodes."""
    g = u.grid
    mag = np.abs(u.interior)
    num = g.integrate(mag * u.s_k(k))
    den = g.integrate(mag ** (k + 1))
    if den <= 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero function")
    return num / den
