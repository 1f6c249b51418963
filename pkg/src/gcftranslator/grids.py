"""Uniform grids, scalar fields, and monotone finite-difference operators.

The grid is square-celled and symmetric about both axes whenever the
domain is, with the origin always landing exactly on a node. Nodes carry
one of three tags:

* ``INTERIOR``  - inside the domain, boundary_distance >= 2h,
* ``BAND``      - inside the domain, boundary_distance < 2h (Dirichlet
  data for the capped solves lives here),
* ``EXTERIOR``  - outside the open domain (boundary nodes included).

The degenerate Monge-Ampere operator is discretized with the classical
wide-stencil construction: over every pair of orthogonal integer
directions (e, e_perp) form the product of clamped second differences and
take the minimum over pairs,

    MA(u) = min_pairs  max(D_e u, floor) * max(D_perp u, floor),

which is degenerate elliptic (nondecreasing in every neighbor value) and
consistent with det D^2 u up to O(h^2) plus a directional-resolution
term. Directions whose stencil leaves the non-exterior node set are
dropped from the minimum ("truncated stencil").
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .domains import ConvexDomain

INTERIOR = 0
BAND = 1
EXTERIOR = 2

#: clamp floor for the monotone product
CLAMP_FLOOR = 1e-12


class TruncatedStencilError(ValueError):
    """A directional stencil reaches an exterior node or leaves the grid."""


class IsolatedNodeError(ValueError):
    """Every direction pair at a node is truncated."""


class ExteriorNodeError(ValueError):
    """Operator requested at an exterior node."""


# ---------------------------------------------------------------------- #
# grid and fields


@dataclass(eq=False)
class Grid:
    """Uniform square-celled grid with a domain-derived node mask."""

    xs: np.ndarray           # (nx,) node x coordinates
    ys: np.ndarray           # (ny,) node y coordinates
    h: float                 # spacing, equal in both axes
    mask: np.ndarray         # (nx, ny) int8 tags
    domain: ConvexDomain | None = None

    @classmethod
    def from_domain(cls, domain: ConvexDomain, n: int) -> "Grid":
        """Symmetric n-by-n grid covering the domain's bounding box.

        ``n`` must be odd (so that the origin is a node) and at least 17.
        """
        if n < 17:
            raise ValueError("grid size must be at least 17 nodes per axis")
        if n % 2 == 0:
            raise ValueError("grid size must be odd so that the origin is a node")
        xmin, xmax, ymin, ymax = domain.bbox
        half = max(abs(xmin), abs(xmax), abs(ymin), abs(ymax))
        k = (n - 1) // 2
        h = half / k
        idx = np.arange(n) - k
        xs = h * idx            # exactly antisymmetric, xs[k] == 0.0
        ys = h * idx
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        bdist = domain.boundary_distance(X, Y)
        mask = np.full((n, n), EXTERIOR, dtype=np.int8)
        inside = bdist > 0
        mask[inside & (bdist < 2.0 * h)] = BAND
        mask[inside & (bdist >= 2.0 * h)] = INTERIOR
        grid = cls(xs=xs, ys=ys, h=h, mask=mask, domain=domain)
        grid._enforce_neighbor_invariant()
        grid._bdist = bdist
        return grid

    def _enforce_neighbor_invariant(self):
        # interior nodes must have all four axis neighbors non-exterior;
        # demote offenders to the band (defensive, cannot trigger for
        # exact signed distances)
        m = self.mask
        interior = m == INTERIOR
        bad = np.zeros_like(interior)
        ext = m == EXTERIOR
        bad[1:, :] |= interior[1:, :] & ext[:-1, :]
        bad[:-1, :] |= interior[:-1, :] & ext[1:, :]
        bad[:, 1:] |= interior[:, 1:] & ext[:, :-1]
        bad[:, :-1] |= interior[:, :-1] & ext[:, 1:]
        m[bad] = BAND

    @property
    def nx(self) -> int:
        return len(self.xs)

    @property
    def ny(self) -> int:
        return len(self.ys)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def center_index(self) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.xs)))
        j = int(np.argmin(np.abs(self.ys)))
        return (i, j)

    @cached_property
    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @cached_property
    def boundary_distances(self) -> np.ndarray:
        if hasattr(self, "_bdist"):
            return self._bdist
        X, Y = self.meshes
        return self.domain.boundary_distance(X, Y)

    def node_xy(self, node) -> tuple[float, float]:
        i, j = node
        return float(self.xs[i]), float(self.ys[j])


@dataclass(eq=False)
class ScalarField:
    """Grid-sampled scalar function; exterior values are ignored by all ops."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")
        if not np.all(np.isfinite(self.values[self.grid.mask != EXTERIOR])):
            raise ValueError("field has non-finite values at non-exterior nodes")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample fn(x, y) at all nodes (exterior included, for test fields)."""
    X, Y = grid.meshes
    return ScalarField(grid, np.asarray(fn(X, Y), dtype=float))


# ---------------------------------------------------------------------- #
# stencils


def _canon(d):
    p, q = d
    return (p, q) if (p > 0 or (p == 0 and q > 0)) else (-p, -q)


@dataclass(frozen=True)
class StencilSet:
    """Integer directions with gcd 1, closed under negation and rotation."""

    width: int
    directions: tuple[tuple[int, int], ...]

    @classmethod
    def make(cls, width: int = 3) -> "StencilSet":
        if width < 1:
            raise ValueError("stencil width must be >= 1")
        dirs = []
        for p in range(-width, width + 1):
            for q in range(-width, width + 1):
                if (p, q) != (0, 0) and math.gcd(abs(p), abs(q)) == 1:
                    dirs.append((p, q))
        dirs.sort(key=lambda d: math.atan2(d[1], d[0]))
        return cls(width=width, directions=tuple(dirs))

    @cached_property
    def half_directions(self) -> tuple[tuple[int, int], ...]:
        """One representative per +-d, ordered by angle in [0, pi)."""
        return tuple(d for d in self.directions if d == _canon(d))

    @cached_property
    def orthogonal_pairs(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        """Unordered orthogonal pairs {e, rot90(e)}, canonical signs, sorted."""
        seen = {}
        for e in self.half_directions:
            f = _canon((-e[1], e[0]))
            key = frozenset((e, f))
            if key not in seen:
                seen[key] = tuple(sorted((e, f)))
        return tuple(sorted(seen.values()))


# ---------------------------------------------------------------------- #
# pointwise operators


def _check_node(field: ScalarField, node):
    i, j = node
    if field.grid.mask[i, j] == EXTERIOR:
        raise ExteriorNodeError(f"node {node} is exterior")


def _axis_derivative(field: ScalarField, node, axis: int) -> float:
    """Second-order first derivative along one axis; one-sided at the band."""
    grid, v = field.grid, field.values
    i, j = node
    h = grid.h
    m = grid.mask

    def ok(ii, jj):
        return 0 <= ii < grid.nx and 0 <= jj < grid.ny and m[ii, jj] != EXTERIOR

    di, dj = (1, 0) if axis == 0 else (0, 1)
    if ok(i + di, j + dj) and ok(i - di, j - dj):
        return (v[i + di, j + dj] - v[i - di, j - dj]) / (2.0 * h)
    if ok(i + di, j + dj) and ok(i + 2 * di, j + 2 * dj):
        return (-3.0 * v[i, j] + 4.0 * v[i + di, j + dj] - v[i + 2 * di, j + 2 * dj]) / (2.0 * h)
    if ok(i - di, j - dj) and ok(i - 2 * di, j - 2 * dj):
        return (3.0 * v[i, j] - 4.0 * v[i - di, j - dj] + v[i - 2 * di, j - 2 * dj]) / (2.0 * h)
    raise TruncatedStencilError(f"no second-order stencil for axis {axis} at {node}")


def gradient(field: ScalarField, node) -> tuple[float, float]:
    """Du at a node: centered where possible, one-sided second order at the band."""
    _check_node(field, node)
    return (_axis_derivative(field, node, 0), _axis_derivative(field, node, 1))


def hessian(field: ScalarField, node) -> tuple[float, float, float]:
    """(u_xx, u_xy, u_yy) at an interior node by centered differences."""
    _check_node(field, node)
    grid, v = field.grid, field.values
    i, j = node
    h2 = grid.h ** 2
    m = grid.mask

    def ok(ii, jj):
        return 0 <= ii < grid.nx and 0 <= jj < grid.ny and m[ii, jj] != EXTERIOR

    if not (ok(i + 1, j) and ok(i - 1, j) and ok(i, j + 1) and ok(i, j - 1)
            and ok(i + 1, j + 1) and ok(i - 1, j - 1) and ok(i + 1, j - 1) and ok(i - 1, j + 1)):
        raise TruncatedStencilError(f"centered Hessian stencil truncated at {node}")
    uxx = (v[i + 1, j] - 2.0 * v[i, j] + v[i - 1, j]) / h2
    uyy = (v[i, j + 1] - 2.0 * v[i, j] + v[i, j - 1]) / h2
    uxy = (v[i + 1, j + 1] + v[i - 1, j - 1] - v[i + 1, j - 1] - v[i - 1, j + 1]) / (4.0 * h2)
    return (uxx, uxy, uyy)


def directional_second_difference(field: ScalarField, node, direction) -> float:
    """Second difference along an integer direction, normalized to unit length.

    (u(x + e) - 2 u(x) + u(x - e)) / |e|^2 with e = direction * h. Raises
    TruncatedStencilError when either endpoint is exterior or off-grid.
    """
    _check_node(field, node)
    grid, v = field.grid, field.values
    i, j = node
    p, q = direction
    m = grid.mask
    for ii, jj in ((i + p, j + q), (i - p, j - q)):
        if not (0 <= ii < grid.nx and 0 <= jj < grid.ny) or m[ii, jj] == EXTERIOR:
            raise TruncatedStencilError(f"direction {direction} truncated at {node}")
    len2 = (p * p + q * q) * grid.h ** 2
    return (v[i + p, j + q] - 2.0 * v[i, j] + v[i - p, j - q]) / len2


def monotone_ma(field: ScalarField, node, stencils: StencilSet) -> float:
    """Monotone wide-stencil Monge-Ampere operator at a node.

    Minimum over orthogonal direction pairs of the product of clamped
    second differences; truncated pairs are dropped. Raises
    IsolatedNodeError if every pair is truncated.
    """
    _check_node(field, node)
    best = None
    for a, b in stencils.orthogonal_pairs:
        try:
            da = directional_second_difference(field, node, a)
            db = directional_second_difference(field, node, b)
        except TruncatedStencilError:
            continue
        prod = max(da, CLAMP_FLOOR) * max(db, CLAMP_FLOOR)
        if best is None or prod < best:
            best = prod
    if best is None:
        raise IsolatedNodeError(f"all direction pairs truncated at {node}")
    return best


# ---------------------------------------------------------------------- #
# vectorized operators (used by the solver and the verification harness)


def gradient_field(field: ScalarField):
    """(ux, uy) arrays by centered differences; nan where not available.

    Valid at every interior node (axis neighbors of interior nodes are
    never exterior) and at band nodes whose axis neighbors exist.
    """
    grid, v = field.grid, field.values
    h = grid.h
    ok = grid.mask != EXTERIOR
    ux = np.full(grid.shape, np.nan)
    uy = np.full(grid.shape, np.nan)
    okx = np.zeros_like(ok)
    okx[1:-1, :] = ok[2:, :] & ok[:-2, :]
    oky = np.zeros_like(ok)
    oky[:, 1:-1] = ok[:, 2:] & ok[:, :-2]
    cx = np.zeros(grid.shape)
    cx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * h)
    cy = np.zeros(grid.shape)
    cy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
    ux[okx & ok] = cx[okx & ok]
    uy[oky & ok] = cy[oky & ok]
    return ux, uy


def hessian_field(field: ScalarField):
    """(uxx, uxy, uyy) arrays by centered differences; nan where truncated."""
    grid, v = field.grid, field.values
    h2 = grid.h ** 2
    ok = grid.mask != EXTERIOR
    full = np.zeros_like(ok)
    full[1:-1, 1:-1] = (ok[2:, 1:-1] & ok[:-2, 1:-1] & ok[1:-1, 2:] & ok[1:-1, :-2]
                        & ok[2:, 2:] & ok[:-2, :-2] & ok[2:, :-2] & ok[:-2, 2:]
                        & ok[1:-1, 1:-1])
    uxx = np.full(grid.shape, np.nan)
    uyy = np.full(grid.shape, np.nan)
    uxy = np.full(grid.shape, np.nan)
    t = np.zeros(grid.shape)
    t[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) / h2
    uxx[full] = t[full]
    t = np.zeros(grid.shape)
    t[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / h2
    uyy[full] = t[full]
    t = np.zeros(grid.shape)
    t[1:-1, 1:-1] = (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:]) / (4.0 * h2)
    uxy[full] = t[full]
    return uxx, uxy, uyy


def second_differences_field(field: ScalarField, stencils: StencilSet):
    """Dict direction -> (delta array, valid array) for all half directions."""
    grid, v = field.grid, field.values
    out = {}
    ok = grid.mask != EXTERIOR
    nx, ny = grid.shape
    for d in stencils.half_directions:
        p, q = d
        delta = np.full(grid.shape, np.nan)
        valid = np.zeros(grid.shape, dtype=bool)
        i0, i1 = abs(p), nx - abs(p)
        j0, j1 = abs(q), ny - abs(q)
        if i0 >= i1 or j0 >= j1:
            out[d] = (delta, valid)
            continue
        c = np.s_[i0:i1, j0:j1]
        plus = np.s_[i0 + p:i1 + p, j0 + q:j1 + q]
        minus = np.s_[i0 - p:i1 - p, j0 - q:j1 - q]
        vv = ok[c] & ok[plus] & ok[minus]
        len2 = (p * p + q * q) * grid.h ** 2
        dd = (v[plus] - 2.0 * v[c] + v[minus]) / len2
        delta[c] = np.where(vv, dd, np.nan)
        valid[c] = vv
        out[d] = (delta, valid)
    return out


def monotone_ma_field(field: ScalarField, stencils: StencilSet):
    """Vectorized monotone operator; returns (value, argmin-pair-index) arrays.

    Value is nan where no pair is available.
    """
    diffs = second_differences_field(field, stencils)
    pairs = stencils.orthogonal_pairs
    prods = np.full((len(pairs),) + field.grid.shape, np.inf)
    for k, (a, b) in enumerate(pairs):
        da, va = diffs[_canon(a)]
        db, vb = diffs[_canon(b)]
        both = va & vb
        pk = np.maximum(da, CLAMP_FLOOR) * np.maximum(db, CLAMP_FLOOR)
        prods[k][both] = pk[both]
    kstar = np.argmin(prods, axis=0)
    value = np.min(prods, axis=0)
    value = np.where(np.isfinite(value), value, np.nan)
    return value, kstar


# ---------------------------------------------------------------------- #
# CSV export / import


def write_field_csv(field: ScalarField, path, extras: dict | None = None):
    """Write non-exterior nodes as x,y,value[,extra...] rows, row-major.

    Floats are written with 17 significant digits, which round-trips IEEE
    doubles exactly.
    """
    grid = field.grid
    names = list(extras.keys()) if extras else []
    cols = [extras[k] for k in names] if extras else []
    with open(path, "w") as fh:
        fh.write(",".join(["x", "y", "value"] + names) + "\n")
        for i in range(grid.nx):
            for j in range(grid.ny):
                if grid.mask[i, j] == EXTERIOR:
                    continue
                row = [grid.xs[i], grid.ys[j], field.values[i, j]]
                row += [c[i, j] for c in cols]
                fh.write(",".join(format(val, ".17g") for val in row) + "\n")


def read_field_csv(grid: Grid, path) -> ScalarField:
    """Rebuild a field over a known grid from its CSV export."""
    values = np.zeros(grid.shape)
    xloc = {format(x, ".17g"): i for i, x in enumerate(grid.xs)}
    yloc = {format(y, ".17g"): j for j, y in enumerate(grid.ys)}
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("x,y,value"):
            raise ValueError("not a field CSV")
        for line in fh:
            parts = line.strip().split(",")
            x, y, val = float(parts[0]), float(parts[1]), float(parts[2])
            i = xloc.get(format(x, ".17g"), None)
            j = yloc.get(format(y, ".17g"), None)
            if i is None or j is None:
                raise ValueError("CSV node does not lie on the grid")
            values[i, j] = val
    return ScalarField(grid, values)
