"""Capped continuation solver for the graph translator equation.

The target problem on a bounded open convex domain is

    det D^2 u / (1 + |Du|^2)^{3/2} = 2 pi / area,    |Du| -> infinity on
    the boundary,

whose solution is unique up to an additive constant and is normalized
here by u(0,0) = 0. The right-hand constant is exactly critical: by the
gradient-map change of variables, a solution with finite boundary data
would need a gradient image of full measure 2 pi, which forces the
boundary blow-up. Pinning the boundary band at a finite cap therefore
yields a discrete system with no solution at any depth; the natural
flow sinks forever while the interior flattens (this is observable, not
hypothetical).

What a finite grid can represent is the translator truncated near the
boundary. For each cap value M the solver pins u = M on the boundary
band together with a collar plateau of interior nodes within thickness
t of the boundary, and solves the equation on the remaining bowl. The
shrunken region sees the same constant 2 pi / area, now subcritical for
it, so the reduced Dirichlet problem is genuinely solvable and Newton
converges to machine residuals. Because the equation is local and the
constant unchanged, the bowl is the translator itself, truncated; on a
disk the radial closed form is reproduced to discretization error.

The cap continuation retreats the collar one grid ring per cap while
the reduced solves keep converging. When a retreat attempt fails, the
grid's representability frontier has been reached: the collar freezes
and further caps shift the whole field by exactly the cap increment
(translation invariance of the operator). Normalized interior deltas
between consecutive caps therefore stabilize precisely when the grid is
exhausted, which is the continuation's convergence declaration. Per-cap
raw fields are kept: probe values inside the frozen collar track the
cap upward without bound, the discrete signature of pointwise boundary
divergence, while normalized values below the collar stabilize.

Each reduced problem is solved by damped Newton on the monotone
wide-stencil discretization, with explicit relaxation (the graph Gauss
curvature flow) as warmup and stall fallback.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad

from .domains import ConvexDomain
from .grids import (BAND, CLAMP_FLOOR, EXTERIOR, INTERIOR, Grid, ScalarField,
                    StencilSet)

DEFAULT_CAPS = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0)

#: continuation deltas are measured on the sub-domain with this margin
INTERIOR_MARGIN = 0.1

#: damping floor for the Newton line search
DAMPING_FLOOR = 1.0 / 64.0

#: collar thickness floor, in units of h (the band itself spans 2h)
COLLAR_FLOOR = 2.0

#: starting collar thicknesses tried on grids solved from scratch, in h
COLLAR_START_LADDER = (8.0, 12.0, 16.0, 24.0)


class BlowupRadiusError(ValueError):
    """Radial profile requested at or beyond the blow-up radius."""


@dataclass
class SolverConfig:
    """Knobs for the continuation and the per-cap nonlinear solves."""

    cap_sequence: tuple = DEFAULT_CAPS
    scheme: str = "newton"               # "newton" or "parabolic_relaxation"
    residual_tol: float = 1e-8
    interior_delta_tol: float = 1e-4
    max_newton_iters: int = 200
    damping: float = 1.0
    time_step_safety: float = 0.4
    stencil_width: int = 3
    run_all_caps: bool = False           # disable the early continuation stop
    keep_cap_fields: bool = True
    coarse_init: bool = True             # cascade the first cap up from a coarser grid
    verbose: bool = False

    def __post_init__(self):
        caps = tuple(float(m) for m in self.cap_sequence)
        if not caps or any(m <= 0 for m in caps):
            raise ValueError("cap sequence must be positive")
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError("cap sequence must be strictly increasing")
        object.__setattr__(self, "cap_sequence", caps)
        if self.scheme not in ("newton", "parabolic_relaxation"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if min(self.residual_tol, self.interior_delta_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolverResult:
    """Solved field (normalized to vanish at the origin) plus diagnostics."""

    u: ScalarField
    converged: bool
    final_residual: float
    caps_used: list
    iterations_per_cap: list
    interior_delta_history: list
    cap_fields: list                     # (cap, raw values array) pairs
    rhs_constant: float
    convexity_min: float
    convexity_flagged: bool
    stencils: StencilSet
    collar_mask: np.ndarray | None = None   # pinned collar of the final solve
    collar_thickness: float = 0.0


# ---------------------------------------------------------------------- #
# vectorized residual / Jacobian machinery


class _Stage:
    """Precomputed masks and index maps for one reduced problem.

    ``pinned`` marks interior nodes held at the cap value (the collar);
    they join the boundary band as Dirichlet data, shrinking the set of
    unknowns to the bowl.
    """

    def __init__(self, grid: Grid, stencils: StencilSet, rhs: float,
                 pinned: np.ndarray | None = None):
        self.grid = grid
        self.stencils = stencils
        self.rhs = rhs
        self.h = grid.h
        interior = grid.mask == INTERIOR
        if pinned is None:
            pinned = np.zeros(grid.shape, dtype=bool)
        self.pde = interior & ~pinned             # unknown nodes
        self.fixed = (grid.mask == BAND) | (interior & pinned)
        ok = grid.mask != EXTERIOR
        self.n_unknown = int(self.pde.sum())
        if self.n_unknown == 0:
            raise ValueError("reduced problem has no unknown nodes")
        self.index = -np.ones(grid.shape, dtype=np.int64)
        self.index[self.pde] = np.arange(self.n_unknown)

        # per half-direction validity: both arms stay on non-exterior nodes
        nx, ny = grid.shape
        self.dir_valid = {}
        for d in stencils.half_directions:
            p, q = d
            valid = np.zeros(grid.shape, dtype=bool)
            i0, i1 = abs(p), nx - abs(p)
            j0, j1 = abs(q), ny - abs(q)
            if i0 < i1 and j0 < j1:
                c = np.s_[i0:i1, j0:j1]
                plus = np.s_[i0 + p:i1 + p, j0 + q:j1 + q]
                minus = np.s_[i0 - p:i1 - p, j0 - q:j1 - q]
                valid[c] = ok[plus] & ok[minus]
            self.dir_valid[d] = valid & self.pde
        self.pairs = stencils.orthogonal_pairs
        self.pair_valid = np.stack(
            [self.dir_valid[a] & self.dir_valid[b] for a, b in self.pairs])
        if not np.all(self.pair_valid.any(axis=0)[self.pde]):
            raise ValueError("isolated node: all direction pairs truncated")

    def _second_diffs(self, u: np.ndarray) -> dict:
        grid = self.grid
        nx, ny = grid.shape
        out = {}
        for d in self.stencils.half_directions:
            p, q = d
            dd = np.zeros(grid.shape)
            i0, i1 = abs(p), nx - abs(p)
            j0, j1 = abs(q), ny - abs(q)
            if i0 < i1 and j0 < j1:
                c = np.s_[i0:i1, j0:j1]
                plus = np.s_[i0 + p:i1 + p, j0 + q:j1 + q]
                minus = np.s_[i0 - p:i1 - p, j0 - q:j1 - q]
                len2 = (p * p + q * q) * self.h ** 2
                dd[c] = (u[plus] - 2.0 * u[c] + u[minus]) / len2
            out[d] = dd
        return out

    def _grad(self, u: np.ndarray):
        h = self.h
        ux = np.zeros(u.shape)
        uy = np.zeros(u.shape)
        ux[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * h)
        uy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * h)
        return ux, uy

    def residual(self, u: np.ndarray):
        """Normalized residual P/S - rhs at unknown nodes (0 elsewhere).

        Returns (R, aux) where aux carries the pieces the Jacobian needs.
        """
        diffs = self._second_diffs(u)
        ux, uy = self._grad(u)
        wsq = 1.0 + ux * ux + uy * uy
        S = wsq ** 1.5
        nprod = np.full((len(self.pairs),) + u.shape, np.inf)
        for k, (a, b) in enumerate(self.pairs):
            ma = np.maximum(diffs[a], CLAMP_FLOOR)
            mb = np.maximum(diffs[b], CLAMP_FLOOR)
            pk = ma * mb
            nprod[k][self.pair_valid[k]] = pk[self.pair_valid[k]]
        kstar = np.argmin(nprod, axis=0)
        P = np.take_along_axis(nprod, kstar[None], axis=0)[0]
        P = np.where(self.pde, P, 0.0)
        R = np.where(self.pde, P / S - self.rhs, 0.0)
        aux = {"diffs": diffs, "ux": ux, "uy": uy, "wsq": wsq, "S": S,
               "P": P, "kstar": kstar}
        return R, aux

    def jacobian(self, aux) -> sp.csr_matrix:
        """Sparse derivative of the residual, active pair and clamps frozen."""
        grid = self.grid
        h = self.h
        idx = self.index
        diffs, kstar = aux["diffs"], aux["kstar"]
        S, P = aux["S"], aux["P"]
        ux, uy, wsq = aux["ux"], aux["uy"], aux["wsq"]
        rows, cols, vals = [], [], []
        nodes_i, nodes_j = np.nonzero(self.pde)
        rowid = idx[nodes_i, nodes_j]
        nx, ny = grid.shape

        def add(ii, jj, coef, sel):
            inside = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            use = sel & inside
            col = np.full(ii.shape, -1, dtype=np.int64)
            col[use] = idx[ii[use], jj[use]]
            use &= col >= 0
            rows.append(rowid[use])
            cols.append(col[use])
            vals.append(coef[use])

        # Monge-Ampere part: for the frozen argmin pair (a, b),
        # d(ma*mb)/du = [da > floor] * mb * dd_a/du + symmetric term
        ks = kstar[nodes_i, nodes_j]
        Sv = S[nodes_i, nodes_j]
        diag = np.zeros(len(rowid))
        for k, (a, b) in enumerate(self.pairs):
            sel = ks == k
            if not np.any(sel):
                continue
            for e, other in ((a, b), (b, a)):
                p, q = e
                de = diffs[e][nodes_i, nodes_j]
                mo = np.maximum(diffs[other][nodes_i, nodes_j], CLAMP_FLOOR)
                act = sel & (de > CLAMP_FLOOR)
                len2 = (p * p + q * q) * h ** 2
                coef = np.where(act, mo / (len2 * Sv), 0.0)
                add(nodes_i + p, nodes_j + q, coef, act)
                add(nodes_i - p, nodes_j - q, coef, act)
                diag[act] += -2.0 * coef[act]

        # gradient part: d(P/S)/dDu = -3 P (ux dux + uy duy) / wsq^{5/2}
        g = -3.0 * P[nodes_i, nodes_j] / (wsq[nodes_i, nodes_j] ** 2.5)
        cx = g * ux[nodes_i, nodes_j] / (2.0 * h)
        cy = g * uy[nodes_i, nodes_j] / (2.0 * h)
        every = np.ones(len(rowid), dtype=bool)
        add(nodes_i + 1, nodes_j, cx, every)
        add(nodes_i - 1, nodes_j, -cx, every)
        add(nodes_i, nodes_j + 1, cy, every)
        add(nodes_i, nodes_j - 1, -cy, every)

        rows.append(rowid)
        cols.append(rowid)
        vals.append(diag)
        J = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_unknown, self.n_unknown)).tocsr()
        # tiny diagonal shift guards against exactly singular rows where
        # every direction clamps
        reg = 1e-13 * max(1.0, abs(J.diagonal()).max())
        return J + reg * sp.eye(self.n_unknown, format="csr")

    def step_bound(self, aux) -> float:
        """Explicit-relaxation stable step from a diagonal Lipschitz bound."""
        diffs, kstar = aux["diffs"], aux["kstar"]
        S, P, wsq = aux["S"], aux["P"], aux["wsq"]
        ux, uy = aux["ux"], aux["uy"]
        L = np.zeros(self.grid.shape)
        for k, (a, b) in enumerate(self.pairs):
            sel = (kstar == k) & self.pde
            if not np.any(sel):
                continue
            ma = np.maximum(diffs[a], CLAMP_FLOOR)
            mb = np.maximum(diffs[b], CLAMP_FLOOR)
            la = (a[0] ** 2 + a[1] ** 2) * self.h ** 2
            lb = (b[0] ** 2 + b[1] ** 2) * self.h ** 2
            L[sel] = (2.0 * (mb[sel] / la + ma[sel] / lb)) / S[sel]
        L += 3.0 * np.abs(P) * (np.abs(ux) + np.abs(uy)) / (wsq ** 2.5 * self.h)
        lmax = L[self.pde].max()
        # cap by the grid scale: in heavily clamped states the Lipschitz
        # bound collapses and would otherwise allow runaway steps
        return min(1.0 / lmax if lmax > 0 else self.h, self.h)

    def convexity_min(self, u: np.ndarray) -> float:
        """Smallest directional second difference over valid stencil arms."""
        diffs = self._second_diffs(u)
        cmin = np.inf
        for d, dd in diffs.items():
            sel = self.dir_valid[d]
            if np.any(sel):
                cmin = min(cmin, float(dd[sel].min()))
        return cmin


def _log(cfg, msg):
    if cfg.verbose:
        print(msg, file=sys.stdout)


def _relax(stage: _Stage, cfg: SolverConfig, u, R, aux, rmax,
           stop_ratio: float, max_steps: int, cap, label="", stop_abs=0.0):
    """Explicit relaxation u += dt*R until the residual drops far enough."""
    goal = max(stop_ratio * rmax, stop_abs, cfg.residual_tol)
    steps = 0
    while steps < max_steps and rmax > goal:
        dt = cfg.time_step_safety * stage.step_bound(aux)
        u[stage.pde] += dt * R[stage.pde]
        steps += 1
        R, aux = stage.residual(u)
        rmax = float(np.abs(R[stage.pde]).max())
    if steps:
        _log(cfg, f"cap={cap:g} relax{label} steps={steps} residual={rmax:.3e}")
    return u, R, aux, rmax, steps


def _solve_one_cap(stage: _Stage, cfg: SolverConfig, u0: np.ndarray, cap: float):
    """Solve one reduced Dirichlet problem; returns (u, iters, residual, ok).

    ``ok`` is False either on a residual stall or on the runaway
    signature of an infeasible reduction (the bowl sinking without the
    residual coming down), which the continuation reads as the collar
    frontier.
    """
    u = u0.copy()
    u[stage.fixed] = cap
    # aim below the contract tolerance when cheap; extra Newton steps are
    # nearly free and tighten the discrete convexity margins
    target = min(cfg.residual_tol, 1e-11)
    iters = 0

    def norms(R):
        r = R[stage.pde]
        return float(np.abs(r).max()), float(np.sqrt(np.mean(r * r)))

    R, aux = stage.residual(u)
    rmax, rtwo = norms(R)
    # runaway bookkeeping: depth of the bowl at the last real residual
    # improvement; legitimate deepening keeps improving the residual
    rbest = rmax
    floor_at_best = float(u[stage.pde].min())
    if cfg.scheme == "parabolic_relaxation":
        u, R, aux, rmax, steps = _relax(
            stage, cfg, u, R, aux, rmax, stop_ratio=0.0,
            max_steps=max(20000, 100 * cfg.max_newton_iters), cap=cap)
        return u, steps, rmax, rmax <= cfg.residual_tol

    # a cold start far from the convex basin wastes Newton attempts;
    # relax the worst of it away first
    if rmax > 20.0 * stage.rhs:
        u, R, aux, rmax, _ = _relax(stage, cfg, u, R, aux, rmax, stop_ratio=0.0,
                                    max_steps=4000, cap=cap, label="-warmup",
                                    stop_abs=2.0 * stage.rhs)
        rtwo = norms(R)[1]

    relax_budget = 6000
    stall_cycles = 0
    while iters < cfg.max_newton_iters and rmax > target:
        J = stage.jacobian(aux)
        try:
            delta = spla.spsolve(J, -R[stage.pde])
        except Exception:
            delta = None
        accepted = False
        if delta is not None and np.all(np.isfinite(delta)):
            # the line search works on the rms residual; steps that
            # overshoot into concave territory are rejected, but a crease
            # already present (a freshly unpinned collar ring) only has to
            # not get worse
            cmin_cur = stage.convexity_min(u)
            guard = min(-1e-6, 1.05 * cmin_cur)
            t = cfg.damping
            while t >= DAMPING_FLOOR:
                utry = u.copy()
                utry[stage.pde] += t * delta
                Rtry, auxtry = stage.residual(utry)
                mtry, ttry = norms(Rtry)
                if ttry < rtwo and stage.convexity_min(utry) > guard:
                    u, R, aux = utry, Rtry, auxtry
                    rmax, rtwo = mtry, ttry
                    accepted = True
                    _log(cfg, f"cap={cap:g} iter={iters} residual={rmax:.3e} damping={t:g}")
                    break
                t *= 0.5
        iters += 1
        # runaway signature: the bowl keeps sinking while the residual
        # stagnates; the reduction is infeasible
        if rmax < 0.8 * rbest:
            rbest = rmax
            floor_at_best = float(u[stage.pde].min())
        sink = floor_at_best - float(u[stage.pde].min())
        if sink > 1.0 and rmax > 0.1 * stage.rhs:
            _log(cfg, f"cap={cap:g} runaway after {iters} iters "
                      f"(sink={sink:.2f}, residual={rmax:.3e})")
            return u, iters, rmax, False
        if accepted:
            continue
        # Newton stalled at the damping floor: relax toward the convex
        # basin, then try again
        stall_cycles += 1
        if stall_cycles > 8 or relax_budget <= 0:
            break
        u, R, aux, rmax, used = _relax(stage, cfg, u, R, aux, rmax,
                                       stop_ratio=0.5,
                                       max_steps=min(600, relax_budget),
                                       cap=cap)
        relax_budget -= used
        if used == 0:
            break
        rtwo = norms(R)[1]
    ok = rmax <= cfg.residual_tol
    return u, iters, rmax, ok


# ---------------------------------------------------------------------- #
# collar bookkeeping and initial states


def _collar_mask(grid: Grid, t: float) -> np.ndarray:
    """Interior nodes within boundary distance t, pinned at the cap."""
    return (grid.mask == INTERIOR) & (grid.boundary_distances < t)


def _stage_for(grid: Grid, stencils: StencilSet, rhs: float,
               t: float) -> _Stage:
    return _Stage(grid, stencils, rhs, pinned=_collar_mask(grid, t))


def _gauge_init(domain: ConvexDomain, grid: Grid, cap: float) -> np.ndarray:
    """Shallow convex bowl hanging just below the cap value.

    The natural depth must be approached from the shallow side: started
    too deep, the ring against the pinned collar detaches and sinks (the
    same mechanism that makes the unreduced problem insoluble), while
    from above the ring holds onto the collar and the interior descends
    gently to the equilibrium profile.
    """
    X, Y = grid.meshes
    g = np.clip(domain.gauge(X, Y), 0.0, 1.0)
    depth = min(cap, 0.2)
    u0 = cap - depth * (1.0 - g ** 2)
    u0[grid.mask == EXTERIOR] = 0.0
    return u0


def _first_feasible(domain: ConvexDomain, grid: Grid, cfg: SolverConfig,
                    stencils: StencilSet, rhs: float, cap: float,
                    thicknesses, u0: np.ndarray | None):
    """First solvable collar from a ladder of thicknesses.

    Returns (u, t, iters). Raises if every candidate fails, which on a
    sane grid means the ladder started absurdly thin.
    """
    init = u0 if u0 is not None else _gauge_init(domain, grid, cap)
    last_err = None
    for t in thicknesses:
        t = max(t, COLLAR_FLOOR * grid.h)
        try:
            stage = _stage_for(grid, stencils, rhs, t)
        except ValueError as err:
            last_err = err
            continue
        u, iters, rmax, ok = _solve_one_cap(stage, cfg, init, cap)
        if ok:
            return u, t, iters
        _log(cfg, f"collar t={t / grid.h:.1f}h infeasible "
                  f"(residual {rmax:.3e}); thickening")
        last_err = RuntimeError(f"residual {rmax:.3e} at collar {t:g}")
    raise RuntimeError(f"no feasible starting collar: {last_err}")


def _cascade_init(domain: ConvexDomain, grid: Grid, cfg: SolverConfig,
                  cap: float, rhs: float):
    """First-cap initial state from a 2x coarser solve, or None.

    Returns (values, collar_thickness) interpolated onto ``grid``; the
    thickness is the coarse grid's feasible collar in physical units,
    a safe starting point one fine ring out.
    """
    from scipy.interpolate import RegularGridInterpolator

    nc = (grid.nx + 1) // 2
    if not cfg.coarse_init or grid.nx < 99 or nc % 2 == 0 or nc < 17:
        return None
    coarse = Grid.from_domain(domain, nc)
    stencils = StencilSet.make(cfg.stencil_width)
    sub = _cascade_init(domain, coarse, cfg, cap, rhs)
    if sub is None:
        u0c, ladder = None, [k * coarse.h for k in COLLAR_START_LADDER]
    else:
        u0c, t_sub = sub
        ladder = [t_sub + coarse.h, t_sub + 3 * coarse.h, t_sub + 6 * coarse.h]
    uc, t_c, _ = _first_feasible(domain, coarse, cfg, stencils, rhs, cap,
                                 ladder, u0c)
    vals = uc.copy()
    vals[coarse.mask == EXTERIOR] = cap
    interp = RegularGridInterpolator((coarse.xs, coarse.ys), vals,
                                     method="linear", bounds_error=False,
                                     fill_value=cap)
    X, Y = grid.meshes
    u = interp(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(grid.shape)
    u[grid.mask == EXTERIOR] = 0.0
    return u, t_c


def _start_state(domain: ConvexDomain, grid: Grid, cfg: SolverConfig,
                 stencils: StencilSet, rhs: float, cap: float):
    """Feasible (u, collar, iters) at the first cap."""
    h = grid.h
    casc = _cascade_init(domain, grid, cfg, cap, rhs)
    if casc is not None:
        u0, t_c = casc
        ladder = [t_c + h, t_c + 3 * h, t_c + 6 * h]
        return _first_feasible(domain, grid, cfg, stencils, rhs, cap,
                               ladder, u0)
    ladder = [k * h for k in COLLAR_START_LADDER]
    return _first_feasible(domain, grid, cfg, stencils, rhs, cap,
                           ladder, None)


# ---------------------------------------------------------------------- #
# public solves


def solve_capped(domain: ConvexDomain, grid: Grid, cap: float,
                 cfg: SolverConfig | None = None,
                 warm: np.ndarray | None = None):
    """Single capped solve with Dirichlet value ``cap`` on the band.

    Returns (field, iterations, residual, converged). With ``warm`` the
    collar is kept at the starting ladder's head and the warm field is
    trusted; exposed separately from the continuation for the data-shift
    invariance checks.
    """
    cfg = cfg or SolverConfig()
    rhs = 2.0 * math.pi / domain.area()
    stencils = StencilSet.make(cfg.stencil_width)
    if warm is not None:
        t = max(COLLAR_START_LADDER[0] * grid.h, COLLAR_FLOOR * grid.h)
        stage = _stage_for(grid, stencils, rhs, t)
        u, iters, rmax, ok = _solve_one_cap(stage, cfg, warm.copy(), cap)
        return ScalarField(grid, u), iters, rmax, ok
    u, t, iters = _start_state(domain, grid, cfg, stencils, rhs, cap)
    stage = _stage_for(grid, stencils, rhs, t)
    R, _ = stage.residual(u)
    rmax = float(np.abs(R[stage.pde]).max())
    return ScalarField(grid, u), iters, rmax, rmax <= cfg.residual_tol


def solve_translator(domain: ConvexDomain, grid: Grid,
                     cfg: SolverConfig | None = None) -> SolverResult:
    """Cap continuation for the translator over ``domain`` on ``grid``."""
    cfg = cfg or SolverConfig()
    area = domain.area()
    rhs = 2.0 * math.pi / area
    stencils = StencilSet.make(cfg.stencil_width)
    ci, cj = grid.center_index
    if grid.mask[ci, cj] != INTERIOR:
        raise ValueError("origin is not an interior grid node")
    h = grid.h
    bdist = grid.boundary_distances
    interior = grid.mask == INTERIOR
    outside = grid.mask == EXTERIOR
    watch = interior & (bdist >= INTERIOR_MARGIN)
    if not np.any(watch):
        watch = interior

    caps = cfg.cap_sequence
    u, t, iters0 = _start_state(domain, grid, cfg, stencils, rhs, caps[0])
    frontier = t <= COLLAR_FLOOR * h + 1e-12 * h

    caps_used = [caps[0]]
    iters_per_cap = [iters0]
    deltas, cap_fields = [], []
    if cfg.keep_cap_fields:
        cap_fields.append((caps[0], u.copy()))
    stage = _stage_for(grid, stencils, rhs, t)
    R, _ = stage.residual(u)
    final_residual = float(np.abs(R[stage.pde]).max())
    last_ok = final_residual <= cfg.residual_tol
    prev_norm = (u - u[ci, cj])[watch]

    for cap in caps[1:]:
        u = u + (cap - caps_used[-1])
        u[outside] = 0.0
        retreated = False
        if not frontier:
            t_try = max(COLLAR_FLOOR * h, t - h)
            stage_try = _stage_for(grid, stencils, rhs, t_try)
            u_try, iters, rmax, ok = _solve_one_cap(stage_try, cfg, u, cap)
            if ok:
                u, t = u_try, t_try
                stage = stage_try
                frontier = t <= COLLAR_FLOOR * h + 1e-12 * h
                retreated = True
            else:
                _log(cfg, f"collar frontier at t={t / h:.1f}h "
                          f"(retreat to {t_try / h:.1f}h failed)")
                frontier = True
        if not retreated:
            # at the frontier the shifted field already solves the
            # shifted problem; this re-solve is a cheap verification
            u, iters, rmax, ok = _solve_one_cap(stage, cfg, u, cap)
        caps_used.append(cap)
        iters_per_cap.append(iters)
        final_residual = rmax
        last_ok = ok
        u[outside] = 0.0
        if cfg.keep_cap_fields:
            cap_fields.append((cap, u.copy()))
        norm = (u - u[ci, cj])[watch]
        delta = float(np.abs(norm - prev_norm).max())
        deltas.append(delta)
        prev_norm = norm
        if not cfg.run_all_caps and delta <= cfg.interior_delta_tol and ok:
            break

    # discrete convexity audit of the accepted bowl (the pinned collar
    # meets the bowl in a crease that is not part of the solved set)
    cmin = stage.convexity_min(u)
    convexity_flagged = cmin < -1e-8

    values = u - u[ci, cj]
    values[outside] = 0.0
    result = SolverResult(
        u=ScalarField(grid, values),
        converged=last_ok and final_residual <= cfg.residual_tol
        and bool(deltas) and deltas[-1] <= cfg.interior_delta_tol,
        final_residual=final_residual,
        caps_used=caps_used,
        iterations_per_cap=iters_per_cap,
        interior_delta_history=deltas,
        cap_fields=cap_fields,
        rhs_constant=rhs,
        convexity_min=cmin,
        convexity_flagged=convexity_flagged,
        stencils=stencils,
        collar_mask=_collar_mask(grid, t),
        collar_thickness=t,
    )
    return result


# ---------------------------------------------------------------------- #
# radial closed form (independent oracle for the disk)


def radial_profile(R: float, r):
    """Slope u'(r) of the radial translator on a disk of radius R.

    One integration of the radial equation u'' u' / r = (2/R^2)
    (1+u'^2)^{3/2} with u'(0) = 0 gives (1+u'^2)^{-1/2} = 1 - r^2/R^2,
    hence u'(r) = sqrt((1 - r^2/R^2)^{-2} - 1), diverging as r -> R.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(arr >= R):
        raise BlowupRadiusError("radial profile defined for 0 <= r < R")
    w = 1.0 - (arr / R) ** 2
    out = np.sqrt(w ** -2 - 1.0)
    return out if arr.shape else float(out)


def radial_height(R: float, r: float) -> float:
    """u(r) - u(0) for the radial translator, by adaptive quadrature."""
    if r == 0:
        return 0.0
    val, _ = quad(lambda s: radial_profile(R, s), 0.0, r, limit=200)
    return val


def radial_heights(R: float, rs: np.ndarray) -> np.ndarray:
    """Cumulative radial heights for an array of radii (vectorized oracle)."""
    rs = np.asarray(rs, dtype=float)
    flat = rs.ravel()
    order = np.argsort(flat)
    sorted_r = flat[order]
    heights = np.zeros(len(flat))
    acc = 0.0
    prev = 0.0
    for pos, r in zip(order, sorted_r):
        if r > prev:
            seg, _ = quad(lambda s: radial_profile(R, s), prev, r, limit=200)
            acc += seg
            prev = r
        heights[pos] = acc
    return heights.reshape(rs.shape)


# ---------------------------------------------------------------------- #
# soliton identity residual


def soliton_residual(u: ScalarField, domain: ConvexDomain) -> np.ndarray:
    """Per-node residual of the soliton identity, normalized by the speed.

    The identity equates Gauss curvature with (2 pi / area) times the
    vertical normal component; the returned field is
    |K - c / sqrt(1+|Du|^2)| / c with c = 2 pi / area, computed from
    centered differences, nan where the stencil is unavailable.
    """
    from .grids import gradient_field, hessian_field

    ux, uy = gradient_field(u)
    uxx, uxy, uyy = hessian_field(u)
    c = 2.0 * math.pi / domain.area()
    wsq = 1.0 + ux * ux + uy * uy
    K = (uxx * uyy - uxy * uxy) / (wsq * wsq)
    res = np.abs(K - c / np.sqrt(wsq)) / c
    res[u.grid.mask != INTERIOR] = np.nan
    return res
