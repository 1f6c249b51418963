"""Temporary diagnostic: is the pinned-band system feasible at fixed cap?

Long parabolic relaxation on a small disk grid, tracking residual and
bowl depth. If depth converges and residual drops toward zero the
Dirichlet scheme is fine and the earlier stall was a globalization
failure.
"""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from gcftranslator.domains import ConvexDomain
from gcftranslator.grids import Grid, StencilSet
from gcftranslator import solver as sv


def run(n, cap, max_steps, report_every=2000):
    dom = ConvexDomain.disk(1.0)
    grid = Grid.from_domain(dom, n)
    rhs = 2.0 * np.pi / dom.area()
    stage = sv._Stage(grid, StencilSet.make(3), rhs)
    cfg = sv.SolverConfig(stencil_width=3)
    u = sv._gauge_init(dom, grid, cap)
    u[stage.fixed] = cap
    ci, cj = grid.center_index
    R, aux = stage.residual(u)
    t0 = time.time()
    hist = []
    for k in range(max_steps):
        dt = 0.4 * stage.step_bound(aux)
        u[stage.pde] += dt * R[stage.pde]
        R, aux = stage.residual(u)
        if k % report_every == 0 or k == max_steps - 1:
            rmax = float(np.abs(R[stage.pde]).max())
            depth = cap - u[ci, cj]
            cmin = stage.convexity_min(u)
            hist.append((k, rmax, depth))
            print(f"n={n} step={k:6d} dt={dt:.4f} rmax={rmax:.6e} "
                  f"depth={depth:.6f} cmin={cmin:.2e} t={time.time()-t0:.1f}s",
                  flush=True)
            if rmax < 1e-10:
                break
    return u, hist


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 33
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 100000
    run(n, cap=8.0, max_steps=steps)
