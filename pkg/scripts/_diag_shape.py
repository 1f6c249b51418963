"""Temporary diagnostic: does the normalized interior shape converge
while the level runs away? Track u(r) - u(0) at fixed radii, the sink
speed, and the residual field structure."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from gcftranslator.domains import ConvexDomain
from gcftranslator.grids import Grid, StencilSet
from gcftranslator import solver as sv
from gcftranslator.solver import radial_heights


def run(n, cap, max_steps, report_every=4000):
    dom = ConvexDomain.disk(1.0)
    grid = Grid.from_domain(dom, n)
    rhs = 2.0 * np.pi / dom.area()
    stage = sv._Stage(grid, StencilSet.make(3), rhs)
    u = sv._gauge_init(dom, grid, cap)
    u[stage.fixed] = cap
    ci, cj = grid.center_index
    # probe indices along the +x axis at r ~ 0.25, 0.5, 0.75, 0.9
    rs = [0.25, 0.5, 0.75, 0.9]
    cols = [ci + int(round(r / grid.h)) for r in rs]
    oracle = radial_heights(1.0, np.array([grid.xs[c] - grid.xs[ci] for c in cols]))
    print("oracle heights:", " ".join(f"{v:.5f}" for v in oracle), flush=True)
    R, aux = stage.residual(u)
    prev_shape = None
    t0 = time.time()
    for k in range(max_steps):
        dt = 0.4 * stage.step_bound(aux)
        u[stage.pde] += dt * R[stage.pde]
        R, aux = stage.residual(u)
        if k % report_every == 0 or k == max_steps - 1:
            shape = np.array([u[c, cj] - u[ci, cj] for c in cols])
            err = shape - oracle
            rr = R[stage.pde]
            rmax = float(np.abs(rr).max())
            # residual at the center and at r=0.5 (interior structure)
            r_ctr = R[ci, cj]
            r_mid = R[cols[1], cj]
            depth = cap - u[ci, cj]
            drift = (np.abs(shape - prev_shape).max()
                     if prev_shape is not None else np.nan)
            prev_shape = shape
            print(f"step={k:6d} rmax={rmax:.3e} Rctr={r_ctr:+.3e} "
                  f"Rmid={r_mid:+.3e} depth={depth:8.3f} "
                  f"shape_err={' '.join(f'{e:+.4f}' for e in err)} "
                  f"drift={drift:.2e} t={time.time()-t0:.0f}s", flush=True)
    return u


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 33
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 100000
    run(n, cap=8.0, max_steps=steps)
