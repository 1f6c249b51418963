"""Temporary diagnostic: does the pinned-band flow settle when started
SHALLOW? Hypothesis: a stable natural depth D* exists; deep inits are in
a runaway basin, shallow inits converge."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from gcftranslator.domains import ConvexDomain
from gcftranslator.grids import Grid, StencilSet
from gcftranslator import solver as sv
from gcftranslator.solver import radial_heights


def run(n, cap, d0, max_steps, report_every=4000):
    dom = ConvexDomain.disk(1.0)
    grid = Grid.from_domain(dom, n)
    rhs = 2.0 * np.pi / dom.area()
    stage = sv._Stage(grid, StencilSet.make(3), rhs)
    X, Y = grid.meshes
    g = np.clip(dom.gauge(X, Y), 0.0, 1.0)
    # shallow bowl of depth d0 hanging from the band value
    u = cap - d0 * (1.0 - g ** 2)
    u[grid.mask == 2] = 0.0
    u[stage.fixed] = cap
    ci, cj = grid.center_index
    rs = [0.25, 0.5, 0.75]
    cols = [ci + int(round(r / grid.h)) for r in rs]
    oracle = radial_heights(1.0, np.array([grid.xs[c] - grid.xs[ci] for c in cols]))
    R, aux = stage.residual(u)
    t0 = time.time()
    print(f"--- n={n} cap={cap} d0={d0}", flush=True)
    for k in range(max_steps):
        dt = 0.4 * stage.step_bound(aux)
        u[stage.pde] += dt * R[stage.pde]
        R, aux = stage.residual(u)
        if k % report_every == 0 or k == max_steps - 1:
            rr = R[stage.pde]
            rmax = float(np.abs(rr).max())
            depth = cap - u[ci, cj]
            shape = np.array([u[c, cj] - u[ci, cj] for c in cols])
            err = shape - oracle
            print(f"step={k:6d} rmax={rmax:.3e} depth={depth:8.4f} "
                  f"shape_err={' '.join(f'{e:+.4f}' for e in err)} "
                  f"t={time.time()-t0:.0f}s", flush=True)
            if rmax < 1e-9:
                print("SETTLED", flush=True)
                break
    return u


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 33
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 40000
    for d0 in (1.0, 2.0, 4.0):
        run(n, cap=8.0, d0=d0, max_steps=steps)
