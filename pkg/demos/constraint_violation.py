"""First-order control of the unit-length violation.

The director update is projection-free: nodal norms obey
|n(z)|^2 += tau_n^2 |t(z)|^2, so they never shrink, and the accumulated
violation err_n = ||I_h[|n|^2 - 1]||_L1 is proportional to tau_n.  Halving
tau_n about halves err_n, which this demo measures on a coarse mesh.
"""

import ericksen.model as mdl
from ericksen.flow import FlowConfig, outer_loop
from ericksen.model import DoubleWell, build_mesh, dirichlet_data, initial_state, preset

rows = []
for level in range(3):
    tau_n = 0.1 * 2.0 ** (-2 - level)
    pr = mdl.with_params(preset("point2d"), mesh_params={"n": 12})
    mesh = build_mesh(pr)
    dirichlet = dirichlet_data(pr, mesh)
    state0 = initial_state(pr, mesh, dirichlet)
    config = FlowConfig(kappa=pr.kappa, tau_n=tau_n, tau_s=tau_n / 4,
                        tol_inner=1e-5 * tau_n, tol_outer=1e-5 * tau_n)
    run = outer_loop(state0, config, DoubleWell(pr.c_dw), dirichlet)
    rows.append((tau_n, run.history[-1].err_n, run.outer_iters))

print(" tau_n        err_n      N   err_n ratio")
for k, (tau_n, err, n_it) in enumerate(rows):
    ratio = f"{rows[k - 1][1] / err:10.3f}" if k else " " * 10
    print(f" {tau_n:.6f}  {err:.6f}  {n_it:4d} {ratio}")
print("successive ratios near 2 confirm the first-order scaling in tau_n")
