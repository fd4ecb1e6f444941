"""Why the reference configuration does not blow up.

N=4, p=3, beta=2, sigma=1, lambda=0.05, delta=0.05 decays from the start:
the spike amplitude lies far below the singular steady state
L r^(-a) with L = [a(N-2-a)]^(1/(p-1)), so diffusion wins at the tip.  The
script prints the numbers behind that statement and then scans the amplitude
and the damping strength to show where blow-up actually sets in.

    python demos/reference_config.py
"""

import numpy as np

from nlfkpp.grid import build_grid
from nlfkpp.initdata import SpikeProfile, build_u0
from nlfkpp.model import InfeasibleConstants, ModelParams, blowup_time_bound, compute_constants
from nlfkpp.operators import rhs
from nlfkpp.solver import StepControl, run


def spike_run(prm, M=2048):
    grid = build_grid(M, 2.0, prm.N)
    u0 = build_u0(SpikeProfile.from_params(prm), grid)
    return grid, u0, run(prm, grid, u0, StepControl(t_end=10 * blowup_time_bound(prm)))


def main():
    prm = ModelParams(4, 3.0, 2.0, 1.0, 0.05, 0.05)
    a = prm.a
    L = (a * (prm.N - 2 - a)) ** (1 / (prm.p - 1))
    grid, u0, out = spike_run(prm)
    print(f"a = {a:g}, singular steady-state coefficient L = {L:g}, lambda = {prm.lam:g}")
    print(f"initial tip value u0(0) = {u0[0]:.4g}, rhs at the tip = {rhs(grid, u0, prm)[0]:.4g}")
    print(f"ODE comparison time T_tilde = {blowup_time_bound(prm):.4g} (a lower bound on the blow-up time)")
    print(f"run to 10 T_tilde: {out.status.value}, final sup_u = {out.trace.sup_u[-1]:.4g}")
    try:
        compute_constants(prm)
    except InfeasibleConstants as exc:
        print(f"analysis constants: {exc}")

    print("\namplitude scan (horizon 10 T_tilde each):")
    print(f"{'lambda':>7} {'sigma':>6} {'status':>15} {'t_final/T_tilde':>16} {'sup_u':>10}")
    for lam in (0.05, 0.5, 1.0, 1.5, 2.0, 4.0):
        for sigma in (1.0, 0.01):
            p2 = prm.replace(lam=lam, sigma=sigma)
            _, _, o = spike_run(p2)
            print(f"{lam:7g} {sigma:6g} {o.status.value:>15} {o.t_final / blowup_time_bound(p2):16.3f} "
                  f"{o.trace.sup_u[-1]:10.3g}")


if __name__ == "__main__":
    np.seterr(over="ignore")
    main()
