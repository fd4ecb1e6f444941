"""Spatially homogeneous solutions: U' = U^p (1 - sigma U^beta).

Every positive start converges monotonically to sigma^(-1/beta); with
sigma = 0 the same start blows up at U0^(1-p)/(p-1).

    python demos/ode_oracle.py
"""

from nlfkpp.solver import run_homogeneous_ode


def main():
    for U0 in (0.25, 0.5, 2.0):
        traj = run_homogeneous_ode(2.0, 2.0, 1.0, U0, 20.0)
        print(f"sigma=1, U0={U0:5g}: U(20) - 1 = {traj.U[-1] - 1:+.2e}")
    for U0 in (0.5, 2.0):
        traj = run_homogeneous_ode(2.0, 2.0, 0.0, U0, 20.0)
        print(f"sigma=0, U0={U0:5g}: blow-up at {traj.blowup_time:.6g}, exact {1 / U0:.6g}")


if __name__ == "__main__":
    main()
