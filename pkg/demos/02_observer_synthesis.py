"""
Observer gain from the LMI, and where it stops being feasible
=============================================================

The gain comes from a semidefinite feasibility problem whose only model
data are A, the output Jacobian C at an operating point, and the Lipschitz
constant gamma_f.  A large gamma_f asks for more robustness than any gain
can deliver.  On this model the limit is structural: C has no column for
the rotor speed, so the speed direction is untouched by L C.
"""
import numpy as np

import genlip
from genlip import (
    LMIProblem,
    build_matrices,
    derive_constants,
    extract_gain,
    linearize_output,
    load_inputs,
    load_params,
    solve_lmi,
    steady_state,
)
from genlip.observer import necessary_gamma_bound

c = derive_constants(load_params(genlip.data_path("example_params.json")))
m = build_matrices(c)
u0 = load_inputs(genlip.data_path("example_inputs.csv")).values[0]
x0 = steady_state(c, m, u0, (0.5, 0.0, 1.0, 0.0))
C, _ = linearize_output(c, x0, u0)
print("operating point x0 =", np.round(x0, 6))
print("output Jacobian C =\n", np.round(C, 4))

bound = necessary_gamma_bound(m.A, C)
print(f"\nno gain can work above gamma_f = {bound:.4f}")

# sweep gamma_f and watch the verdict flip
for g in (0.0, 0.5, 0.9, 0.95, 1.0, 1.05, 20.0):
    res = solve_lmi(LMIProblem(m.A, C, g))
    if res:
        L = extract_gain(res).L
        eig = np.linalg.eigvals(m.A - L @ C)
        print(f"gamma_f = {g:5.2f}  feasible    |L| = {np.linalg.norm(L, 2):7.2f}  "
              f"slowest closed-loop mode {eig.real.max():.3f}")
    else:
        print(f"gamma_f = {g:5.2f}  infeasible  ({res.reason})")

# the gain used by the estimation demo
cert = solve_lmi(LMIProblem(m.A, C, 0.9))
print("\nL at gamma_f = 0.9:\n", np.round(extract_gain(cert).L, 4))
