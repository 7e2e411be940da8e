"""
Lipschitz constants of the generator model
==========================================

The observer design needs a bound on how fast the nonlinear parts of the
generator model can change over the operating region.  Two routes are
compared here: the closed-form constants, which only need the box
half-widths, and sampled estimates that take the largest Jacobian norm
seen at points drawn from the box.
"""
import numpy as np

import genlip
from genlip import (
    SequenceSpec,
    derive_constants,
    estimate_gamma_jacobian,
    estimate_gamma_pairwise,
    gamma_f_analytic,
    gamma_h_analytic,
    load_bounds,
    load_params,
)

params = load_params(genlip.data_path("example_params.json"))
c = derive_constants(params)
box = load_bounds(genlip.data_path("example_bounds.json"))
print("state box  ", box.x_lo, "->", box.x_hi)
print("input box  ", box.u_lo, "->", box.u_hi)

# closed form
gf = gamma_f_analytic(c, box).value
gh = gamma_h_analytic(c, box).value
print(f"\nanalytic   gamma_f = {gf:9.4f}   gamma_h = {gh:7.4f}")

# sampled: the three point sequences at the same budget
s = 2000
for kind in ("halton", "sobol"):
    spec = SequenceSpec(kind, 8)
    vf = estimate_gamma_jacobian("f", c, box, spec, s).value
    vh = estimate_gamma_jacobian("h", c, box, spec, s).value
    print(f"{kind:10s} gamma_f = {vf:9.4f}   gamma_h = {vh:7.4f}")

rf = [estimate_gamma_jacobian("f", c, box, SequenceSpec("random", 8, sd), s).value for sd in range(10)]
rh = [estimate_gamma_jacobian("h", c, box, SequenceSpec("random", 8, sd), s).value for sd in range(10)]
print(f"{'random':10s} gamma_f = {np.median(rf):9.4f}   gamma_h = {np.median(rh):7.4f}   (median of 10 seeds)")

# difference quotients need no derivatives at all but see less of the box
pw = estimate_gamma_pairwise("f", c, box, SequenceSpec("halton", 8), 200).value
print(f"\npairwise gamma_f from 200 points: {pw:.4f}")

# the sampled values settle quickly; the closed form is about five times larger
for n in (10, 100, 1000, 5000):
    v = estimate_gamma_jacobian("f", c, box, SequenceSpec("halton", 8), n).value
    print(f"  s = {n:5d}  gamma_f ~ {v:.4f}  ({v / gf:.1%} of analytic)")
