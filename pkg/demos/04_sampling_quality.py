"""
How evenly do the point sequences cover the unit square?
========================================================

Star discrepancy measures the worst mismatch between the fraction of
points inside an anchored box and the box volume.  It is estimated here
from a few thousand candidate boxes, which gives a lower bound.
"""
import numpy as np

from genlip import SequenceSpec, generate
from genlip.qmc import star_discrepancy_estimate

m = 4096
print("   s     halton     sobol    random (median of 10)")
for s in (64, 256, 1024, 4096):
    h = star_discrepancy_estimate(generate(SequenceSpec("halton", 2), s), m)
    so = star_discrepancy_estimate(generate(SequenceSpec("sobol", 2), s), m)
    r = np.median([star_discrepancy_estimate(generate(SequenceSpec("random", 2, sd), s), m) for sd in range(10)])
    print(f"{s:5d}   {h:.5f}   {so:.5f}   {r:.5f}")

# random points shrink like 1/sqrt(s); the sequences close to 1/s
