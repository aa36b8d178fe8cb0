"""
Marking an arm with polarization or with a second particle
===========================================================

Flipping the photon's own polarization in arm B, or flipping a separate
two-level particle there, removes the weak trace in B.  With polarization
the circular-polarization projectors still see both arms.
"""

import numpy as np

from tsvf_lab import scenarios
from tsvf_lab.tsvf import point_projector, reduce_subsystem, two_state_at, weak_value, weak_value_table

pol = scenarios.load("polarization_marker")
table = weak_value_table(pol.circuit, pol.pre, pol.post("D2_H"))
print("polarization, D2 with H:", {pt: complex(np.round(v, 12)) for pt, v in table.items()})

right = tuple(scenarios.polarization_vector("circular_right"))
for pt in ("A", "B"):
    tsv = two_state_at(pol.circuit, pol.pre, pol.post("D2_H"), pt)
    v = weak_value(tsv, point_projector(pol.circuit, pt, polarization=right)).value
    print(f"  (P_{pt} P_right)_w = {np.round(v, 12)}   |.| = {abs(v):.3f}")

###############################################################################
# The second particle makes the state entangled; the backward state is still a
# product, so the photon alone has a well-defined two-state vector.

anc = scenarios.load("ancilla_marker")
tsv = two_state_at(anc.circuit, anc.pre, anc.post("D2_up"), "B")
red = reduce_subsystem(tsv, "path")
print("\nancilla, D2 with the marker undisturbed")
print("  full forward :", tsv.forward)
print("  reduced      :", red.forward, "| backward", red.backward)
