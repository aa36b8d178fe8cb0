"""
The nested interferometer
=========================

Photons that end at D2 leave weak traces at A, B and C but none at E, even
though every path from C to D2 has to pass E.  The forward and backward
states explain it: each is nonzero at E only when the other vanishes there.
"""

import numpy as np

from tsvf_lab import scenarios
from tsvf_lab.circuit import backward_propagate, forward_propagate
from tsvf_lab.tsvf import two_state_at, weak_value_table

p = scenarios.load("nested_mzi")
c = p.circuit

for post in ("D1", "D2", "D3"):
    table = weak_value_table(c, p.pre, p.post(post))
    row = "  ".join(f"{pt}:{np.round(v.real, 12):+.3f}" for pt, v in table.items())
    print(f"{post}  {row}")

# two-state vector at the slice through A, B and C
tsv = two_state_at(c, p.pre, p.post("D2"), "B")
print("\nforward  |Psi> =", tsv.forward)
print("backward |Phi> =", tsv.backward)
print("<Phi|Psi>      =", tsv.overlap)

###############################################################################
# Where each state lives at the slice through D and E.

b = c.point("E").boundary
fwd = forward_propagate(c, p.pre.state, b)
bwd = backward_propagate(c, p.post("D2"), b)
for mode in ("D", "E"):
    print(f"{mode}: forward {abs(fwd.amplitude((mode,))):.3f}   backward {abs(bwd.amplitude((mode,))):.3f}")
