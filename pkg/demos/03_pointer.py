"""
Exact pointers and the first-order picture
==========================================

A Gaussian pointer of width Delta, kicked by delta = epsilon * Delta when the
photon passes, ends up at delta * Re(weak value) to first order.  Here the
exact conditional mean is compared with that prediction at point C.
"""

from tsvf_lab import scenarios
from tsvf_lab.pointer import PointerConfig, couple, first_order_shift, leak_ratio, postselect
from tsvf_lab.tsvf import point_projector, two_state_at, weak_value

p = scenarios.load("nested_mzi")
wv = weak_value(two_state_at(p.circuit, p.pre, p.post("D2"), "C"), point_projector(p.circuit, "C"))
print("weak value at C:", wv.value)

print(f"{'eps':>6} {'exact':>12} {'first order':>12} {'diff':>10}")
for eps in (0.4, 0.2, 0.1, 0.05):
    cfg = PointerConfig(1.0, eps)
    ps, prob = postselect(couple(p.circuit, p.pre, [("C", cfg)]), p.post("D2"))
    pred = first_order_shift(wv, cfg)
    print(f"{eps:6.2f} {ps.mean():12.6f} {pred:12.6f} {ps.mean() - pred:10.2e}")

###############################################################################
# The price of the coupling: the dark region E is no longer perfectly dark.
# Relative to the flux heading for D the leak is (1 - exp(-eps^2/4))/2.

for eps in (0.2, 0.1, 0.05):
    flux = couple(p.circuit, p.pre, [("C", PointerConfig(1.0, eps))], 6).mode_probability("E")
    exact, asym = leak_ratio(eps)
    print(f"eps={eps}: E flux / 0.5 = {flux / 0.5:.6e}   exact {exact:.6e}   eps^2/8 {asym:.6e}")
