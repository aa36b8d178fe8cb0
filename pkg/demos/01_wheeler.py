"""
Which way did the photon go?
============================

A single beam splitter sends the photon into two arms.  Without a second
beam splitter (``wheeler_open``) a click at a detector tells us the arm.
With it (``wheeler_closed``) every photon reaches D2 and both arms carry the
same weak trace.
"""

from tsvf_lab import scenarios
from tsvf_lab.tsvf import weak_value_table
from tsvf_lab.errors import ImpossiblePostSelection

for pid in ("wheeler_open", "wheeler_closed"):
    p = scenarios.load(pid)
    print(f"{pid}: {p.note}")
    for post in p.posts:
        try:
            table = weak_value_table(p.circuit, p.pre, p.post(post))
        except ImpossiblePostSelection:
            print(f"  {post}: never clicks")
            continue
        # the real part is the pointer shift in units of delta
        print(f"  {post}:", {pt: round(v.real, 12) for pt, v in table.items()})

###############################################################################
# Weak pointers in both arms of the closed interferometer never move together:
# test each pointer for having left its initial state.

from tsvf_lab.pointer import PointerConfig, couple, projective_readout

p = scenarios.load("wheeler_closed")
cfg = PointerConfig(width=1.0, epsilon=3.0)
joint = couple(p.circuit, p.pre, [("upper", cfg), ("lower", cfg)], boundary=1)
first = projective_readout(joint, "upper")
both = projective_readout(first.orthogonal, "lower")
print("P(upper pointer moved) =", first.found_orthogonal)
print("P(both moved)          =", both.found_orthogonal)
