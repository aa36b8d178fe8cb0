"""
Seeing the trace in a finite ensemble
=====================================

Simulate single runs of the nested interferometer with weak pointers at B, C
and E, keep the D2 clicks, and average the pointer readings.
"""

from tsvf_lab.ensemble import EnsembleConfig, detectability, run_ensemble

cfg = EnsembleConfig.all_points("nested_mzi", "D2", 0.1, points=("B", "C", "E"), trials=40_000, seed=1)
res = run_ensemble(cfg)
print("detector counts:", res.counts)
print(f"{'point':>5} {'estimate':>10} {'stderr':>9} {'exact':>10} {'z':>6}")
for est in res.points:
    print(f"{est.point:>5} {est.estimated_shift:10.5f} {est.stderr:9.5f} {est.exact_shift:10.5f} {est.z:6.2f}")

###############################################################################
# How often does each point clear z = 3?  Trials are scaled so that about
# 100/eps^2 runs survive the post-selection.

hits = {"B": 0, "C": 0, "E": 0}
for seed in range(20):
    det = detectability(EnsembleConfig.all_points("nested_mzi", "D2", 0.1, points=("B", "C", "E"),
                                                  trials=40_000, seed=seed))
    for pt, d in det.items():
        hits[pt] += d.z is not None and d.z >= 3
print("seeds with z >= 3 (of 20):", hits)
