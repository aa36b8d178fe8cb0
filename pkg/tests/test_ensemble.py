import math

import numpy as np
import pytest
from scipy import stats

from tsvf_lab import scenarios
from tsvf_lab.ensemble import (
    EnsembleConfig,
    InverseCDFSampler,
    detectability,
    run_ensemble,
    trial_uniforms,
)
from tsvf_lab.errors import StructuralError
from tsvf_lab.pointer import PointerConfig, couple, postselect


def nested_cfg(eps=0.1, trials=10_000, seed=7, **kw):
    return EnsembleConfig.all_points("nested_mzi", "D2", eps, points=("B", "C", "E"),
                                     trials=trials, seed=seed, **kw)


def test_trial_uniforms_stateless():
    full = trial_uniforms(11, 0, 50, 4)
    part = trial_uniforms(11, 20, 35, 4)
    np.testing.assert_array_equal(full[20:35], part)
    assert full.min() >= 0 and full.max() < 1
    # rows with more than 4 draws span two Philox blocks per trial
    wide = trial_uniforms(11, 0, 10, 6)
    np.testing.assert_array_equal(wide[3:], trial_uniforms(11, 3, 10, 6))


def test_uniforms_differ_by_seed():
    assert not np.array_equal(trial_uniforms(1, 0, 10, 2), trial_uniforms(2, 0, 10, 2))


def test_thread_count_does_not_change_result():
    cfg = nested_cfg(trials=40_000)
    a = run_ensemble(cfg, threads=1)
    b = run_ensemble(cfg, threads=4)
    assert a.csv_rows() == b.csv_rows()
    assert a.counts == b.counts


def test_rerun_identical():
    cfg = nested_cfg()
    assert run_ensemble(cfg).to_dict() == run_ensemble(cfg).to_dict()


def test_null_case_zero_coupling():
    cfg = nested_cfg(eps=0.0, trials=20_000, seed=3)
    res = run_ensemble(cfg)
    for est in res.points:
        assert est.exact_shift == 0.0
        assert abs(est.estimated_shift) < 4 * est.stderr


def test_point_c_within_four_stderr():
    res = run_ensemble(nested_cfg(trials=10_000, seed=2024))
    c = res.point("C")
    assert abs(c.estimated_shift - c.exact_shift) < 4 * c.stderr
    assert c.weak_value == pytest.approx(-0.5)
    assert c.predicted_shift == pytest.approx(-0.05)


def test_detector_frequencies_binomial():
    n = 100_000
    res = run_ensemble(nested_cfg(trials=n, seed=5))
    for name, p in res.exact_probabilities.items():
        sd = math.sqrt(n * p * (1 - p))
        assert abs(res.counts[name] - n * p) <= 4 * sd + 1e-9
    assert sum(res.counts.values()) == n


def test_sampler_goodness_of_fit():
    p = scenarios.load("nested_mzi")
    joint = couple(p.circuit, p.pre, [("C", PointerConfig(1.0, 0.8))])
    ps, _ = postselect(joint, p.post("D2"))
    sampler = InverseCDFSampler(ps, 0)
    u = trial_uniforms(99, 0, 100_000, 1)[:, 0]
    x = sampler(u)
    assert stats.kstest(x, lambda t: ps.cdf(t)).pvalue > 1e-3


def test_stderr_scales_as_inverse_sqrt_n():
    small = run_ensemble(nested_cfg(trials=10_000, seed=1)).point("C").stderr
    large = run_ensemble(nested_cfg(trials=160_000, seed=1)).point("C").stderr
    assert small / large == pytest.approx(4.0, rel=0.1)


def test_stderr_undefined_below_two_samples():
    cfg = EnsembleConfig.all_points("nested_mzi", "D2", 0.1, trials=1, seed=0)
    res = run_ensemble(cfg)
    det = detectability(cfg, res)
    for d in det.values():
        if res.counts["D2"] < 2:
            assert d.z is None and not d.stderr_defined


def test_impossible_target_has_no_samples():
    cfg = EnsembleConfig("wheeler_closed", "D1", (("upper", 0.0),), trials=1000)
    res = run_ensemble(cfg)
    assert res.counts["D1"] == 0
    assert res.point("upper").weak_value is None
    assert math.isnan(res.point("upper").estimated_shift)


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig("nested_mzi", "D2", (("C", 0.1),), trials=0)
    with pytest.raises(ValueError):
        EnsembleConfig("nested_mzi", "D2", (("C", 0.1), ("C", 0.2)))
    with pytest.raises(ValueError):
        EnsembleConfig("nested_mzi", "D2", (("C", 0.1),), width=-1)
    with pytest.raises(StructuralError):
        run_ensemble(EnsembleConfig("nested_mzi", "D9", (("C", 0.1),)))
    with pytest.raises(StructuralError):
        run_ensemble(EnsembleConfig("nested_mzi", "D2", (("Q", 0.1),)))


def test_predicted_z_formula():
    res = run_ensemble(nested_cfg(trials=10_000))
    est = res.point("B")
    p = res.exact_probabilities["D2"]
    ps, _ = postselect(couple(scenarios.load("nested_mzi").circuit, scenarios.load("nested_mzi").pre,
                              [(pt, PointerConfig(1.0, 0.1)) for pt in ("B", "C", "E")]),
                       scenarios.load("nested_mzi").post("D2"))
    sigma = math.sqrt(ps.variance("B"))
    assert est.predicted_z == pytest.approx(0.05 * math.sqrt(10_000 * p) / sigma)


@pytest.mark.slow
def test_detection_rates_over_seeds():
    eps = 0.1
    p_d2 = 0.25
    trials = round(100 / eps**2 / p_d2)
    hits = {"B": 0, "C": 0, "E": 0}
    for seed in range(40):
        res = run_ensemble(nested_cfg(eps=eps, trials=trials, seed=1000 + seed))
        for pt in hits:
            hits[pt] += res.point(pt).z >= 3
    assert hits["B"] >= 36 and hits["C"] >= 36
    assert hits["E"] <= 2
