import json
import math

import numpy as np
import pytest

from haarfield import harness, mrf
from haarfield.harness import (ExperimentConfig, ResultRow, export,
                               independent_reference, l2_error, rate_probe,
                               run_experiment, theoretical_schedule)


def tiny_config(**over):
    base = dict(size=(8, 8), eta=0.2, iterations=60, replications=3,
                design="a", regression="m2", mode="dependent",
                lambda_grid=(0.0, 0.1), resolution=3, seed=7, workers=1)
    base.update(over)
    return ExperimentConfig(**base)


def test_config_validation():
    tiny_config().validate()
    with pytest.raises(ValueError):
        tiny_config(size=(8,)).validate()
    with pytest.raises(ValueError):
        tiny_config(design="c").validate()
    with pytest.raises(ValueError):
        tiny_config(regression="m3").validate()
    with pytest.raises(ValueError):
        tiny_config(mode="mixed").validate()
    with pytest.raises(ValueError):
        tiny_config(lambda_grid=()).validate()
    with pytest.raises(ValueError):
        tiny_config(lambda_grid=(0.1, -0.2)).validate()
    with pytest.raises(ValueError):
        tiny_config(resolution=2, j0=3).validate()
    with pytest.raises(ValueError):
        tiny_config(w=0).validate()
    with pytest.raises(ValueError):
        tiny_config(replications=0).validate()
    with pytest.raises(ValueError):
        tiny_config(beta=-1.0).validate()
    with pytest.raises(ValueError):
        tiny_config(rho=1.0).validate()


def test_run_experiment_rejects_inadmissible_eta():
    with pytest.raises(ValueError):
        run_experiment(tiny_config(eta=0.3))  # 8x8 free bound is ~0.2576


def test_l2_error():
    class Flat:
        def predict(self, pts):
            return np.zeros(len(pts))

    pts = np.array([[0.0, 0.0], [0.5, 0.5]])
    err = l2_error(Flat(), lambda p: np.full(len(p), 2.0), pts)
    assert err == pytest.approx(4.0)
    with pytest.raises(ValueError):
        l2_error(Flat(), mrf.m2, np.empty((0, 2)))


def test_independent_reference_sample():
    cfg = tiny_config(size=(20, 20), mode="independent")
    seed = harness._spawn(cfg.seed, harness._ROLE_LEARN, 0)
    s = independent_reference(cfg, seed)
    assert s.n == 400
    assert (s.points >= -1).all() and (s.points < 1).all()
    noise = s.responses - mrf.m2(s.points)
    assert abs(noise.mean()) < 0.15
    assert abs(noise.std() - 1.0) < 0.15
    # same seed reproduces, learn and test streams differ
    s2 = independent_reference(cfg, harness._spawn(cfg.seed, 1, 0))
    assert np.array_equal(s.points, s2.points)
    t_pts, _ = harness._iid_design(cfg, harness._spawn(cfg.seed, 2, 0))
    assert not np.array_equal(s.points, t_pts)


def test_run_experiment_row_shape_and_order():
    cfg = tiny_config()
    rows = run_experiment(cfg)
    assert [r.lam for r in rows] == [0.0, 0.1]
    for r in rows:
        assert r.design == "a" and r.regression == "m2"
        assert r.mode == "dependent"
        assert r.replications == 3 and r.seed == 7
        assert np.isfinite(r.mean_l2) and r.mean_l2 >= 0
        assert np.isfinite(r.sd_l2) and r.sd_l2 >= 0


def test_single_replication_sd_is_zero():
    rows = run_experiment(tiny_config(replications=1))
    assert all(r.sd_l2 == 0.0 for r in rows)


def test_worker_count_does_not_change_results(tmp_path):
    one = run_experiment(tiny_config(workers=1))
    two = run_experiment(tiny_config(workers=2))
    p1, p2 = tmp_path / "w1.csv", tmp_path / "w2.csv"
    export(one, p1)
    export(two, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_export_csv_format(tmp_path):
    rows = [ResultRow(lam=0.08, design="a", regression="m1",
                      mode="dependent", mean_l2=1.914, sd_l2=0.469,
                      replications=1000, seed=42)]
    path = tmp_path / "out.csv"
    export(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,design,regression,mode,mean_l2,sd_l2,replications,seed"
    assert lines[1] == "0.08,a,m1,dependent,1.91400,0.469000,1000,42"


def test_export_json_round_trip(tmp_path):
    rows = [ResultRow(lam=0.0, design="b", regression="m2",
                      mode="independent", mean_l2=0.253, sd_l2=0.043,
                      replications=12, seed=5)]
    path = tmp_path / "out.json"
    export(rows, path, fmt="json")
    back = json.loads(path.read_text())
    assert back == [{"lambda": 0.0, "design": "b", "regression": "m2",
                     "mode": "independent", "mean_l2": 0.253,
                     "sd_l2": 0.043, "replications": 12, "seed": 5}]
    with pytest.raises(ValueError):
        export(rows, path, fmt="tsv")


def test_schedule_driver_value():
    sched = theoretical_schedule((100, 100), smoothness=1.0, tail=2.0)
    want = math.log(100.0) ** (2 * (3.0 + 2.0)) / 10000.0 ** (1.0 / 3.0)
    assert sched.r_tilde == pytest.approx(want, rel=1e-12)
    assert sched.r_tilde == pytest.approx(1.99e5, rel=1e-2)


def test_schedule_bounded_branch_formulas():
    r, tau, c1, c2 = 1.5, 4.0, 0.3, 7.0
    sched = theoretical_schedule((50, 80), r, tau, c1=c1, c2=c2)
    base = 2 * r + 2 * (1 + 2 / tau)
    assert sched.lambda2 == pytest.approx(
        c1 * sched.r_tilde ** ((2 * r + 2) / base), rel=1e-12)
    assert sched.j1 == math.floor(c2 - math.log2(sched.r_tilde) / base)
    assert sched.w is None


def test_schedule_unbounded_branch_formulas():
    r, tau, g = 1.0, 4.0, 6.0
    c0, c1, c2 = 40.0, 0.5, 8.0
    sched = theoretical_schedule((60, 60), r, tau, moment=g, c0=c0, c1=c1,
                                 c2=c2, bounded=False)
    denom = 2 * r * 2 * (1 + 2 / tau) + g * (2 * r + 2 * (1 + 2 / tau))
    assert sched.w == math.floor(c0 * sched.r_tilde ** (-2 * r / denom))
    assert sched.lambda2 == pytest.approx(
        c1 * sched.r_tilde ** ((2 * r * 2 + (2 * r + 2) * g) / denom),
        rel=1e-12)
    assert sched.j1 == math.floor(c2 - (g / denom)
                                  * math.log2(sched.r_tilde))


def test_schedule_validation():
    with pytest.raises(ValueError):
        theoretical_schedule((2, 100), 1.0, 4.0)  # side below 3
    with pytest.raises(ValueError):
        theoretical_schedule((100, 100), 0.0, 4.0)
    with pytest.raises(ValueError):
        theoretical_schedule((100, 100), 1.0, -1.0)
    with pytest.raises(ValueError):
        theoretical_schedule((100, 100), 1.0, 4.0, bounded=False)
    with pytest.raises(ValueError):
        # large driver with tiny c2 pushes the resolution below 1
        theoretical_schedule((100, 100), 1.0, 2.0, c2=0.0)
    with pytest.raises(ValueError):
        theoretical_schedule((100, 100), 1.0, 2.0, moment=4.0, c0=1e-6,
                             bounded=False)  # w collapses below 1


def test_rate_probe_runs_ladder():
    cfg = tiny_config(iterations=50, replications=2, regression="m2",
                      lambda_grid=(0.0,))
    rows, slope = rate_probe(cfg, (8, 12, 16), smoothness=1.0, tail=4.0)
    assert [r[0] for r in rows] == [64, 144, 256]
    assert all(np.isfinite(e) and e >= 0 for _, e in rows)
    assert np.isfinite(slope)
    with pytest.raises(ValueError):
        rate_probe(cfg, (8, 12))
