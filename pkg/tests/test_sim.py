import json

import numpy as np
import pytest

from staggered_did.errors import InputError
from staggered_did.numerics import RngStream
from staggered_did.sim import (
    SimConfig,
    SimReport,
    counts_from_pi,
    design_moments,
    generate_population,
    reports_to_csv,
    reports_to_json,
    run_simulation,
    table1_configs,
)


def test_design_moments_entries():
    mu, S = design_moments("A")
    assert mu.tolist() == [0, 0, 0, 4, 3, 3, 2, 2, 1]
    np.testing.assert_array_equal(S, np.eye(9))
    mu, S = design_moments("B", 2.0)
    assert mu[7] == 11.0 and S[1, 1] == 40.0 and S[0, 0] == 4.0
    _, S = design_moments("C")
    assert S[0, 1] == 0.9 and S[0, 3] == 0.0
    _, S = design_moments("D")
    assert S[4, 5] == -0.4 and S[2, 3] == 0.0
    with pytest.raises(InputError):
        design_moments("E")


def test_counts_from_pi():
    assert counts_from_pi("I", 30).counts == (0, 20, 0, 10)
    assert counts_from_pi("II", 30).counts == (0, 15, 12, 3)
    assert counts_from_pi("II", 150).counts == (0, 75, 60, 15)
    with pytest.raises(InputError, match="divisible"):
        counts_from_pi("II", 25)


def test_population_layout():
    pot = generate_population("A", 5, 0.0, RngStream(0))
    assert pot.Y.shape == (5, 3, 4)
    assert np.all(pot.Y[:, :, 0] == 0.0)
    np.testing.assert_array_equal(pot.Y[0, 1, 1:], [4.0, 3.0, 3.0])
    np.testing.assert_array_equal(pot.Y[0, 2, 1:], [2.0, 2.0, 1.0])


def test_population_moments():
    pot = generate_population("D", 20_000, 1.0, RngStream(1))
    draws = pot.Y[:, :, 1:].reshape(20_000, 9)
    mu, S = design_moments("D")
    assert np.abs(draws.mean(axis=0) - mu).max() < 0.05
    assert np.abs(np.cov(draws.T) - S).max() < 0.05


def test_population_deterministic():
    a = generate_population("C", 10, 1.0, RngStream(4))
    b = generate_population("C", 10, 1.0, RngStream(4))
    np.testing.assert_array_equal(a.Y, b.Y)


class TestConfig:
    def test_from_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"design": "B", "pi_variant": "II", "N": 30, "n_sims": 5}))
        c = SimConfig.from_json(path)
        assert c.design == "B" and c.n_sims == 5 and c.n_boot == 1000

    def test_unknown_field(self):
        with pytest.raises(InputError, match="unknown config fields: foo"):
            SimConfig.from_dict({"foo": 1})

    @pytest.mark.parametrize("bad", [{"design": "Z"}, {"T": 4}, {"n_sims": 0}, {"sigma": -1.0},
                                     {"level": 1.0}, {"N": 31}])
    def test_validation(self, bad):
        with pytest.raises(InputError):
            SimConfig(**bad)


def test_table_configs_order():
    cfgs = table1_configs(10, 5, 5)
    assert len(cfgs) == 16
    assert [(c.N, c.pi_variant, c.design) for c in cfgs[:5]] == [
        (30, "I", "A"), (30, "I", "B"), (30, "I", "C"), (30, "I", "D"), (30, "II", "A")]
    assert [c.seed for c in cfgs] == list(range(10, 26))


class TestRun:
    cfg = SimConfig(design="A", pi_variant="I", N=30, n_sims=40, n_boot=50, seed=3)

    def test_deterministic(self):
        a = reports_to_csv([run_simulation(self.cfg)])
        assert a == reports_to_csv([run_simulation(self.cfg)])

    def test_workers_do_not_change_results(self):
        assert reports_to_json([run_simulation(self.cfg, workers=2)]) == reports_to_json([run_simulation(self.cfg)])

    def test_report_shape(self):
        rep = run_simulation(self.cfg)
        assert set(rep.coverage) == {"exact", "did_hat", "lz", "b1", "b2"}
        assert all(0 <= v <= 1 for v in rep.coverage.values())
        assert rep.mean_variance["exact"] == rep.v_exact
        lines = reports_to_csv([rep]).splitlines()
        assert lines[0].split(",") == list(SimReport.CSV_COLUMNS)
        assert lines[1].startswith("A,I,30,")

    def test_zero_sigma(self):
        rep = run_simulation(SimConfig(design="A", N=30, sigma=0.0, n_sims=20, n_boot=20))
        # identical units: every assignment yields the same estimate
        assert rep.v_exact == pytest.approx(0.0, abs=1e-12)
        assert rep.var_tau == pytest.approx(0.0, abs=1e-20)
