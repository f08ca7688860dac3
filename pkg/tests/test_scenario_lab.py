"""Scenario runners: configs, reduced-parameter sanity limits, emission."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from reslab import scenario_lab as sl

FAST = dict(n_paths=2000, n_steps=16, seed=3)


def bands_by_prefix(report, prefix):
    return [b for b in report.bands if b.name.startswith(prefix)]


class TestConfig:
    def test_defaults_cover_every_scenario(self):
        for sid in sl.SCENARIO_IDS:
            cfg = sl.make_config(sid)
            assert cfg.scenario_id == sid
            assert cfg.n_paths >= 2
            assert "horizon" in cfg.params

    def test_override_top_level_and_params(self):
        cfg = sl.make_config("fig1_put", n_paths=500, mu=0.07, threshold=60.0)
        assert cfg.n_paths == 500
        assert cfg.params["mu"] == 0.07
        assert cfg.threshold == 60.0
        # untouched defaults survive
        assert cfg.params["strike"] == 1000.0

    def test_unknown_field_is_named(self):
        with pytest.raises(ValueError, match="drift"):
            sl.make_config("fig1_put", drift=0.2)

    def test_unknown_scenario_lists_choices(self):
        with pytest.raises(ValueError, match="fig2_vasicek"):
            sl.make_config("fig3_surprise")
        with pytest.raises(ValueError, match="unknown scenario_id"):
            sl.config_defaults("nope")

    @pytest.mark.parametrize(
        "bad",
        [dict(n_paths=1), dict(n_steps=4), dict(seed=-1), dict(threshold=math.inf)],
    )
    def test_field_validation(self, bad):
        with pytest.raises(ValueError):
            sl.make_config("fig1_put", **bad)

    def test_run_example_rejects_figure_ids(self):
        cfg = sl.make_config("fig1_put", **FAST)
        with pytest.raises(ValueError, match="not an example scenario"):
            sl.run_example(cfg)


class TestReducedParameterLimits:
    def test_driftless_put_has_zero_rate(self):
        # with mu = 0 the value process is a martingale: every column zero
        cfg = sl.make_config("fig1_put", mu=0.0, **FAST)
        rep = sl.run_fig1(cfg)
        for row in rep.rate_rows:
            assert row.closed_form == 0.0
            assert abs(row.driver_mc) <= max(4 * row.driver_se, 1e-12)

    def test_flat_vasicek_matches_closed_form_exactly(self):
        # sigma = 0 and r0 = b freeze the short rate; the Monte Carlo columns
        # then agree with the closed form to round-off, and the barrier at
        # 0.05 is never reached
        cfg = sl.make_config(
            "fig2_vasicek", sigma=0.0, r0=0.03, b=0.03, n_paths=64, n_steps=16
        )
        rep = sl.run_fig2(cfg)
        for row in rep.rate_rows:
            assert row.driver_mc == pytest.approx(row.closed_form, abs=1e-13)
            # identical paths: any residual spread is pure round-off
            assert row.driver_se <= 1e-15 * abs(row.driver_mc)
        assert all(r.value is None and r.hit_prob == 0.0 for r in rep.stopping_rows)
        assert not bands_by_prefix(rep, "headline_target")[0].passed
        stop_band = bands_by_prefix(rep, "dual_agreement@stopping")[0]
        assert stop_band.passed and "no path hit" in stop_band.detail

    def test_entropic_brownian_rate_is_exact_and_flat(self):
        cfg = sl.make_config("ex54_entropic_brownian", **FAST)
        rep = sl.run_example(cfg)
        want = -0.5 * cfg.params["gamma"] * cfg.params["c"] ** 2
        for row in rep.rate_rows:
            assert row.closed_form == want
            assert row.driver_mc == pytest.approx(want, rel=1e-12)
            assert row.driver_se == 0.0
        assert bands_by_prefix(rep, "gamma_monotonicity")[0].passed

    def test_martingale_example_reports_zero(self):
        rep = sl.run_example(sl.make_config("ex55_martingale", **FAST))
        for row in rep.rate_rows:
            assert row.closed_form == 0.0
            assert row.driver_mc == 0.0

    def test_capped_count_terminal_value_is_the_payoff(self):
        cfg = sl.make_config("ex37_entropic_jump", n_paths=500, n_steps=16, seed=5)
        rep = sl.run_example(cfg)
        # the two series representations are deterministic: they must agree
        # at a far tighter level than the reported band
        for band in bands_by_prefix(rep, "representation_agreement"):
            assert band.passed
        assert all(b.passed for b in bands_by_prefix(rep, "fd_vs_analytic"))


class TestBandArithmetic:
    def test_dual_band_uses_combined_se(self):
        from reslab.bsde_engine import RateEstimate

        eps = (0.1, 0.05)
        fd = RateEstimate(
            value=1.0, std_error=0.3, method="finite_difference", epsilons=eps
        )
        dx = RateEstimate(value=2.0, std_error=0.4, method="driver_expectation")
        band = sl._dual_band("x", fd, dx)
        assert band.passed  # gap 1.0 vs 4*hypot(.3,.4)=2.0
        fd = RateEstimate(
            value=4.1, std_error=0.3, method="finite_difference", epsilons=eps
        )
        assert not sl._dual_band("x", fd, dx).passed

    def test_closed_band_roundoff_floor(self):
        from reslab.bsde_engine import RateEstimate

        exact = RateEstimate(value=1.0 + 1e-12, std_error=0.0, method="closed_form")
        assert sl._closed_band("x", 1.0, exact).passed
        off = RateEstimate(value=1.01, std_error=0.0, method="closed_form")
        assert not sl._closed_band("x", 1.0, off).passed


class TestSweep:
    def test_sweep_extras_and_monotone_bands(self):
        cfg = sl.make_config(
            "appD_sweep", a_grid=(0.5, 1.0, 2.0), n_paths=4000, n_steps=16, seed=2
        )
        rep = sl.run_appD_sweep(cfg)
        header, rows = rep.extras["sweep"]
        assert header == ("a", "t", "closed_form")
        assert {r[0] for r in rows} == {0.5, 1.0, 2.0}
        header0, rows0 = rep.extras["sweep_t0"]
        assert header0 == ("a", "closed_form", "fd_mc", "fd_se")
        assert [r[0] for r in rows0] == [0.5, 1.0, 2.0]
        assert len(bands_by_prefix(rep, "monotone_at0")) == 2

    def test_sweep_requires_values(self):
        with pytest.raises(ValueError, match="a_grid"):
            sl.run_appD_sweep(sl.make_config("appD_sweep", a_grid=(), **FAST))

    def test_representative_curve_is_the_middle_speed(self):
        cfg = sl.make_config(
            "appD_sweep", a_grid=(0.5, 1.0, 4.0), n_paths=2000, n_steps=16, seed=2
        )
        rep = sl.run_appD_sweep(cfg)
        from reslab.risk_closed_forms import VasicekBondSpec, vasicek_rate_t

        spec = VasicekBondSpec(
            r0=cfg.params["r0"], a=1.0, b=cfg.params["b"],
            sigma=cfg.params["sigma"], horizon=cfg.params["horizon"],
        )
        row = rep.rate_rows[0]
        assert row.closed_form == pytest.approx(vasicek_rate_t(spec, row.t), rel=1e-12)


class TestEmission:
    @pytest.fixture()
    def report(self):
        return sl.run_example(sl.make_config("ex54_entropic_brownian", **FAST))

    def test_standard_files(self, report, tmp_path):
        files = sl.write_report(report, tmp_path)
        names = {f.name for f in files}
        assert {"rates.csv", "stopping.csv", "meta.json", "plotspec.txt"} <= names
        assert "sweep.csv" in names  # the gamma sweep rides along
        base = tmp_path / "ex54_entropic_brownian"
        assert all(f.parent == base for f in files)

    def test_rates_header_contract(self, report, tmp_path):
        sl.write_report(report, tmp_path)
        lines = (tmp_path / "ex54_entropic_brownian" / "rates.csv").read_text()
        head, first = lines.splitlines()[:2]
        assert head == "t,closed_form,driver_mc,driver_se,fd_mc,fd_se"
        assert len(first.split(",")) == 6

    def test_na_markers(self, tmp_path):
        rep = sl.run_example(
            sl.make_config("ex56_jump_call", n_paths=2000, seed=1)
        )
        sl.write_report(rep, tmp_path)
        body = (tmp_path / "ex56_jump_call" / "rates.csv").read_text()
        for line in body.splitlines()[1:]:
            assert line.endswith(",na,na")  # no pathwise columns here
        stopping = (tmp_path / "ex56_jump_call" / "stopping.csv").read_text()
        assert stopping.splitlines() == ["method,value,se,hit_prob"]

    def test_meta_carries_config_and_bands(self, report, tmp_path):
        sl.write_report(report, tmp_path)
        meta = json.loads(
            (tmp_path / "ex54_entropic_brownian" / "meta.json").read_text()
        )
        assert meta["scenario_id"] == "ex54_entropic_brownian"
        assert meta["n_paths"] == FAST["n_paths"]
        assert meta["seed"] == FAST["seed"]
        assert meta["dt"] == pytest.approx(1.0 / FAST["n_steps"])
        assert all({"name", "passed", "detail"} <= set(b) for b in meta["bands"])

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = sl.make_config("fig2_vasicek", n_paths=3000, n_steps=16, seed=11)
        a, b = tmp_path / "a", tmp_path / "b"
        sl.write_report(sl.run_scenario(cfg), a)
        sl.write_report(sl.run_scenario(cfg), b)
        for name in ("rates.csv", "stopping.csv", "meta.json", "plotspec.txt"):
            assert (a / "fig2_vasicek" / name).read_bytes() == (
                b / "fig2_vasicek" / name
            ).read_bytes()

    def test_plotspec_lists_extra_files(self, report, tmp_path):
        sl.write_report(report, tmp_path)
        text = (tmp_path / "ex54_entropic_brownian" / "plotspec.txt").read_text()
        assert "rates.csv" in text and "sweep.csv" in text

    def test_out_dir_from_config(self, tmp_path):
        cfg = sl.make_config(
            "ex55_martingale", out_dir=str(tmp_path / "here"), **FAST
        )
        files = sl.write_report(sl.run_scenario(cfg))
        assert files[0].parent == tmp_path / "here" / "ex55_martingale"


class TestDispatcher:
    @pytest.mark.parametrize("sid", sl.SCENARIO_IDS)
    def test_every_scenario_runs_tiny(self, sid):
        cfg = sl.make_config(sid, n_paths=400, n_steps=16, seed=7)
        rep = sl.run_scenario(cfg)
        assert rep.config is cfg
        assert len(rep.rate_rows) >= 5
        # every row exposes at least one Monte Carlo or closed-form column
        for row in rep.rate_rows:
            assert row.closed_form is not None or row.driver_mc is not None
