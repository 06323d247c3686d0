import json

import numpy as np
import pytest

from multires_toa.bench import (
    CSV_HEADER,
    ExperimentSpec,
    ResultTable,
    crlb_table,
    preset_experiments,
    run_experiment,
    thread_count,
    true_cycles,
)
from multires_toa.channel import BandConfig, MultipathChannel
from multires_toa.exceptions import ConfigError, ValidationError

BANDS = (BandConfig.from_hz(4e9, 200e6), BandConfig.from_hz(6e9, 200e6))


def small_spec(**kw):
    kw.setdefault("snr_grid_db", (10.0, 30.0))
    kw.setdefault("trials", 12)
    return ExperimentSpec(bands=BANDS, **kw)


class TestSpec:
    def test_defaults(self):
        s = ExperimentSpec(bands=BANDS)
        assert s.resolved_n_samples == 128
        assert s.resolved_model_order == 8
        assert s.snr_grid_db == tuple(range(0, 41, 5))
        assert s.tag == "custom_default"

    @pytest.mark.parametrize("bad", [
        {"trials": 0},
        {"snr_grid_db": (10.0, 10.0)},
        {"snr_grid_db": (20.0, 10.0)},
        {"snr_grid_db": ()},
        {"estimator_mode": "mle"},
        {"seed": -1},
        {"scenario": "S9"},
        {"duration_s": 50e-9},
        {"n_samples": 15},
        {"hankel_rows": 200},
        {"variant": "a/b"},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ValidationError):
            ExperimentSpec(bands=BANDS, **bad)

    def test_multiband_needs_two_bands(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(bands=BANDS[:1])
        assert ExperimentSpec(bands=BANDS[:1], estimator_mode="single-band").trials == 500

    def test_overlapping_bands_named(self):
        bands = (BandConfig.from_hz(4e9, 200e6), BandConfig.from_hz(4.1e9, 200e6))
        with pytest.raises(ValidationError, match="bands 0 and 1"):
            ExperimentSpec(bands=bands)

    def test_json_roundtrip_and_hash(self):
        s = small_spec(scenario=MultipathChannel.from_arrays([1.0, 0.3], [5e-9, 9e-9]),
                       hankel_rows=40, seed=9)
        again = ExperimentSpec.from_json(s.to_json())
        assert again == s and again.to_dict() == s.to_dict()
        assert again.sha256() == s.sha256()
        assert s.replace(trials=13).sha256() != s.sha256()

    def test_document_errors(self):
        with pytest.raises(ConfigError, match="unknown experiment keys"):
            ExperimentSpec.from_dict({"bands": [], "colour": 1})
        with pytest.raises(ConfigError, match="bands"):
            ExperimentSpec.from_dict({"trials": 3})
        with pytest.raises(ConfigError):
            ExperimentSpec.from_json("{")
        with pytest.raises(ConfigError, match="hankel"):
            ExperimentSpec.from_dict({"bands": [b.to_dict() for b in BANDS], "hankel": {"P": 3}})


class TestPresets:
    def test_fig2a(self):
        specs = preset_experiments("fig2a")
        assert [s.bands[0].bandwidth_hz for s in specs] == [160e6, 200e6, 300e6]
        docs = [s.to_dict() for s in specs]
        for d in docs:
            for b in d["bands"]:
                b.pop("bandwidth_hz")
            d.pop("variant")
        assert docs[0] == docs[1] == docs[2]

    def test_fig2b(self):
        specs = preset_experiments("fig2b")
        apertures = [s.bands[1].center_hz - s.bands[0].center_hz for s in specs]
        assert apertures == [250e6, 500e6, 1e9, 2e9]
        assert all(b.bandwidth_hz == 200e6 for s in specs for b in s.bands)

    def test_fig2c(self):
        specs = preset_experiments("fig2c")
        assert [s.scenario for s in specs] == ["S1", "S2", "S3", "S4", "S5"]
        assert all(s.bands == specs[0].bands for s in specs)

    @pytest.mark.parametrize("tag", ["fig2a", "fig2b", "fig2c"])
    def test_roundtrip(self, tag):
        for s in preset_experiments(tag):
            text = json.dumps(s.to_dict())
            assert ExperimentSpec.from_dict(json.loads(text)).to_dict() == s.to_dict()

    def test_unknown(self):
        with pytest.raises(ValidationError, match="fig3"):
            preset_experiments("fig3")


class TestRun:
    def test_noiseless_single_trial(self, default_channel):
        table = run_experiment(small_spec(snr_grid_db=(np.inf,), trials=1))
        (row,) = table.rows
        assert row.failures == 0
        assert row.rmse_toa_s < 1e-8 * default_channel.toa
        assert row.crlb_rmse_s == 0.0

    def test_deterministic(self):
        a, b = run_experiment(small_spec()), run_experiment(small_spec())
        assert a.csv_text() == b.csv_text()
        assert a.rows == b.rows

    def test_thread_count_does_not_matter(self):
        assert run_experiment(small_spec(), n_jobs=1).csv_text() == \
            run_experiment(small_spec(), n_jobs=3).csv_text()

    def test_crlb_column_independent_of_seed(self):
        a, b = run_experiment(small_spec(seed=1)), run_experiment(small_spec(seed=2))
        assert [r.crlb_rmse_s for r in a.rows] == [r.crlb_rmse_s for r in b.rows]
        assert [r.rmse_toa_s for r in a.rows] != [r.rmse_toa_s for r in b.rows]

    def test_crlb_table_scaling(self):
        tab = crlb_table(small_spec(snr_grid_db=(0.0, 10.0, 20.0)))
        np.testing.assert_allclose(tab[1] / tab[0], 10 ** -0.5, rtol=1e-12)
        assert tab.shape == (3, 8)

    def test_failures_excluded(self, default_channel):
        table = run_experiment(small_spec(snr_grid_db=(-5.0,), trials=40, seed=3))
        rec, row = table.records[0], table.rows[0]
        assert row.failures == int(rec.failed.sum()) > 0
        ok = ~rec.failed
        expected = np.sqrt(np.mean((rec.toa[ok] - default_channel.toa) ** 2))
        assert row.rmse_toa_s == pytest.approx(expected, rel=1e-15)

    def test_high_snr_near_bound(self):
        table = run_experiment(small_spec(snr_grid_db=(35.0, 40.0), trials=500))
        for row in table.rows:
            assert row.failures == 0
            assert 0.8 * row.crlb_rmse_s < row.rmse_toa_s < 2 * row.crlb_rmse_s

    def test_single_band_mode(self):
        spec = small_spec(estimator_mode="single-band", snr_grid_db=(30.0,))
        table = run_experiment(spec)
        multi = run_experiment(small_spec(snr_grid_db=(30.0,)))
        assert table.rows[0].crlb_rmse_s > multi.rows[0].crlb_rmse_s
        assert table.metadata["true_cycles"] is None
        assert np.all(table.records[0].cycles == -1)

    def test_weighted_mode_runs(self):
        table = run_experiment(small_spec(estimator_mode="multiband-weighted"))
        assert all(np.isfinite(r.rmse_toa_s) for r in table.rows)

    def test_custom_scenario(self):
        ch = MultipathChannel.from_arrays([1.0, 0.4], [12e-9, 30e-9])
        table = run_experiment(small_spec(scenario=ch.to_dict(), trials=5))
        assert table.rows[0].scenario == "custom"
        assert table.per_path_rmse.shape == (2, 2)

    def test_metadata(self):
        spec = small_spec(trials=3)
        meta = run_experiment(spec).metadata
        assert meta["spec_sha256"] == spec.sha256()
        assert meta["trials"] == 3 and meta["seed"] == spec.seed
        assert meta["version"].startswith("0.1.0")
        assert meta["true_cycles"] == true_cycles(spec) == 20
        assert ExperimentSpec.from_dict(meta["spec"]) == spec


class TestOutput:
    def test_csv_roundtrip(self, tmp_path):
        table = run_experiment(small_spec(trials=4))
        csv_path, meta_path = table.write(tmp_path / "out", "x_y")
        lines = csv_path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert ResultTable.read_csv(csv_path) == table.rows
        assert json.loads(meta_path.read_text())["trials"] == 4

    def test_nan_rmse_written(self, tmp_path):
        from multires_toa.bench import ResultRow
        table = ResultTable([ResultRow(0.0, float("nan"), 1e-12, 5, "S1")], {})
        assert table.csv_text().splitlines()[1] == "0.0,nan,1e-12,5,S1"

    def test_read_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n")
        with pytest.raises(ConfigError):
            ResultTable.read_csv(p)


@pytest.mark.parametrize("env, expected", [({}, 1), ({"MULTIRES_TOA_THREADS": "3"}, 3),
                                           ({"MULTIRES_TOA_THREADS": " "}, 1)])
def test_thread_count(env, expected):
    assert thread_count(env) == expected


def test_thread_count_auto_and_invalid():
    assert thread_count({"MULTIRES_TOA_THREADS": "0"}) >= 1
    for bad in ("-1", "many"):
        with pytest.raises(ConfigError):
            thread_count({"MULTIRES_TOA_THREADS": bad})
