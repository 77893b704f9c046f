import json

import numpy as np
import pytest

from p2m.cli import main
from p2m.pixel_sim import AdcModel, WeightBanks, identity
from p2m.pixel_sim import io as sim_io
from p2m.techlib import LayerSpec

from conftest import ideal_forward

TECH = {
    "adcs": {"adc8": {"bits": 8, "t_adc": "1us", "e_adc": 0},
             "adc12": {"bits": 12, "t_adc": "1us", "e_adc": 0}},
    "pixels": {"px": {"t_exp": "50us", "e_px": 0, "cis_pixel_pitch": "1.1um"}},
    "stack": {"node": "n28", "bond": "tsv", "io": "lvds", "adc": "adc8", "pixel": "px"},
    "baseline": {"adc": "adc12"},
}

LAYER = {"k": 3, "s": 3, "c_o": 32, "h_i": 200, "w_i": 200}


@pytest.fixture()
def tech_file(tmp_path):
    path = tmp_path / "tech.json"
    path.write_text(json.dumps(TECH))
    return path


@pytest.fixture()
def layer_file(tmp_path):
    path = tmp_path / "layer.json"
    path.write_text(json.dumps(LAYER))
    return path


@pytest.fixture()
def fixed_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


class TestEvaluate:
    def test_table_output(self, tech_file, layer_file, capsys):
        assert main(["evaluate", "--tech", str(tech_file), "--layer", str(layer_file)]) == 0
        out = capsys.readouterr().out
        assert "6.30 um" in out
        assert "bond-limited" in out

    def test_json_output(self, tech_file, layer_file, capsys):
        code = main(["evaluate", "--tech", str(tech_file), "--layer", str(layer_file),
                     "--format", "json"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        point = doc["points"][0]
        assert point["metrics"]["min_pitch_m"] == pytest.approx(6.3e-6)
        assert point["metrics"]["pitch_limiter"] == "bond-limited"
        assert doc["manifest"]["command"] == "evaluate"

    def test_bad_unit_suffix_names_token(self, tmp_path, layer_file, capsys):
        bad = dict(TECH)
        bad["process_nodes"] = {"weird": {"cpp": "190nx", "mp": "140nm"}}
        tech = tmp_path / "bad.json"
        tech.write_text(json.dumps(bad))
        assert main(["evaluate", "--tech", str(tech), "--layer", str(layer_file)]) == 2
        assert "190nx" in capsys.readouterr().err

    def test_missing_file_exit_2_with_path(self, layer_file, capsys):
        assert main(["evaluate", "--tech", "/nope/tech.json", "--layer", str(layer_file)]) == 2
        assert "/nope/tech.json" in capsys.readouterr().err

    def test_strict_infeasible_exit_3(self, tmp_path, layer_file):
        doc = dict(TECH)
        tech = tmp_path / "t.json"
        tech.write_text(json.dumps(doc))
        bad_layer = tmp_path / "bad_layer.json"
        bad_layer.write_text(json.dumps({**LAYER, "h_i": 4, "w_i": 4, "binning": 4}))
        assert main(["evaluate", "--tech", str(tech), "--layer", str(bad_layer), "--strict"]) == 3

    def test_baseline_flag_overrides_tech_section(self, tmp_path, layer_file, capsys):
        tech = tmp_path / "tech.json"
        tech.write_text(json.dumps(TECH))
        # a slower baseline ADC slows the conventional reference, lowering
        # the P2M-vs-conventional latency ratio
        override = {
            "adcs": {"adc12slow": {"bits": 12, "t_adc": "50us"}},
            "baseline": {"adc": "adc12slow"},
        }
        basefile = tmp_path / "baseline.json"
        basefile.write_text(json.dumps(override))

        def norm_latency(extra):
            assert main(["evaluate", "--tech", str(tech), "--layer", str(layer_file),
                         "--format", "json", *extra]) == 0
            doc = json.loads(capsys.readouterr().out)
            return doc["points"][0]["metrics"]["norm_latency"]

        assert norm_latency(["--baseline", str(basefile)]) < norm_latency([])

    def test_tech_path_env_resolves_relative_names(self, tmp_path, layer_file, monkeypatch):
        libdir = tmp_path / "libs"
        libdir.mkdir()
        (libdir / "shared.json").write_text(json.dumps(TECH))
        monkeypatch.setenv("P2M_TECH_PATH", str(libdir))
        monkeypatch.chdir(tmp_path)
        assert main(["evaluate", "--tech", "shared.json", "--layer", str(layer_file)]) == 0


class TestSweep:
    def make_spec(self, tmp_path, tech_file):
        spec = {
            "tech_library": "tech.json",
            "stacks": [{"name": "n28-tsv", "node": "n28", "bond": "tsv", "io": "lvds",
                        "adc": "adc8", "pixel": "px"}],
            "baseline": {"adc": "adc12"},
            "input_dims": [200, 200],
            "layer_grid": {"k": [3], "s": [1, 3], "c_o": [8, 64]},
        }
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(spec))
        return path

    def test_writes_all_artifacts(self, tmp_path, tech_file, fixed_epoch):
        spec = self.make_spec(tmp_path, tech_file)
        out = tmp_path / "out"
        assert main(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"points.csv", "points.json", "fig_area.csv", "fig_br.csv",
                         "fig_latency.csv", "fig_energy.csv"}
        csv_text = (out / "points.csv").read_text()
        assert csv_text.startswith("# command: sweep")
        assert json.loads((out / "points.json").read_text())["manifest"]["seed"] is None

    def test_rerun_reproduces_identical_bytes(self, tmp_path, tech_file, fixed_epoch):
        spec = self.make_spec(tmp_path, tech_file)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        # identical inputs except the output path; compare content files
        assert main(["sweep", "--spec", str(spec), "--out", str(out1), "--jobs", "3"]) == 0
        assert main(["sweep", "--spec", str(spec), "--out", str(out2)]) == 0
        a = (out1 / "points.csv").read_text().replace(str(out1), "OUT")
        b = (out2 / "points.csv").read_text().replace(str(out2), "OUT")
        assert a == b

    def test_accuracy_join_lands_in_output(self, tmp_path, tech_file, data_dir):
        spec = {
            "tech_library": "tech.json",
            "stacks": [{"name": "s", "node": "n28", "bond": "tsv", "io": "lvds",
                        "adc": "adc8", "pixel": "px"}],
            "baseline": {"adc": "adc12"},
            "input_dims": [200, 200],
            "layer_grid": {"k": [3], "s": [5], "c_o": [16]},
        }
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(spec))
        out = tmp_path / "out"
        code = main(["sweep", "--spec", str(path), "--out", str(out),
                     "--accuracy", str(data_dir / "accuracy_sample.csv")])
        assert code == 0
        doc = json.loads((out / "points.json").read_text())
        assert doc["points"][0]["accuracy"] == [
            {"dataset": "bdd100k", "metric": "delta_map", "value": -0.028}
        ]

    def test_unwritable_dir_exit_2(self, tmp_path, tech_file):
        spec = self.make_spec(tmp_path, tech_file)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a dir")
        assert main(["sweep", "--spec", str(spec), "--out", str(blocker)]) == 2


class TestPareto:
    def write_points(self, tmp_path, tech_file):
        spec = TestSweep().make_spec(tmp_path, tech_file)
        out = tmp_path / "out"
        assert main(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
        return out / "points.csv"

    def test_front_extraction(self, tmp_path, tech_file, capsys):
        points = self.write_points(tmp_path, tech_file)
        front = tmp_path / "front.csv"
        code = main(["pareto", "--points", str(points),
                     "--objectives", "norm_energy:min,min_pitch_m:min,br:max",
                     "--out", str(front)])
        assert code == 0
        assert "kept" in capsys.readouterr().out
        rows = [l for l in front.read_text().splitlines()
                if l and not l.startswith("#")]
        assert rows[0].split(",")[0] == "stack"
        assert len(rows) >= 2  # header + at least one survivor

    def test_dominated_pair_keeps_one(self, tmp_path, tech_file, capsys):
        points = self.write_points(tmp_path, tech_file)
        code = main(["pareto", "--points", str(points), "--objectives", "norm_energy:min"])
        assert code == 0
        assert "kept 1 of" in capsys.readouterr().out

    def test_unknown_metric_lists_valid(self, tmp_path, tech_file, capsys):
        points = self.write_points(tmp_path, tech_file)
        assert main(["pareto", "--points", str(points), "--objectives", "watts:min"]) == 2
        err = capsys.readouterr().err
        assert "watts" in err and "norm_energy" in err


class TestSimulate:
    def setup_inputs(self, tmp_path, k=3, s=1, c_o=2, h=8, w=8, seed=9):
        rng = np.random.default_rng(seed)
        layer = {"k": k, "s": s, "c_o": c_o, "h_i": h, "w_i": w}
        (tmp_path / "layer.json").write_text(json.dumps(layer))
        weights = rng.uniform(-1, 1, (c_o, k, k, 3))
        doc = {
            "shape": list(weights.shape),
            "weights": weights.tolist(),
            "rram": {"levels": 2**20, "w_max": 1.0},
        }
        (tmp_path / "weights.json").write_text(json.dumps(doc))
        (tmp_path / "adc.json").write_text(json.dumps({"bits": 8, "full_scale": float(3 * k * k)}))
        image = rng.random((h, w, 3))
        (tmp_path / "img.ppm").write_bytes(sim_io.array_to_ppm(image))
        return tmp_path

    def test_zero_image_gives_zero_activations(self, tmp_path):
        self.setup_inputs(tmp_path)
        (tmp_path / "img.ppm").write_bytes(sim_io.array_to_ppm(np.zeros((8, 8, 3))))
        out = tmp_path / "sim"
        code = main(["simulate", "--image", str(tmp_path / "img.ppm"),
                     "--weights", str(tmp_path / "weights.json"),
                     "--layer", str(tmp_path / "layer.json"),
                     "--adc", str(tmp_path / "adc.json"), "--out", str(out)])
        assert code == 0
        counts = sim_io.read_activations_binary(out / "activations.bin", 8)
        assert not counts.any()

    def test_matches_oracle_and_reports_bit_identity(self, tmp_path, capsys):
        self.setup_inputs(tmp_path)
        out = tmp_path / "sim"
        code = main(["simulate", "--image", str(tmp_path / "img.ppm"),
                     "--weights", str(tmp_path / "weights.json"),
                     "--layer", str(tmp_path / "layer.json"),
                     "--adc", str(tmp_path / "adc.json"), "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        counts = sim_io.read_activations_binary(out / "activations.bin", 8)

        image = sim_io.load_image(tmp_path / "img.ppm")
        banks = sim_io.load_weight_banks(tmp_path / "weights.json")
        layer = LayerSpec(k=3, s=1, c_o=2, h_i=8, w_i=8)
        adc = AdcModel(bits=8, full_scale=27.0)
        want = ideal_forward(image, banks.effective_weights(), banks.bn_offset,
                             layer, adc.lsb, adc.max_count)
        assert np.max(np.abs(counts - want)) <= 1

        bits = counts.size * 8
        assert f"emitted_bits {bits}" in stdout
        assert f"model_transmitted_bits {bits} [match]" in stdout
        assert f"conventional_bits {48 * 8 * 8}" in stdout

    def test_shape_mismatch_exit_2_with_shapes(self, tmp_path, capsys):
        self.setup_inputs(tmp_path)
        (tmp_path / "layer.json").write_text(
            json.dumps({"k": 3, "s": 1, "c_o": 2, "h_i": 16, "w_i": 16})
        )
        code = main(["simulate", "--image", str(tmp_path / "img.ppm"),
                     "--weights", str(tmp_path / "weights.json"),
                     "--layer", str(tmp_path / "layer.json"),
                     "--adc", str(tmp_path / "adc.json"), "--out", str(tmp_path / "sim")])
        assert code == 2
        err = capsys.readouterr().err
        assert "(16, 16, 3)" in err and "(8, 8, 3)" in err

    def test_seeded_random_image_is_reproducible(self, tmp_path, fixed_epoch):
        self.setup_inputs(tmp_path)
        args = ["simulate", "--image", "random:8x8",
                "--weights", str(tmp_path / "weights.json"),
                "--layer", str(tmp_path / "layer.json"),
                "--adc", str(tmp_path / "adc.json"), "--seed", "42"]
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "activations.bin").read_bytes() == (out2 / "activations.bin").read_bytes()
        m1 = (out1 / "activations.manifest.json").read_text().replace(str(out1), "OUT")
        m2 = (out2 / "activations.manifest.json").read_text().replace(str(out2), "OUT")
        assert m1 == m2

    def test_transfer_document_is_honored(self, tmp_path):
        self.setup_inputs(tmp_path)
        tf_doc = {"kind": "polynomial", "params": [0.0, 0.5, 0.0, 0.0], "domain": [-27, 27]}
        (tmp_path / "tf.json").write_text(json.dumps(tf_doc))
        out_full = tmp_path / "full"
        out_half = tmp_path / "half"
        base = ["simulate", "--image", str(tmp_path / "img.ppm"),
                "--weights", str(tmp_path / "weights.json"),
                "--layer", str(tmp_path / "layer.json"),
                "--adc", str(tmp_path / "adc.json")]
        assert main(base + ["--out", str(out_full)]) == 0
        assert main(base + ["--transfer", str(tmp_path / "tf.json"), "--out", str(out_half)]) == 0
        full = sim_io.read_activations_binary(out_full / "activations.bin", 8)
        half = sim_io.read_activations_binary(out_half / "activations.bin", 8)
        assert np.all(half <= full)
        assert half.sum() < full.sum()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
