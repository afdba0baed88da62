import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasecov import io as pio
from phasecov.cli import main
from phasecov.covariance import estimate_covariance
from phasecov.errors import ConfigError, FormatError
from phasecov.graph import build_foveal_edges, model_preset
from phasecov.grid import white_noise


class TestFieldFile:
    def test_round_trip_real(self, tmp_path):
        x = white_noise(16, 1.0, 0)
        path = tmp_path / "x.phkf"
        pio.write_field(path, x)
        back = pio.read_field(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, x)

    def test_round_trip_complex(self, tmp_path):
        x = white_noise(8, 1.0, 1) + 1j * white_noise(8, 1.0, 2)
        path = tmp_path / "x.phkf"
        pio.write_field(path, x)
        assert np.array_equal(pio.read_field(path), x)

    def test_bit_exact_bytes(self, tmp_path):
        x = white_noise(16, 1.0, 3)
        p1 = tmp_path / "a.phkf"
        p2 = tmp_path / "b.phkf"
        pio.write_field(p1, x)
        pio.write_field(p2, x)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.phkf"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError):
            pio.read_field(path)

    def test_rejects_bad_version(self, tmp_path):
        path = tmp_path / "bad.phkf"
        good = tmp_path / "good.phkf"
        pio.write_field(good, np.zeros((4, 4)))
        data = bytearray(good.read_bytes())
        data[4] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError):
            pio.read_field(path)

    def test_rejects_truncated_payload(self, tmp_path):
        good = tmp_path / "good.phkf"
        pio.write_field(good, np.zeros((4, 4)))
        bad = tmp_path / "bad.phkf"
        bad.write_bytes(good.read_bytes()[:-8])
        with pytest.raises(FormatError):
            pio.read_field(bad)

    @given(side=st.integers(2, 4).map(lambda p: 2 ** p),
           seed=st.integers(0, 2 ** 32))
    @settings(max_examples=10, deadline=None)
    def test_round_trip_any_side(self, side, seed, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("fields")
        x = white_noise(side, 2.0, seed)
        pio.write_field(tmp / "x.phkf", x)
        assert np.array_equal(pio.read_field(tmp / "x.phkf"), x)


class TestTableFile:
    def test_round_trip(self, tmp_path):
        spec = model_preset("B", J=2, Q=4)
        bank_side = 16
        from phasecov.wavelets import build_bump_bank

        bank = build_bump_bank(bank_side, spec.J, spec.Q)
        edges = build_foveal_edges(spec)
        table = estimate_covariance(white_noise(bank_side, 1.0, 6), edges, spec, bank)
        path = tmp_path / "t.phkt"
        pio.write_table(path, table)
        back = pio.read_table(path)
        assert back.cov == table.cov
        assert back.means == table.means
        assert back.diag == table.diag
        assert back.group == table.group

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.phkt"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(FormatError):
            pio.read_table(path)


class TestConfig:
    def test_parse_preset(self):
        cfg = pio.parse_config({"model": {"name": "B", "J": 3, "Q": 8}})
        assert cfg["spec"].name == "B"
        assert cfg["spec"].J == 3
        assert cfg["spec"].k_max == 1

    def test_unknown_top_key_rejected(self):
        with pytest.raises(ConfigError):
            pio.parse_config({"model": {"name": "A"}, "bogus": 1})

    def test_unknown_model_key_rejected(self):
        with pytest.raises(ConfigError):
            pio.parse_config({"model": {"name": "A", "window": 3}})

    def test_unknown_group_key_rejected(self):
        with pytest.raises(ConfigError):
            pio.parse_config({"model": {"name": "A", "group": {"mirror": True}}})

    def test_spec_round_trip(self):
        spec = model_preset("C", J=3, Q=8)
        doc = pio.spec_to_json(spec)
        back = pio.parse_config(doc)["spec"]
        assert back.name == spec.name
        assert back.J == spec.J
        assert back.delta_ell == spec.delta_ell
        assert back.optimizer.max_iter == spec.optimizer.max_iter

    def test_seed_and_restart_overrides(self):
        cfg = pio.parse_config({"model": {"name": "B"}, "seed": 11, "restarts": 3})
        assert cfg["spec"].optimizer.seed == 11
        assert cfg["spec"].optimizer.restarts == 3


class TestPgm:
    def test_constant_field(self, tmp_path):
        path = tmp_path / "c.pgm"
        pio.export_pgm(np.full((8, 8), 2.5), path)
        side = json.loads((tmp_path / "c.pgm.json").read_text())
        assert side["min"] == side["max"] == 2.5
        back = pio.import_pgm(path)
        assert np.allclose(back, 2.5)

    def test_round_trip_within_quantization(self, tmp_path):
        x = white_noise(16, 1.0, 7)
        path = tmp_path / "x.pgm"
        pio.export_pgm(x, path)
        back = pio.import_pgm(path)
        bound = (x.max() - x.min()) / 65535.0
        assert np.max(np.abs(back - x)) <= 0.5 * bound + 1e-12

    def test_format_arithmetic(self, tmp_path):
        x = white_noise(256, 1.0, 8)
        path = tmp_path / "x.pgm"
        pio.export_pgm(x, path)
        data = path.read_bytes()
        header = f"P5\n256 256\n65535\n".encode()
        assert data.startswith(header)
        assert len(data) == len(header) + 131072
        assert len(header.split()) == 4  # magic, width, height, maxval


class TestCsv:
    def test_float_format_round_trips(self):
        for v in (1 / 3, 1e-17, 123456.789, np.pi):
            assert float(pio.format_float(v)) == v

    def test_write_csv(self, tmp_path):
        path = tmp_path / "t.csv"
        pio.write_csv(path, ["a", "b"], [(1, 0.5), (2, 1 / 3)])
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b"
        assert len(lines) == 3
        assert float(lines[2].split(",")[1]) == 1 / 3


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


class TestCli:
    def _field(self, tmp_path, side=16, seed=0, name="x.phkf"):
        x = white_noise(side, 1.0, seed)
        path = tmp_path / name
        pio.write_field(path, x)
        return path, x

    def test_cov_runs_and_is_deterministic(self, tmp_path, capsys):
        path, _ = self._field(tmp_path)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        out1 = tmp_path / "out1"
        out2 = tmp_path / "out2"
        assert main(["cov", str(path), "--config", cfg, "--out", str(out1)]) == 0
        assert main(["cov", str(path), "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "table.phkt").read_bytes() == (out2 / "table.phkt").read_bytes()
        text = capsys.readouterr().out
        assert "|E_G|/d" in text

    def test_cov_reports_model_a_ratio(self, tmp_path, capsys):
        # the full-size count check lives in the acceptance suite; here the
        # summary arithmetic on a small grid
        path, _ = self._field(tmp_path, side=16)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "A", "J": 2, "Q": 4}})
        assert main(["cov", str(path), "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        summary = (tmp_path / "o" / "summary.txt").read_text()
        n_edges = int(summary.split("|E_G| = ")[1].split("\n")[0])
        ratio = float(summary.split("|E_G|/d = ")[1].split("\n")[0])
        assert ratio == pytest.approx(n_edges / 256, rel=1e-6)

    def test_missing_config_is_config_error(self, tmp_path):
        path, _ = self._field(tmp_path)
        assert main(["cov", str(path)]) == 2

    def test_bad_input_file_is_io_error(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        assert main(["cov", str(tmp_path / "missing.phkf"), "--config", cfg]) == 4

    def test_unknown_config_key_exit_code(self, tmp_path):
        path, _ = self._field(tmp_path)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B"}, "oops": 1})
        assert main(["cov", str(path), "--config", cfg]) == 2

    def test_synth_model_b_writes_everything(self, tmp_path):
        path, _ = self._field(tmp_path, seed=1)
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "B", "J": 2, "Q": 4},
            "optimizer": {"max_iter": 15},
        })
        out = tmp_path / "synth"
        code = main(["synth", str(path), "--config", cfg, "--out", str(out),
                     "--restarts", "2", "--seed", "5"])
        assert code == 0
        assert (out / "sample_000.phkf").exists()
        assert (out / "sample_001.phkf").exists()
        assert (out / "losses.csv").read_text().startswith("restart,iterations,loss")
        assert (out / "loss_curves.csv").exists()
        best = (out / "best.txt").read_text().strip()
        assert best.startswith("sample_")

    def test_synth_seed_reproducible(self, tmp_path):
        path, _ = self._field(tmp_path, seed=2)
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "B", "J": 2, "Q": 4},
            "optimizer": {"max_iter": 10},
        })
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["synth", str(path), "--config", cfg, "--out", str(out),
                         "--restarts", "1", "--seed", "9"]) == 0
            outs.append((out / "sample_000.phkf").read_bytes())
        assert outs[0] == outs[1]

    def test_synth_parallel_matches_serial(self, tmp_path):
        path, _ = self._field(tmp_path, seed=12)
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "B", "J": 2, "Q": 4},
            "optimizer": {"max_iter": 8},
        })
        outs = []
        for name, threads in (("serial", "1"), ("parallel", "2")):
            out = tmp_path / name
            assert main(["synth", str(path), "--config", cfg, "--out", str(out),
                         "--restarts", "2", "--seed", "3", "--threads", threads]) == 0
            outs.append((out / "sample_000.phkf").read_bytes()
                        + (out / "sample_001.phkf").read_bytes())
        assert outs[0] == outs[1]

    def test_synth_zero_restarts_rejected(self, tmp_path):
        path, _ = self._field(tmp_path)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        assert main(["synth", str(path), "--config", cfg, "--restarts", "0"]) == 2

    def test_synth_model_a_gaussian_route(self, tmp_path):
        path, _ = self._field(tmp_path, side=16, seed=3)
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "A", "J": 2, "Q": 4, "delta_n": 1},
        })
        out = tmp_path / "ga"
        assert main(["synth", str(path), "--config", cfg, "--out", str(out),
                     "--restarts", "2"]) == 0
        assert (out / "sample_000.phkf").exists()
        assert (out / "spectrum.phkf").exists()

    def test_gauss_fit_and_sample(self, tmp_path):
        path, _ = self._field(tmp_path, side=16, seed=4)
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "A", "J": 2, "Q": 4, "delta_n": 1},
        })
        out = tmp_path / "fit"
        assert main(["gauss-fit", str(path), "--config", cfg, "--out", str(out)]) == 0
        meta = json.loads((out / "fit.json").read_text())
        assert meta["feasible"]
        out2 = tmp_path / "samples"
        assert main(["gauss-sample", str(out / "spectrum.phkf"), "--count", "3",
                     "--out", str(out2), "--seed", "1"]) == 0
        assert (out2 / "sample_002.phkf").exists()

    def test_eval_outputs(self, tmp_path):
        refdir = tmp_path / "ref"
        moddir = tmp_path / "mod"
        refdir.mkdir()
        moddir.mkdir()
        for i in range(3):
            pio.write_field(refdir / f"r{i}.phkf", white_noise(16, 1.0, 10 + i))
            pio.write_field(moddir / f"m{i}.phkf", white_noise(16, 1.0, 20 + i))
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "B", "J": 2, "Q": 4},
            "evaluation": {"j_list": [1], "q_list": [1, 2], "a_max": 2},
        })
        out = tmp_path / "eval"
        assert main(["eval", str(refdir), str(moddir), "--config", cfg,
                     "--out", str(out)]) == 0
        errors = (out / "errors.csv").read_text().splitlines()
        assert errors[0] == "metric,j,q,mean,std"
        assert len(errors) == 1 + 2 + 1 * 2  # model, empirical + (j, q) grid
        profiles = (out / "profiles.csv").read_text().splitlines()
        assert profiles[0] == "k,j,a,value"
        assert len(profiles) == 1 + 2 * 1 * 3

    def test_eval_identical_dirs_zero_model_error(self, tmp_path, capsys):
        refdir = tmp_path / "same"
        refdir.mkdir()
        for i in range(3):
            pio.write_field(refdir / f"r{i}.phkf", white_noise(16, 1.0, 30 + i))
        cfg = write_config(tmp_path / "cfg.json", {
            "model": {"name": "B", "J": 2, "Q": 4},
            "evaluation": {"j_list": [1], "q_list": [2], "a_max": 2},
        })
        out = tmp_path / "eval_same"
        assert main(["eval", str(refdir), str(refdir), "--config", cfg,
                     "--out", str(out)]) == 0
        rows = (out / "errors.csv").read_text().splitlines()
        model_row = [r for r in rows if r.startswith("model,")][0]
        assert float(model_row.split(",")[3]) == 0.0
        structure_rows = [r for r in rows if r.startswith("structure,")]
        assert all(float(r.split(",")[3]) == 0.0 for r in structure_rows)

    def test_eval_missing_dir_is_io_error(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        assert main(["eval", str(tmp_path / "none"), str(tmp_path / "none2"),
                     "--config", cfg]) == 4

    def test_gauss_test_verdicts(self, tmp_path, capsys):
        path, _ = self._field(tmp_path, side=32, seed=5)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        assert main(["gauss-test", str(path), "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "consistent with Gaussian" in out

    def test_gauss_test_flags_spikes(self, tmp_path, capsys):
        x = np.zeros((32, 32))
        x[3, 7] = 40.0
        x[20, 11] = -32.0
        x[9, 28] = 25.0
        path = tmp_path / "spikes.phkf"
        pio.write_field(path, x)
        cfg = write_config(tmp_path / "cfg.json", {"model": {"name": "B", "J": 2, "Q": 4}})
        assert main(["gauss-test", str(path), "--config", cfg]) == 0
        assert "NON-GAUSSIAN" in capsys.readouterr().out

    def test_spectrum_command(self, tmp_path):
        path, _ = self._field(tmp_path, side=16, seed=6)
        out = tmp_path / "spec"
        assert main(["spectrum", str(path), "--out", str(out)]) == 0
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "radius,log10_power"
        assert len(lines) > 2

    def test_export_command(self, tmp_path):
        path, x = self._field(tmp_path, side=16, seed=7)
        out = tmp_path / "img.pgm"
        assert main(["export", str(path), "--out", str(out)]) == 0
        back = pio.import_pgm(out)
        bound = (x.max() - x.min()) / 65535.0
        assert np.max(np.abs(back - x)) <= 0.5 * bound + 1e-12
