import json

import numpy as np
import pytest

import rirsense as rs
from rirsense.cli import main


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def column(path, name, convert=float):
    header, rows = read_csv(path)
    idx = header.index(name)
    return [convert(row[idx]) for row in rows]


def synth(tmp_path, generator, *flags):
    out = tmp_path / f"fix_{generator}_{abs(hash(flags)) % 10**6}"
    code = main(["synth", generator, "--out-dir", str(out), *flags])
    assert code == 0
    return out


class TestSynthCommand:
    def test_writes_fixture_files(self, tmp_path):
        out = synth(tmp_path, "mixing", "--a", "0.7", "--rt", "0.2", "--fs", "16000", "--snr", "60", "--seed", "5")
        assert (out / "x.wav").exists() and (out / "y.wav").exists()
        assert (out / "session.manifest").exists()
        truth = json.loads((out / "truth.json").read_text())
        assert truth["kind"] == "mixing"
        assert truth["gamma_ir_target"] == pytest.approx(0.49)

    def test_same_seed_bit_identical_wavs(self, tmp_path):
        a = synth(tmp_path, "jitter", "--rt", "0.2", "--fs", "16000", "--seed", "3", "--drift", "1e-4")
        b_dir = tmp_path / "again"
        main(["synth", "jitter", "--out-dir", str(b_dir), "--rt", "0.2", "--fs", "16000", "--seed", "3", "--drift", "1e-4"])
        assert (a / "x.wav").read_bytes() == (b_dir / "x.wav").read_bytes()
        assert (a / "y.wav").read_bytes() == (b_dir / "y.wav").read_bytes()

    def test_decay_fixture(self, tmp_path):
        out = synth(tmp_path, "decay", "--rt", "0.3", "--fs", "16000", "--seed", "2")
        assert (out / "rir.wav").exists()

    def test_unknown_generator_lists_available(self, tmp_path, capsys):
        code = main(["synth", "fantasy", "--out-dir", str(tmp_path / "x")])
        assert code == 1
        err = capsys.readouterr().err
        assert "mixing" in err and "occlusion" in err


class TestCoherenceCommand:
    def test_self_pair_gives_unit_gamma(self, tmp_path):
        fix = synth(tmp_path, "decay", "--rt", "0.2", "--fs", "16000", "--seed", "1")
        manifest = tmp_path / "self.manifest"
        manifest.write_text(
            "schema = 1\npairing = explicit\n\n[entries]\n"
            f"{fix / 'rir.wav'} 0 S R c 1\n{fix / 'rir.wav'} 0 S R c 2\n"
            "\n[pairs]\nc:R:1 c:R:2\n"
        )
        out = tmp_path / "coh"
        assert main(["coherence", "--manifest", str(manifest), "--out-dir", str(out)]) == 0
        csvs = sorted(out.glob("coherence_*.csv"))
        assert len(csvs) == 1
        header, rows = read_csv(csvs[0])
        assert header == ["time_s", "gamma", "gamma_expected", "gamma_ir", "defined_flag"]
        gammas = [float(r[1]) for r in rows if r[4] == "1"]
        assert gammas and all(abs(g - 1.0) <= 1e-9 for g in gammas)

    def test_mixing_fixture_gamma_ir_median(self, tmp_path):
        fix = synth(
            tmp_path, "mixing", "--a", "0.7", "--rt", "0.25", "--duration", "0.3",
            "--fs", "16000", "--snr", "60", "--seed", "12",
        )
        out = tmp_path / "coh2"
        assert main(["coherence", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out)]) == 0
        csvs = sorted(out.glob("coherence_*.csv"))
        gamma_ir = np.array(column(csvs[0], "gamma_ir"))
        median = np.nanmedian(gamma_ir)
        assert median == pytest.approx(0.49, abs=0.05)

    def test_missing_file_exit_2_names_path(self, tmp_path, capsys):
        manifest = tmp_path / "bad.manifest"
        manifest.write_text("schema = 1\n\n[entries]\nmissing.wav 0 S R c 1\n")
        code = main(["coherence", "--manifest", str(manifest), "--out-dir", str(tmp_path / "o")])
        assert code == 2
        assert "missing.wav" in capsys.readouterr().err

    def test_report_written_and_echoes_config(self, tmp_path):
        fix = synth(tmp_path, "mixing", "--rt", "0.2", "--fs", "16000", "--seed", "4")
        out = tmp_path / "coh3"
        main([
            "coherence", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out),
            "--window-ms", "12.5",
        ])
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["window_ms"] == 12.5
        assert report["command"] == "coherence"
        assert report["pairs"][0]["gamma_rating"] >= 0.0


class TestSensitivityCommand:
    def test_default_bands_give_19_rows_per_pair(self, tmp_path):
        fix = synth(tmp_path, "mixing", "--a", "1.0", "--rt", "0.15", "--fs", "48000", "--seed", "3")
        out = tmp_path / "sens"
        assert main(["sensitivity", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out)]) == 0
        header, rows = read_csv(out / "sensitivity.csv")
        assert header == ["condition_id", "pair_id", "band_center_hz", "gamma_rating", "truncation_s", "status"]
        assert len(rows) == 19
        centers = [row[2] for row in rows]
        assert centers == [repr(float(c)) for c in range(1000, 20000, 1000)]

    def test_self_pair_rates_zero(self, tmp_path):
        fix = synth(tmp_path, "decay", "--rt", "0.15", "--fs", "48000", "--seed", "6")
        manifest = tmp_path / "self2.manifest"
        manifest.write_text(
            "schema = 1\npairing = explicit\n\n[entries]\n"
            f"{fix / 'rir.wav'} 0 S R c 1\n{fix / 'rir.wav'} 0 S R c 2\n"
            "\n[pairs]\nc:R:1 c:R:2\n"
        )
        out = tmp_path / "sens2"
        main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(out)])
        ratings = column(out / "sensitivity.csv", "gamma_rating")
        assert all(r <= 1e-9 for r in ratings)

    def test_broadband_token_and_medians(self, tmp_path):
        fix = synth(tmp_path, "absorption", "--rt", "0.3", "--duration", "0.4", "--fs", "16000",
                    "--change-time", "0.02", "--seed", "7")
        out = tmp_path / "sens3"
        assert main([
            "sensitivity", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out),
            "--bands", "broadband,2000/1000",
        ]) == 0
        header, rows = read_csv(out / "sensitivity.csv")
        assert [row[2] for row in rows] == ["broadband", "2000.0"]
        broadband_rating = float(rows[0][3])
        assert broadband_rating > 0.3  # independent late fields register strongly
        mheader, mrows = read_csv(out / "sensitivity_medians.csv")
        assert mheader == ["condition_id", "band_center_hz", "gamma_rating_median", "n_pairs"]
        assert len(mrows) == 2

    def test_absorption_vs_jitter_condition_separation(self, tmp_path):
        root = tmp_path / "sep"
        root.mkdir()
        lines = ["schema = 1", "pairing = explicit", "", "[entries]"]
        pairs_rows = []
        for kind, flags in (
            ("absorption", ["--change-time", "0.02"]),
            ("jitter", ["--drift", "1e-4"]),
        ):
            fix = synth(root, kind, "--rt", "0.3", "--duration", "0.4", "--fs", "16000",
                        "--snr", "60", "--seed", "9", *flags)
            lines.append(f"{fix / 'x.wav'} 0 S R {kind} 1")
            lines.append(f"{fix / 'y.wav'} 0 S R {kind} 2")
            pairs_rows.append(f"{kind}:R:1 {kind}:R:2")
        manifest = root / "session.manifest"
        manifest.write_text("\n".join(lines) + "\n\n[pairs]\n" + "\n".join(pairs_rows) + "\n")
        out = tmp_path / "sens4"
        main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(out), "--bands", "broadband"])
        header, rows = read_csv(out / "sensitivity_medians.csv")
        by_condition = {row[0]: float(row[2]) for row in rows}
        assert by_condition["absorption"] >= 10 * by_condition["jitter"]

    def test_failed_bands_reported_with_status(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        root = tmp_path / "noise"
        root.mkdir()
        for name, seed in (("a.wav", 1), ("b.wav", 2)):
            rs.write_wav(root / name, rs.Rir(48000, np.random.default_rng(seed).standard_normal(12000)))
        manifest = root / "session.manifest"
        manifest.write_text(
            "schema = 1\npairing = explicit\n\n[entries]\n"
            "a.wav 0 S R n 1\nb.wav 0 S R n 2\n\n[pairs]\nn:R:1 n:R:2\n"
        )
        out = tmp_path / "sens5"
        code = main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(out)])
        assert code == 3  # nothing usable at all
        statuses = column(out / "sensitivity.csv", "status", convert=str)
        assert all(s == "no-usable-region" for s in statuses)


class TestTfmapCommand:
    def test_self_pair_all_ones(self, tmp_path):
        fix = synth(tmp_path, "decay", "--rt", "0.15", "--fs", "48000", "--seed", "8")
        manifest = tmp_path / "self3.manifest"
        manifest.write_text(
            "schema = 1\npairing = explicit\n\n[entries]\n"
            f"{fix / 'rir.wav'} 0 S R c 1\n{fix / 'rir.wav'} 0 S R c 2\n"
            "\n[pairs]\nc:R:1 c:R:2\n"
        )
        out = tmp_path / "tf"
        assert main(["tfmap", "--manifest", str(manifest), "--out-dir", str(out)]) == 0
        gammas = np.array(column(out / "tfmap.csv", "gamma"))
        defined = gammas[~np.isnan(gammas)]
        assert defined.size and np.allclose(defined, 1.0, atol=1e-9)

    def test_occlusion_localization_from_csv(self, tmp_path):
        fix = synth(
            tmp_path, "occlusion", "--rt", "0.15", "--duration", "0.2", "--fs", "48000",
            "--seed", "4", "--occlusion-start", "0.038", "--occlusion-length", "0.010",
        )
        out = tmp_path / "tf2"
        assert main(["tfmap", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out)]) == 0
        header, rows = read_csv(out / "tfmap.csv")
        times = np.array([float(r[0]) for r in rows])
        gammas = np.array([float(r[1 + 1]) for r in rows])
        uniq = np.unique(times)
        medians = np.array([np.nanmedian(gammas[times == t]) for t in uniq])
        # Restrict to the usable early region (the decayed tail is
        # noise-dominated and legitimately incoherent).
        usable = uniq <= 0.1
        t_min = uniq[usable][np.nanargmin(medians[usable])]
        assert abs(t_min - 0.038) <= 128 / 48000 + 1e-9

    def test_pair_index_required_when_ambiguous(self, tmp_path, capsys):
        path = tmp_path / "multi"
        path.mkdir()
        for k in (1, 2, 3):
            rs.write_wav(path / f"m{k}.wav", rs.gen_decaying_rir(0.15, 16000, 0.2, seed=k))
        manifest = path / "session.manifest"
        manifest.write_text(
            "schema = 1\npairing = reference-vs-rest\n\n[entries]\n"
            + "".join(f"m{k}.wav 0 S R c {k}\n" for k in (1, 2, 3))
        )
        code = main(["tfmap", "--manifest", str(manifest), "--out-dir", str(tmp_path / "tf3")])
        assert code == 1
        assert "pair-index" in capsys.readouterr().err


class TestDeterminismAndExitCodes:
    def test_byte_identical_reruns(self, tmp_path):
        fix = synth(tmp_path, "mixing", "--a", "0.7", "--rt", "0.2", "--fs", "16000", "--seed", "17")
        outs = []
        for name in ("run1", "run2"):
            out = tmp_path / name
            assert main(["sensitivity", "--manifest", str(fix / "session.manifest"),
                         "--out-dir", str(out), "--bands", "broadband,3000"]) == 0
            outs.append(out)
        assert (outs[0] / "sensitivity.csv").read_bytes() == (outs[1] / "sensitivity.csv").read_bytes()
        assert (outs[0] / "sensitivity_medians.csv").read_bytes() == (outs[1] / "sensitivity_medians.csv").read_bytes()

    def test_usage_error_exit_1(self, capsys):
        assert main([]) == 1
        assert main(["sensitivity"]) == 1  # missing required flags

    def test_bad_band_token_exit_1(self, tmp_path, capsys):
        fix = synth(tmp_path, "decay", "--rt", "0.2", "--fs", "16000", "--seed", "1")
        manifest = tmp_path / "m.manifest"
        manifest.write_text(
            "schema = 1\npairing = consecutive\n\n[entries]\n"
            f"{fix / 'rir.wav'} 0 S R c 1\n{fix / 'rir.wav'} 0 S R c 2\n"
        )
        code = main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(tmp_path / "o"),
                     "--bands", "nonsense"])
        assert code == 1

    def test_missing_manifest_exit_2(self, tmp_path):
        code = main(["coherence", "--manifest", str(tmp_path / "none.manifest"), "--out-dir", str(tmp_path / "o")])
        assert code == 2

    def test_report_subcommand(self, tmp_path, capsys):
        fix = synth(tmp_path, "mixing", "--rt", "0.2", "--fs", "16000", "--seed", "2")
        out = tmp_path / "rep"
        main(["coherence", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out)])
        capsys.readouterr()
        assert main(["report", str(out)]) == 0
        text = capsys.readouterr().out
        assert "coherence" in text and "window_ms" in text

    def test_jobs_flag_gives_same_output(self, tmp_path):
        path = tmp_path / "multi2"
        path.mkdir()
        for k in (1, 2, 3, 4):
            rs.write_wav(path / f"m{k}.wav", rs.gen_decaying_rir(0.15, 16000, 0.2, seed=k))
        manifest = path / "session.manifest"
        manifest.write_text(
            "schema = 1\npairing = reference-vs-rest\n\n[entries]\n"
            + "".join(f"m{k}.wav 0 S R c {k}\n" for k in (1, 2, 3, 4))
        )
        serial = tmp_path / "serial"
        threaded = tmp_path / "threaded"
        main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(serial), "--bands", "broadband"])
        main(["sensitivity", "--manifest", str(manifest), "--out-dir", str(threaded), "--bands", "broadband", "--jobs", "4"])
        assert (serial / "sensitivity.csv").read_bytes() == (threaded / "sensitivity.csv").read_bytes()

    def test_manifest_config_overridden_by_flag(self, tmp_path):
        fix = synth(tmp_path, "mixing", "--rt", "0.2", "--fs", "16000", "--seed", "2")
        manifest_text = (fix / "session.manifest").read_text()
        (fix / "session.manifest").write_text("window_ms = 25\n" + manifest_text)
        out1 = tmp_path / "m1"
        main(["coherence", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out1)])
        report1 = json.loads((out1 / "report.json").read_text())
        assert report1["config"]["window_ms"] == 25.0
        out2 = tmp_path / "m2"
        main(["coherence", "--manifest", str(fix / "session.manifest"), "--out-dir", str(out2), "--window-ms", "8"])
        report2 = json.loads((out2 / "report.json").read_text())
        assert report2["config"]["window_ms"] == 8.0
