import json

import pytest

from spiketrack import modelio
from spiketrack.cli import latency_to_plateau, main


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["init-toy", "--out", str(d / "ann.json"), "--calibration", str(d / "calib")]) == 0
    assert main(["convert", "--ann", str(d / "ann.json"), "--calibration", str(d / "calib"), "--out", str(d / "snn.json")]) == 0
    assert main(["gen-sequence", "--out", str(d / "seq"), "--seed", "3", "--frames", "5"]) == 0
    return d


def test_convert_prints_lambda_table(work, capsys):
    assert main(["convert", "--ann", str(work / "ann.json"), "--calibration", str(work / "calib"), "--out", str(work / "s2.json"), "--percentile", "100"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 + 3 and "percentile 100" in lines[0]
    snn = modelio.load_model(work / "s2.json")
    assert [float(l.split()[1]) for l in lines[1:]] == pytest.approx(list(snn.source_lambdas.lambda_per_layer), rel=1e-7)


def test_convert_errors(work, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    doc = json.loads((work / "ann.json").read_text())
    doc["layers"][0]["bias"] = "zero"
    bad.write_text(json.dumps(doc))
    assert main(["convert", "--ann", str(bad), "--calibration", str(work / "calib"), "--out", str(tmp_path / "o.json")]) == 1
    assert "layers[0].bias" in capsys.readouterr().err
    assert main(["convert", "--ann", str(work / "ann.json"), "--calibration", str(tmp_path / "none"), "--out", str(tmp_path / "o.json")]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["convert", "--ann", str(work / "ann.json"), "--calibration", str(tmp_path / "empty"), "--out", str(tmp_path / "o.json")]) == 2


def test_track_ann(work, tmp_path):
    out = tmp_path / "m.json"
    assert main(["track", "--ann", str(work / "ann.json"), "--sequence", str(work / "seq"), "--metrics", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["metrics"]["mean_center_error"] == 0.0 and "energy" not in doc


def test_track_snn_outputs(work, tmp_path):
    out = tmp_path / "m.json"
    rc = main([
        "track", "--snn", str(work / "snn.json"), "--sequence", str(work / "seq"), "--metrics", str(out),
        "--dump-response", str(tmp_path / "resp"), "--dump-spikes", str(tmp_path / "spk.txt"),
        "--energy-report", str(tmp_path / "energy.txt"),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["energy"]["run_steps"] == 20 and doc["energy"]["total_sops"] > 0
    assert len(list((tmp_path / "resp").glob("*.csv"))) == 4
    assert "SiamFC" in (tmp_path / "energy.txt").read_text()
    assert (tmp_path / "spk.txt").read_text().count("\n") > 1


def test_track_kind_mismatch(work, capsys):
    assert main(["track", "--ann", str(work / "snn.json"), "--sequence", str(work / "seq")]) == 2
    assert main(["track", "--snn", str(work / "snn.json"), "--ann", str(work / "ann.json"), "--sequence", str(work / "seq")]) == 2
    assert main(["track", "--ann", str(work / "ann.json"), "--sequence", str(work / "seq"), "--energy-report", "x"]) == 2


def test_compare_coding(work, tmp_path, capsys):
    out = tmp_path / "cc.json"
    assert main(["compare-coding", "--snn", str(work / "snn.json"), "--ann", str(work / "ann.json"), "--sequence", str(work / "seq"), "--schedules", "constant", "two_status", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["schedule"] for r in rows] == ["constant", "two_status"]
    assert all(r["agreement"] > 0 for r in rows)
    assert all(set(r["agreement_by_T"]) == {"5", "10", "20", "50", "100"} for r in rows)


def test_compare_coding_usage(work, capsys):
    base = ["compare-coding", "--snn", str(work / "snn.json"), "--sequence", str(work / "seq"), "--schedules"]
    assert main(base + ["constant"]) == 2
    assert main(base + ["constant", "rate"]) == 2
    assert "valid names" in capsys.readouterr().err


def test_bench_energy(tmp_path, capsys):
    assert main(["bench-energy", "--ops", "394000000", "--steps", "20", "--json", str(tmp_path / "e.json")]) == 0
    assert "9.85E-04" in capsys.readouterr().out
    assert json.loads((tmp_path / "e.json").read_text())["snn"]["energy_joules"] == pytest.approx(1.97e-5)
    assert main(["bench-energy"]) == 2


def test_dump_spikes(work, tmp_path, capsys):
    frame = modelio.load_sequence(work / "seq").frames[0][:, :16, :16]
    modelio.save_tensor(frame, tmp_path / "x.csv")
    assert main(["dump-spikes", "--snn", str(work / "snn.json"), "--input", str(tmp_path / "x.csv"), "--out", str(tmp_path / "s.txt"), "--T", "8"]) == 0
    for line in (tmp_path / "s.txt").read_text().splitlines():
        t, layer, c, y, x, m = line.split(",")
        assert 1 <= int(t) <= 8 and float(m) > 0


def test_config_file_and_flag_precedence(work, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("T = 6\ntau = 0\n")
    out = tmp_path / "m.json"
    assert main(["track", "--snn", str(work / "snn.json"), "--sequence", str(work / "seq"), "--config", str(cfg), "--T", "4", "--metrics", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["T"] == 4 and doc["config"]["tau"] == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("T: 6\n")
    assert main(["track", "--snn", str(work / "snn.json"), "--sequence", str(work / "seq"), "--config", str(bad)]) == 2


def test_latency_to_plateau():
    assert latency_to_plateau({5: 0.2, 10: 0.985, 20: 1.0, 50: 0.99, 100: 1.0}) == 10
    assert latency_to_plateau({5: 0.2, 10: 0.9, 20: 1.0, 50: 0.99, 100: 1.0}) == 20
    assert latency_to_plateau({5: 1.0, 10: 0.5, 20: 1.0}) == 20
