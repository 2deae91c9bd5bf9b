import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from varlatent import cli
from varlatent.ingest import SYNTHETIC_NAMES, load_csv
from varlatent.latent import read_latent_csv
from varlatent.metrics import METRICS
from varlatent.vae import TrainingError

FAST = ["--epochs", "2", "--train-copies", "3", "--monitor-copies", "1"]


def test_synthetic_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["synthetic", "--seed", "3", "--out", str(a)]) == 0
    assert cli.main(["synthetic", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    t = load_csv(a)
    assert t.shape == (250, 65) and t.variable_names == list(SYNTHETIC_NAMES)


def test_env_seed_default(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("VARLATENT_SEED", "3")
    cli.main(["synthetic", "--out", str(a)])
    cli.main(["synthetic", "--seed", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("VARLATENT_SEED", "x")
    assert cli.main(["synthetic", "--out", str(a)]) == cli.EXIT_USAGE


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = cli.main(["run", "--synthetic", "0", "--metric", "spearman_r2", "--groups", "prefix",
                     "--pair", "N_E_1", "N_S_1p9", "--seed", "2", "--out", str(out), *FAST])
    assert code == 0
    return out


def test_run_outputs(run_dir):
    lt = read_latent_csv(run_dir / "latent.csv")
    assert len(lt) == 65 and lt.groups[0] == "N_E"
    inp = load_csv(run_dir / "input.csv", id_column=True)
    assert inp.shape == (65, 65) and inp.row_ids == list(SYNTHETIC_NAMES)
    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    assert len(report["abs_corr"]) == 3
    assert report["config"]["train"]["seed"] == 2
    assert report["config"]["flow"]["metric"] == "spearman_r2"
    root = ET.parse(run_dir / "plots" / "latent.svg").getroot()
    assert root.tag.endswith("svg")
    assert (run_dir / "model.npz").exists()


def test_run_is_deterministic(run_dir, tmp_path):
    cli.main(["run", "--synthetic", "0", "--metric", "spearman_r2", "--groups", "prefix",
              "--pair", "N_E_1", "N_S_1p9", "--seed", "2", "--out", str(tmp_path), *FAST])
    assert (tmp_path / "latent.csv").read_bytes() == (run_dir / "latent.csv").read_bytes()


def test_run_from_config(tmp_path):
    (tmp_path / "syn.csv").write_text("", encoding="utf-8")
    cli.main(["synthetic", "--out", str(tmp_path / "syn.csv")])
    cfg = {"flow": {"flow": "stats", "train_copies": 3, "monitor_copies": 1},
           "train": {"epochs": 2, "runs": 2}, "data": {"csv": "syn.csv"}}
    (tmp_path / "c.json").write_text(json.dumps(cfg), encoding="utf-8")
    assert cli.main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text(encoding="utf-8"))
    assert report["config"]["train"]["runs"] == 2 and len(report["abs_corr"]) == 2


def test_invalid_metric_lists_tags(tmp_path, capsys):
    code = cli.main(["run", "--synthetic", "0", "--metric", "nope", "--out", str(tmp_path)])
    assert code == cli.EXIT_USAGE
    err = capsys.readouterr().err
    assert "metric" in err and all(m in err for m in METRICS)


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--flow", "bogus", "--out", "x"])
    assert exc.value.code == cli.EXIT_USAGE


def test_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,zz\n", encoding="utf-8")
    assert cli.main(["metrics", "--data", str(bad), "--out", str(tmp_path / "m.csv")]) == cli.EXIT_DATA
    assert cli.main(["metrics", "--data", str(tmp_path / "none.csv"), "--out", "m.csv"]) == cli.EXIT_DATA


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise TrainingError("non-finite loss at epoch 1, batch 0")

    monkeypatch.setattr(cli, "represent_variables", boom)
    assert cli.main(["run", "--synthetic", "0", "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_metrics_outputs(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["metrics", "--synthetic", "0", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 2080 and lines[0].split(",")[2:] == list(METRICS)
    assert cli.main(["metrics", "--synthetic", "0", "--matrix", "kendall", "--out", str(out)]) == 0
    assert load_csv(out, id_column=True).shape == (65, 65)
    assert cli.main(["metrics", "--synthetic", "0", "--features", "stats", "--out", str(out)]) == 0
    assert load_csv(out, id_column=True).shape == (65, 5)


def test_encode_decode_gradmap(tmp_path):
    syn = tmp_path / "syn.csv"
    cli.main(["synthetic", "--out", str(syn)])
    lat, model = tmp_path / "obs.csv", tmp_path / "obs.npz"
    assert cli.main(["encode", "--data", str(syn), "--out", str(lat), "--save-model", str(model),
                     "--runs", "1", *FAST]) == 0
    again = tmp_path / "obs2.csv"
    assert cli.main(["encode", "--data", str(syn), "--model", str(model), "--out", str(again)]) == 0
    a, b = read_latent_csv(lat), read_latent_csv(again)
    assert np.allclose(a.mu, b.mu, atol=1e-6)
    dec = tmp_path / "dec.csv"
    assert cli.main(["decode", "--model", str(model), "--latent", str(lat), "--out", str(dec)]) == 0
    d = load_csv(dec, id_column=True)
    assert d.shape == (250, 65) and d.variable_names == list(SYNTHETIC_NAMES)

    gm = tmp_path / "gm"
    assert cli.main(["gradmap", "--data", str(syn), "--latent", str(lat), "--variable", "N_E_1",
                     "--pair", "N_E_1", "N_S_1n5", "--out", str(gm)]) == 0
    field = load_csv(gm / "field_N_E_1.csv", id_column=True)
    assert field.shape == (35, 35)
    series = (gm / "cp_N_E_1__N_S_1n5_series.csv").read_text(encoding="utf-8").splitlines()
    assert len(series) == 251
    for svg in gm.glob("*.svg"):
        ET.parse(svg)
    assert cli.main(["gradmap", "--data", str(syn), "--latent", str(lat), "--variable", "zz",
                     "--out", str(gm)]) == cli.EXIT_DATA
