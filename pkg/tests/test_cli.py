import csv
import json
import math

import numpy as np
import pytest

from temperlevy import ModelSpec, PowerLawRosinski, bench
from temperlevy.cli import main


def write_model(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_validate_reference(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "validate"]) == 0
    out = capsys.readouterr().out
    assert "valid, eta = 1.000000" in out
    rows = read_csv(tmp_path / "identity.csv")
    assert rows[0][0] == "z" and rows[0][-1] == "defect"
    assert max(float(r[-1]) for r in rows[1:]) < 1e-6


def test_validate_divergent(tmp_path, capsys):
    m = write_model(tmp_path, "m.json", {"family": "power_law_rosinski", "alpha": 1.2, "p": 1})
    assert main(["--model", m, "--out", str(tmp_path), "validate"]) == 1
    assert "B2" in capsys.readouterr().out


def test_validate_untempered(tmp_path, capsys):
    m = write_model(tmp_path, "m.json", {"family": "user_radial", "alpha": 0.5, "q": "1"})
    assert main(["--model", m, "--out", str(tmp_path), "validate"]) == 0
    assert "eta = 0.000000" in capsys.readouterr().out


def test_bad_model_file(tmp_path):
    m = write_model(tmp_path, "m.json", {"family": "nope"})
    assert main(["--model", m, "validate"]) == 1
    assert main(["--model", str(tmp_path / "missing.json"), "validate"]) == 1


def test_sample_byte_identical(tmp_path):
    args = ["--seed", "17", "sample", "--t", "1", "--n", "300"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--out", str(a)] + args) == 0
    assert main(["--out", str(b), "--threads", "2"] + args) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert rows[0] == ["index", "value"] and len(rows) == 301
    man = json.loads((tmp_path / "a.manifest.json").read_text())
    for key in ("seed", "spec_hash", "proposals_used", "accepted", "wall_time"):
        assert key in man
    assert man["accepted"] == 300 and man["seed"] == 17


def test_sample_methods(tmp_path):
    tw = write_model(tmp_path, "tw.json", {"family": "tweedie", "alpha": 0.5, "a": 1, "c": 1})
    for method in ("tweedie", "inversion"):
        out = tmp_path / f"{method}.csv"
        assert main(["--model", tw, "--out", str(out), "sample", "--n", "50", "--method", method]) == 0
        values = np.array([float(r[1]) for r in read_csv(out)[1:]])
        assert values.size == 50 and np.all(values >= 0)
    # the tweedie shortcut needs a tweedie model
    assert main(["--out", str(tmp_path), "sample", "--n", "5", "--method", "tweedie"]) == 1


def test_path(tmp_path):
    assert main(["--out", str(tmp_path), "path", "--dt", "1", "--n-steps", "12"]) == 0
    rows = read_csv(tmp_path / "path.csv")
    assert rows[0] == ["k", "time", "value"]
    assert [float(r[1]) for r in rows[1:]] == [float(k) for k in range(1, 13)]
    assert (tmp_path / "path.manifest.json").exists()


def test_pdf(tmp_path):
    assert main(["--out", str(tmp_path), "pdf", "--n-points", "9", "--save-grid",
                 "--grid-points", "257"]) == 0
    rows = read_csv(tmp_path / "pdf.csv")
    assert rows[0] == ["x", "f_t", "f_tilde_t", "ratio", "bound"]
    for r in rows[1:]:
        assert float(r[3]) <= float(r[4])
    assert (tmp_path / "grid_t1_tempered.bin.json").exists()


def test_bench_config_gate():
    with pytest.raises(ValueError):
        bench.BenchConfig(alphas=(0.5, 1.2))


def test_bench_cell_matched_outputs(ref_model):
    rows = bench.run_cell(ref_model, 2.0, 200, 1, 0)
    assert [r["method"] for r in rows] == ["rejection", "inversion"]
    assert rows[0]["observations"] == rows[1]["observations"] == 200
    assert rows[0]["iterations"] >= 400
    assert rows[0]["error"] == ""


def test_bench_failed_cell_is_recorded():
    spec = ModelSpec.build(PowerLawRosinski(1.2, 1.0, 1.0))
    rows = bench.run_cell(spec, 1.0, 10, 1, 0)
    assert all(r["error"] for r in rows)
    assert all(math.isnan(r["run_time"]) for r in rows)


def test_bench_cli(tmp_path):
    assert main(["--out", str(tmp_path), "bench", "--sweep", "t", "--t-values", "1", "2",
                 "--scale", "0.1", "--repeats", "1"]) == 0
    rows = read_csv(tmp_path / "bench_t.csv")
    assert rows[0][:4] == ["t", "alpha", "ell", "method"]
    assert len(rows) == 5


def test_reproduce7_small(tmp_path, capsys):
    assert main(["--seed", "3", "--out", str(tmp_path), "reproduce7", "--replications", "20",
                 "--envelope-replications", "10"]) == 0
    out = capsys.readouterr().out
    assert "s = 0.0591034" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["long_run"]["sums"] == summary["long_run"]["accepted"] // 10
    for name in ("kde_tempered_t1.csv", "kde_stable_t1.csv", "kde_tempered_t10.csv",
                 "path_tempered.csv", "acceptance_summary.json"):
        assert (tmp_path / name).exists()
    header = read_csv(tmp_path / "kde_tempered_t1.csv")[0]
    assert header == ["x", "estimate", "smoothed_true", "band_lo", "band_hi"]
