import json
import subprocess
import sys

import numpy as np
import pytest

from sgmaps.cli import main
from sgmaps.polynomial import MultiPoly

from conftest import CONFIGS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def stage_status(doc):
    return {s["name"]: s["status"] for s in doc["stages"]}


def test_certify_disk(capsys, tmp_path):
    code, doc, err = run(capsys, "certify", "--config", CONFIGS / "disk_k1.json", "--out", tmp_path)
    assert code == 0 and err == ""
    assert doc["verdict"] == "SpecialGenericVerified"
    assert stage_status(doc) == {"certify": "passed"}
    assert json.loads((tmp_path / "certify.json").read_text())["verdict"] == doc["verdict"]


def test_certify_swapped_annulus_fails(capsys):
    code, doc, err = run(capsys, "certify", "--config", CONFIGS / "swapped_annulus.json")
    assert code == 1
    assert doc["verdict"] == "Failed(certify)"
    assert "failed at stage certify" in err


def test_bad_outer_function_fails_validation(capsys):
    code, doc, err = run(capsys, "construct", "--config", CONFIGS / "bad_f0.json")
    assert code == 1
    assert doc["verdict"] == "Failed(validate_vertical_spec)"
    assert "validate_vertical_spec" in err
    assert "construct" not in stage_status(doc)


def test_construct_writes_polynomial(capsys, tmp_path):
    code, doc, _ = run(capsys, "construct", "--config", CONFIGS / "annulus_k1.json", "--out", tmp_path)
    assert code == 0
    P = MultiPoly.from_doc(json.loads((tmp_path / "polynomial.json").read_text())["P"])
    x1, x2, y = [MultiPoly.variable(i, 3) for i in range(3)]
    r2 = x1 * x1 + x2 * x2
    assert P.allclose((r2 - 0.25) * (1 - r2) - y * y)
    assert "polynomial.json" in doc["artifacts"]


def test_generalized_config(capsys):
    code, doc, _ = run(capsys, "verify", "--config", CONFIGS / "disk_generalized_k2.json", "--samples", 300)
    assert code == 0, doc
    assert set(stage_status(doc).values()) == {"passed"}


def test_uncertified_is_refused_by_default(capsys):
    code, doc, err = run(capsys, "verify", "--config", CONFIGS / "duplicated_disk.json")
    assert code == 1 and "failed at stage certify" in err
    assert list(stage_status(doc)) == ["certify"]


def test_allow_uncertified_reaches_nonsingularity(capsys):
    code, doc, err = run(capsys, "verify", "--config", CONFIGS / "duplicated_disk.json",
                         "--allow-uncertified", "--samples", 300)
    status = stage_status(doc)
    assert code == 1
    assert status["certify"] == "waived"
    assert status["verify_nonsingular"] == "failed"
    assert doc["verdict"] == "Failed(verify_nonsingular)"
    assert "failed at stage verify_nonsingular" in err


def test_mesh_writes_obj(capsys, tmp_path):
    code, doc, _ = run(capsys, "mesh", "--config", CONFIGS / "annulus_k1.json", "--mesh-res", 64, "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "mesh.obj").exists()
    m = next(s for s in doc["stages"] if s["name"] == "mesh")
    assert m["result"]["summary"]["euler"] == m["result"]["summary_2x"]["euler"] == 0
    assert m["result"]["expected"] == {"euler": 0, "components": 1}


def test_reeb_writes_dot(capsys, tmp_path):
    code, doc, _ = run(capsys, "reeb", "--config", CONFIGS / "annulus_k2.json", "--out", tmp_path)
    assert code == 0
    text = (tmp_path / "reeb.dot").read_text()
    assert text.count(" -- ") == 4
    r = next(s for s in doc["stages"] if s["name"] == "reeb")["result"]
    assert r["betti1"] == r["expected_betti1"] == 1


def test_reeb_rejects_interval_region(capsys):
    code, doc, err = run(capsys, "reeb", "--config", CONFIGS / "interval_k2.json")
    assert code == 2 and doc is None
    assert "planar" in err


def test_reports_byte_reproducible(capsys, tmp_path):
    for sub in ("a", "b"):
        code, _, _ = run(capsys, "verify", "--config", CONFIGS / "disk_k1.json", "--samples", 300,
                         "--no-timestamp", "--out", tmp_path / sub)
        assert code == 0
    assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()


def test_timestamp_present_by_default(capsys):
    _, doc, _ = run(capsys, "certify", "--config", CONFIGS / "disk_k1.json")
    assert "generated_at" in doc


def test_usage_errors_exit_two(capsys, tmp_path):
    assert run(capsys, "certify")[0] == 2
    assert run(capsys, "certify", "--config", tmp_path / "missing.json")[0] == 2
    assert run(capsys, "certify", "--config", CONFIGS / "disk_k1.json", "--seed", -1)[0] == 2
    assert run(capsys, "mesh", "--config", CONFIGS / "disk_k1.json", "--mesh-res", 4)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "certify", "--config", bad)[0] == 2


def test_unknown_command_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["explode"])
    assert info.value.code == 2


def test_fit_command(capsys, tmp_path):
    t = 2 * np.pi * np.arange(48) / 48
    csv = tmp_path / "pts.csv"
    np.savetxt(csv, np.stack([2 * np.cos(t), np.sin(t)], axis=1), delimiter=",")
    code, doc, _ = run(capsys, "fit", csv, "--degree", 2, "--out", tmp_path, "--no-timestamp")
    assert code == 0
    assert doc["rms_residual"] < 1e-8
    assert (tmp_path / "fit.json").exists()


def test_fit_degenerate_samples_fail(capsys, tmp_path):
    csv = tmp_path / "line.csv"
    np.savetxt(csv, np.stack([np.linspace(-1, 1, 30), np.zeros(30)], axis=1), delimiter=",")
    code, _, err = run(capsys, "fit", csv)
    assert code == 1 and "failed at stage fit" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sgmaps", "certify", "--config", str(CONFIGS / "disk_k1.json"),
                           "--no-timestamp"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] == "SpecialGenericVerified"
