import json

import numpy as np
import pytest
from click.testing import CliRunner

from combsteer.cli import main
from combsteer.comb import CombModel, default_model, simulate_cm
from combsteer.gaussian import CovarianceMatrix, two_mode_squeezed_vacuum, vacuum
from combsteer.io import read_cm, write_cm, write_model

HEADER = "# schema: combsteer-cm/1\n# n_modes: 1\n# ordering: xpxp\n# normalization: vacuum=1\n"


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args, **kw):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False, **kw)

    return invoke


@pytest.fixture
def files(tmp_path, comb_states):
    paths = {}
    for name, cm in {
        "vac": vacuum(4, list("ABCD")),
        "tmsv": two_mode_squeezed_vacuum(0.5),
        "comb4": comb_states[4],
        "comb8": comb_states[8],
        "comb16": comb_states[16],
    }.items():
        paths[name] = tmp_path / f"{name}.cm"
        write_cm(paths[name], cm)
    paths["bad"] = tmp_path / "bad.cm"
    paths["bad"].write_text(HEADER + "0.5 0\n0 0.5\n")
    paths["trunc"] = tmp_path / "trunc.cm"
    paths["trunc"].write_text(HEADER + "1 0\n")
    return paths


def test_validate(run, files):
    r = run("validate", files["vac"])
    assert r.exit_code == 0 and "valid: true" in r.output
    r = run("validate", files["bad"])
    assert r.exit_code == 1
    assert "unphysical: min symplectic eigenvalue 0.5" in r.output
    r = run("validate", files["trunc"])
    assert r.exit_code == 3 and "trunc.cm:6:1" in r.output
    assert run("validate", files["vac"].parent / "missing.cm").exit_code == 3


def test_steer(run, files, tmp_path):
    r = run("steer", files["tmsv"], "--from", "0", "--to", "1")
    assert r.exit_code == 0 and "G (0)->(1) = 0.433781 nats" in r.output
    r = run("steer", files["vac"], "--from", "A", "--to", "B,C", "--both-directions")
    assert "= 0.000000 nats" in r.output and "direction: NoSteering" in r.output
    out = tmp_path / "s.json"
    r = run("steer", files["comb4"], "--from", "C,D", "--to", "A,B", "--both-directions", "--out", out)
    doc = json.loads(out.read_text())
    values = [row["value"] for row in doc["data"]["results"]]
    assert values[0] > 0 and values[1] > 0
    assert doc["inputs"]["cm"]["name"] == "comb4.cm"


def test_steer_errors(run, files):
    assert run("steer", files["vac"], "--from", "Z", "--to", "A").exit_code == 1
    assert run("steer", files["vac"], "--from", "A", "--to", "A,B").exit_code == 1
    assert run("steer", files["vac"], "--from", "A").exit_code == 2


def test_spectrum(run, files, tmp_path):
    out = tmp_path / "spec.json"
    r = run("spectrum", files["comb4"], "--mode", "pairs", "--out", out)
    assert r.exit_code == 0
    doc = json.loads(out.read_text())
    assert len(doc["data"]["results"]) == 50
    r = run("spectrum", files["vac"])
    doc = json.loads(r.stdout)
    assert all(row["value"] == 0 for row in doc["data"]["results"])
    assert run("spectrum", files["comb8"], "--max-modes", "6").exit_code == 1


def test_spectrum_bytes_independent_of_jobs(run, files, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("spectrum", files["comb8"], "--jobs", "1", "--out", a)
    run("spectrum", files["comb8"], "--jobs", "2", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_loss_scan(run, files, tmp_path):
    out = tmp_path / "scan.json"
    r = run("loss-scan", files["comb8"], "--remove", "a1,a2,b1", "--out", out)
    assert r.exit_code == 0
    steps = json.loads(out.read_text())["data"]["steps"]
    assert [s["removed"] for s in steps] == [["a1"], ["a1", "a2"], ["a1", "a2", "b1"]]
    assert run("loss-scan", files["comb8"], "--remove", "zz").exit_code == 1


def test_monogamy(run, files, tmp_path):
    r = run("monogamy", files["comb4"], "--relation", "TypeI", "--sweep")
    assert r.exit_code == 0 and "TypeI: 0 violations in" in r.output
    r = run("monogamy", files["vac"], "--relation", "CKW", "--sweep")
    assert "CKW: 0 violations in" in r.output
    out = tmp_path / "m.json"
    r = run(
        "monogamy", files["comb8"], "--relation", "TypeII",
        "--groups", "b2|c2,d1->b1,c1", "--out", out,
    )
    assert "VIOLATED" in r.output and "TypeII: 1 violations in 1 configurations" in r.output
    row = json.loads(out.read_text())["data"]["rows"][0]
    assert min(row["terms"].values()) > 0.01
    assert run("monogamy", files["vac"], "--relation", "TypeI", "--groups", "A|B").exit_code == 2
    assert run("monogamy", files["vac"], "--relation", "TypeI").exit_code == 2
    assert run("monogamy", files["vac"], "--relation", "TypeV", "--sweep").exit_code == 2


def test_simulate_and_fixture(run, tmp_path):
    model_path, out = tmp_path / "model.json", tmp_path / "sim.cm"
    r = run("fixture", "default", "--out", model_path)
    assert r.exit_code == 0
    r = run("simulate", model_path, "--pixels", "16", "--out", out)
    assert r.exit_code == 0
    cm = read_cm(out).cm
    assert cm.n_modes == 16 and cm.labels[0] == "a11"
    assert cm == simulate_cm(default_model(16))
    assert run("simulate", model_path, "--pixels", "5", "--out", out).exit_code == 2
    write_model(model_path, CombModel())
    run("simulate", model_path, "--pixels", "4", "--out", out)
    assert read_cm(out).cm == vacuum(4, list("ABCD"))


def test_simulate_rejects_bad_model(run, tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"schema": "combsteer-model/1", "kind": "comb", "model": {"n_pixels": 5}}')
    assert run("simulate", path, "--out", tmp_path / "x.cm").exit_code == 1
    path.write_text("{not json")
    assert run("simulate", path, "--out", tmp_path / "x.cm").exit_code == 3


def test_mc(run, tmp_path):
    model_path = tmp_path / "tmsv.json"
    run("fixture", "tmsv", "--out", model_path)
    r = run("mc", model_path, "--from", "0", "--to", "1", "--noise-db", "0", "--samples", "5")
    assert r.exit_code == 0
    assert "= 0.433781 +/- 0.000000 nats (5 samples, seed 0, 0 rejected)" in r.output
    args = ("mc", model_path, "--from", "0", "--to", "1", "--noise-db", "0.1",
            "--samples", "300", "--seed", "42")
    a, b = run(*args, "--out", tmp_path / "a.json"), run(*args, "--out", tmp_path / "b.json")
    assert a.output == b.output
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert run("mc", model_path, "--from", "0", "--to", "1", "--noise-db", "-1").exit_code == 1


def test_mc_on_comb_fixture(run, tmp_path):
    model_path = tmp_path / "default.json"
    run("fixture", "default", "--out", model_path)
    r = run("mc", model_path, "--pixels", "4", "--from", "C,D", "--to", "A,B",
            "--noise-db", "0.2", "--samples", "50")
    assert r.exit_code == 0 and r.output.startswith("G (C,D)->(A,B) = ")


def test_coarsen(run, files, tmp_path):
    out = tmp_path / "c.cm"
    assert run("coarsen", files["comb16"], "--to-pixels", "4", "--out", out).exit_code == 0
    got = read_cm(out).cm
    assert got.labels == ("A", "B", "C", "D")
    np.testing.assert_allclose(got.matrix, simulate_cm(default_model(4)).matrix, atol=1e-9)
    r = run("coarsen", files["vac"], "--merge", "A,B;C", "--out", out)
    assert r.exit_code == 0 and read_cm(out).cm.labels == ("A+B", "C")
    assert run("coarsen", files["vac"], "--out", out).exit_code == 2
    assert run("coarsen", files["vac"], "--to-pixels", "4", "--out", out).exit_code == 2


def test_tolerance_override(run, files, tmp_path):
    tol = tmp_path / "tol.json"
    tol.write_text(json.dumps({"steer_epsilon": 1.0}))
    r = run("--tolerances", tol, "steer", files["tmsv"], "--from", "0", "--to", "1",
            "--both-directions")
    assert "direction: NoSteering" in r.output
    tol.write_text(json.dumps({"bogus": 1.0}))
    assert run("--tolerances", tol, "validate", files["vac"]).exit_code == 3


def test_jobs_env_var(run, files, tmp_path):
    out = tmp_path / "a.json"
    r = run("spectrum", files["vac"], "--out", out, env={"COMBSTEER_JOBS": "2"})
    assert r.exit_code == 0
    assert run("spectrum", files["vac"], env={"COMBSTEER_JOBS": "0"}).exit_code == 2


def test_version(run):
    r = run("--version")
    assert r.exit_code == 0 and "combsteer" in r.output


def test_labels_survive_round_trip(files):
    cm = read_cm(files["comb16"]).cm
    assert isinstance(cm, CovarianceMatrix) and cm.labels[-1] == "d22"
