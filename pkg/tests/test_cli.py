import json
import os
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from henonlab import cli
from henonlab.periodic import SaddleDB
from henonlab.core import instantiate

HORSESHOE = {"family": {"factors": [{"p": [[[0, 0], [1, 0]], [[0, 0]], [[1, 0]]], "a": [[0.3, 0]]}],
                        "domain": {"center": [-4, 0], "radius": 1}},
             "seed": 0, "lambda": [-4, 0]}
ATTRACTING = {"family": {"factors": [{"p": [[[0, 0]], [[0, 0]], [[1, 0]]], "a": [[0.5, 0]]}],
                         "domain": {"center": [0, 0], "radius": 1}},
              "seed": 0}


def write_config(tmp_path, cfg, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(argv, capsys=None):
    code = cli.main(argv)
    err = capsys.readouterr().err if capsys else ""
    return code, err


def manifest(out):
    with open(os.path.join(out, "manifest.json")) as fh:
        return json.load(fh)


def test_periodic_attracting_fixed_point(tmp_path):
    cfg = write_config(tmp_path, ATTRACTING)
    out = str(tmp_path / "out")
    assert cli.main(["periodic", "--config", cfg, "--out", out, "--period", "1"]) == 0
    with open(os.path.join(out, "saddles.jsonl")) as fh:
        lines = fh.read().splitlines()
    recs = [json.loads(l) for l in lines]
    att = [r for r in recs if r["type"] == "attracting"]
    assert len(att) == 1
    db = SaddleDB.from_jsonl("\n".join(lines), instantiate(cli.FamilySpec.from_dict(ATTRACTING["family"]), 0))
    o = next(o for o in db.orbits if o.type == "attracting")
    assert np.max(np.abs(o.points[0])) < 1e-12


def test_missing_config_exits_2(tmp_path, capsys):
    code, err = run(["green", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    msg = json.loads(err.strip())
    assert msg["error"] == "usage" and msg["exit_code"] == 2


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(HORSESHOE, colour="red"))
    code, err = run(["green", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "rejected" in json.loads(err)["message"]


def test_audit_uniform_period_zero(tmp_path, capsys):
    cfg = write_config(tmp_path, HORSESHOE)
    code, err = run(["audit", "uniform", "--config", cfg, "--out", str(tmp_path / "o"), "--period", "0"], capsys)
    assert code == 2 and "nothing to audit" in json.loads(err)["message"]


def test_unknown_tolerance_and_bad_flag(tmp_path, capsys):
    cfg = write_config(tmp_path, HORSESHOE)
    code, err = run(["green", "--config", cfg, "--out", str(tmp_path / "o"), "--tol", "bogus=1"], capsys)
    assert code == 2
    code, err = run(["green", "--frobnicate"], capsys)
    assert code == 2 and len(err.strip().splitlines()) == 1


def test_locked_output_dir(tmp_path, capsys):
    cfg = write_config(tmp_path, HORSESHOE)
    out = tmp_path / "o"
    out.mkdir()
    (out / ".henonlab.lock").write_text("")
    code, err = run(["green", "--config", cfg, "--out", str(out), "--random", "3"], capsys)
    assert code == 2 and "locked" in json.loads(err)["message"]


def test_manifest_schema_and_outputs(tmp_path):
    cfg = write_config(tmp_path, HORSESHOE)
    out = str(tmp_path / "o")
    assert cli.main(["green", "--config", cfg, "--out", out, "--random", "20"]) == 0
    man = manifest(out)
    jsonschema.validate(man, cli.MANIFEST_SCHEMA)
    assert json.loads(json.dumps(man)) == man
    listed = {o["path"] for o in man["outputs"]}
    on_disk = set(os.listdir(out)) - {"manifest.json"}
    assert listed == on_disk
    header = open(os.path.join(out, "green.csv")).readline().strip().split(",")
    assert header == ["re_x", "im_x", "re_y", "im_y", "g_plus", "g_minus", "status_plus", "status_minus",
                      "class"]


def test_replay_byte_identical(tmp_path):
    cfg = write_config(tmp_path, HORSESHOE)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["green", "--config", cfg, "--out", a, "--random", "50", "--seed", "7"]) == 0
    assert cli.main(["replay", "--manifest", os.path.join(a, "manifest.json"), "--out", b]) == 0
    for o in manifest(a)["outputs"]:
        assert open(os.path.join(a, o["path"]), "rb").read() == open(os.path.join(b, o["path"]), "rb").read()
    assert [o["sha256"] for o in manifest(a)["outputs"]] == [o["sha256"] for o in manifest(b)["outputs"]]


def test_seed_only_changes_samples(tmp_path):
    cfg = write_config(tmp_path, HORSESHOE)
    pts = tmp_path / "pts.csv"
    pts.write_text("re_x,im_x,re_y,im_y\n0.1,0,0.2,0\n5,0,0,0\n-1.1,0.3,0.4,-0.2\n")
    outs = []
    for seed in ("1", "2"):
        o = str(tmp_path / f"s{seed}")
        assert cli.main(["classify", "--config", cfg, "--out", o, "--points", str(pts), "--seed", seed]) == 0
        outs.append(open(os.path.join(o, "classify.csv"), "rb").read())
    assert outs[0] == outs[1]
    per = []
    for seed in ("1", "2"):
        o = str(tmp_path / f"p{seed}")
        assert cli.main(["periodic", "--config", cfg, "--out", o, "--period", "2", "--seed", seed]) == 0
        per.append(open(os.path.join(o, "saddles.jsonl"), "rb").read())
    assert per[0] == per[1]


def test_sweep_ppm_and_track(tmp_path):
    cfg = write_config(tmp_path, HORSESHOE)
    out = str(tmp_path / "o")
    assert cli.main(["sweep", "--config", cfg, "--out", out, "--period-max", "2", "--grid", "2,2",
                     "--half-width", "0.05", "--ppm"]) == 0
    ppm = open(os.path.join(out, "scan.ppm"), "rb").read()
    head = b"P6\n16 16\n255\n"  # 2x2 cells at 8 pixels each
    assert ppm.startswith(head) and len(ppm) == len(head) + 16 * 16 * 3
    assert ppm[len(head):len(head) + 3] == bytes((40, 120, 200))  # horseshoe: no crossing
    out2 = str(tmp_path / "t")
    assert cli.main(["track", "--config", cfg, "--out", out2, "--period", "1", "--to=-4.1,0", "--steps", "4"]) == 0
    assert os.path.getsize(os.path.join(out2, "track.jsonl")) > 0


def test_entry_point_subprocess(tmp_path):
    cfg = write_config(tmp_path, HORSESHOE)
    r = subprocess.run([sys.executable, "-m", "henonlab.cli", "green", "--config", cfg, "--out",
                        str(tmp_path / "o"), "--random", "5"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "henonlab.cli", "audit", "uniform", "--config", cfg,
                        "--out", str(tmp_path / "p"), "--period", "0"], capture_output=True, text=True)
    assert r.returncode == 2 and json.loads(r.stderr)["error"] == "usage"
