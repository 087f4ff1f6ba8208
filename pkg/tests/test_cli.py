import csv
import json

import numpy as np
import pytest

from polycycle.cli import EXIT_FLAGGED, EXIT_OK, EXIT_USAGE, main


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("argv", [
    ["count"],
    ["frobnicate", "--family", "x.yaml"],
    ["count", "--family", "missing.yaml"],
    ["dulac", "--family", "{fam}/linear.yaml", "--lambda", "1,2"],
    ["abelian", "--family", "{fam}/harmonic.yaml"],
    ["abelian", "--family", "{fam}/linear.yaml", "--h", "0.1"],
    ["count", "--family", "{fam}/linear.yaml"],
])
def test_usage_errors(argv, families_dir, tmp_path, capsys):
    argv = [a.format(fam=families_dir) for a in argv] + ["--out-dir", str(tmp_path)]
    assert main(argv) == EXIT_USAGE
    assert "polycycle: error" in capsys.readouterr().err


def test_malformed_family_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: broken\nfield: {P: 'x'}\n")
    assert main(["dulac", "--family", str(p), "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_dulac_matches_power_law(families_dir, tmp_path):
    assert main(["dulac", "--family", str(families_dir / "linear.yaml"), "--lambda", "2.0", "--n-rho", "4",
                 "--n-phi", "5", "--random-points", "3", "--out-dir", str(tmp_path)]) == EXIT_OK
    r = rows(tmp_path / "dulac_000.csv")
    assert len(r) == 23
    for row in r:
        z = float(row["rho"]) * np.exp(1j * float(row["phi"]))
        d = complex(float(row["D_re"]), float(row["D_im"]))
        w = float(row["rho"]) ** 2 * np.exp(2j * float(row["phi"]))
        assert abs(d - w) < 1e-8 * abs(z) ** 2
    rep = json.loads((tmp_path / "dulac_000.json").read_text())
    assert rep["errors"]["max_rel_dev_from_power_law"] < 1e-8
    assert len(rep["config_hash"]) == 64


def test_reports_are_deterministic(families_dir, tmp_path):
    argv = ["dulac", "--family", str(families_dir / "linear.yaml"), "--n-rho", "3", "--n-phi", "3",
            "--random-points", "2", "--seed", "7"]
    main(argv + ["--out-dir", str(tmp_path / "a")])
    main(argv + ["--out-dir", str(tmp_path / "b")])
    for name in ("dulac_000.csv", "dulac_000.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_holonomy_command(families_dir, tmp_path):
    assert main(["holonomy", "--family", str(families_dir / "linear.yaml"), "--lambda", "0.5", "--section", "tau",
                 "--k", "1", "--k", "2", "--out-dir", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "holonomy_000.json").read_text())
    assert all(v["deviation"] < 1e-6 for v in rep["holonomy"].values())


def test_abelian_command(families_dir, tmp_path):
    assert main(["abelian", "--family", str(families_dir / "harmonic.yaml"), "--h", "0.1:0.5:3",
                 "--omega", "0", "x", "--pontryagin", "1e-2", "--pontryagin", "1e-3",
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    for row in rows(tmp_path / "abelian.csv"):
        assert float(row["re_I"]) == pytest.approx(2 * np.pi * float(row["h"]), rel=1e-12)
    rep = json.loads((tmp_path / "abelian.json").read_text())
    assert rep["poincare_pontryagin"]["decrease_ratios"][0] > 5
    assert (tmp_path / "abelian.svg").exists()


def test_abelian_picard_lefschetz(families_dir, tmp_path):
    assert main(["abelian", "--family", str(families_dir / "bogdanov_takens.yaml"), "--lambda", "1,0",
                 "--h", "-0.02", "--h", "0.1", "--picard-lefschetz", "--out-dir", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "abelian.json").read_text())
    assert [r["h"] for r in rep["picard_lefschetz"]] == [-0.02]
    assert rep["picard_lefschetz"][0]["disagreement"] < 1e-6


def test_bruteforce_command(families_dir, tmp_path, capsys):
    assert main(["bruteforce", "--family", str(families_dir / "van_der_pol.yaml"), "--n", "11",
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "bruteforce_000.json").read_text())
    assert len(rep["roots"]) == 1 and abs(rep["roots"][0] - 2.0) < 1e-2


@pytest.mark.slow
def test_unbroken_loop_exits_flagged(families_dir, tmp_path, capsys):
    code = main(["count", "--family", str(families_dir / "bogdanov_takens.yaml"), "--lambda", "0,0",
                 "--out-dir", str(tmp_path), "--no-svg"])
    assert code == EXIT_FLAGGED
    assert "--perturb" in capsys.readouterr().err
    rep = json.loads((tmp_path / "count_000.json").read_text())
    assert rep["report"]["status"] == "flagged" and rep["report"]["boundary_zero_flags"]
    assert rows(tmp_path / "boundary_000.csv")
    assert not (tmp_path / "domain_000.svg").exists()
