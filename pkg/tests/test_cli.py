import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from prymlab import cli
from prymlab.errors import ConfigError, NonConvergence

ROOT = Path(__file__).resolve().parents[1]
SCHEMA = json.loads(cli.schema_path().read_text())


def write_cfg(tmp_path, family="A", params="1, 2, 3", extra=""):
    p = tmp_path / "run.ini"
    p.write_text(f"[curve]\nfamily = {family}\nbranch_params = {params}\n"
                 f"[grid]\nn = 7\nextent = 0.1\n[run]\nseed = 3\nn_random = 2\nvn2_trials = 2\n{extra}")
    return p


def test_dumps_format():
    text = cli.dumps({"b": 0.1, "a": [1 + 2j, np.float64(1 / 3)], "c": float("nan"), "d": True})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text and "0.33333333333333331" in text
    assert "null" in text
    back = json.loads(text)
    assert back["a"][0] == [1.0, 2.0] and back["d"] is True


def test_shipped_configs_parse():
    for name in ("family_a.ini", "family_b.ini"):
        cfg = cli.load_config(ROOT / "configs" / name)
        assert cfg.grid.n == 21 and cfg.stages == cli.STAGES


@pytest.mark.parametrize("body", [
    "[curve]\nfamily = A\nbranch_params = 1, 1, 3\n",
    "[curve]\nfamily = A\n",
    "[curve]\nfamily = A\nbranch_params = 1, 2, 3\n[grid]\nn = 8\n",
    "[curve]\nfamily = A\nbranch_params = 1, 2, 3\n[run]\nstages = periods,bogus\n",
    "[curve]\nfamily = B\nbranch_params = 1, 2, x, 4\n",
    "not an ini file",
])
def test_config_errors_exit_2(tmp_path, body, capsys):
    p = tmp_path / "bad.ini"
    p.write_text(body)
    assert cli.main(["--config", str(p), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_degenerate_message(tmp_path, capsys):
    p = write_cfg(tmp_path, params="1, 1, 3")
    assert cli.main(["--config", str(p)]) == 2
    assert "DegenerateCurve" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "nope.ini")


def test_periods_stage_report(tmp_path):
    p = write_cfg(tmp_path)
    out = tmp_path / "o"
    assert cli.main(["--config", str(p), "--stage", "periods", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, SCHEMA)
    st = rep["stages"]["periods"]
    assert st["g"] == 2 and st["h"] == 1 and st["B_symmetry_residual"] < 1e-8


def test_quick_all_family_a_schema_and_csv(tmp_path):
    p = write_cfg(tmp_path)
    out = tmp_path / "o"
    code = cli.main(["--config", str(p), "--quick", "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, SCHEMA)
    assert set(rep["stages"]) == set(cli.STAGES)
    # A(zeta) = eps(e) does not hold numerically, so verify fails and the exit code is 1
    assert rep["stages"]["verify"]["abel_prym_vs_eps"]["pass"] is False
    assert code == cli.EXIT_FAIL
    s = rep["stages"]["schrodinger"]
    assert s["headline"]["relative_residual"] < 1e-4
    assert s["negative_control"]["flag"] == "EXPECTED-FAIL"
    with open(out / "schrodinger_grid.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["z_re", "z_im", "psi_re", "psi_im", "u_re", "u_im", "abs_r"]
    assert len(rows) == 1 + 7 * 7
    assert all(math.isfinite(float(x)) for x in rows[1])


def test_quick_same_schema_fewer_trials(tmp_path):
    cfg = cli.load_config(ROOT / "configs" / "family_b.ini")
    q = cfg.quick()
    assert q.n_random < cfg.n_random and q.vn2_trials < cfg.vn2_trials and q.grid.n == 11
    assert q.describe().keys() == cfg.describe().keys()


def test_seed_override_changes_report(tmp_path):
    p = write_cfg(tmp_path)
    texts = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        cli.main(["--config", str(p), "--stage", "verify", "--seed", seed, "--out", str(out)])
        texts.append((out / "report.json").read_text())
    assert texts[0] != texts[1]


def test_numerical_breakdown_exit_3(tmp_path, monkeypatch, capsys):
    def boom(pipe):
        raise NonConvergence("forced")

    monkeypatch.setattr(cli, "cmd_periods", boom)
    p = write_cfg(tmp_path)
    assert cli.main(["--config", str(p), "--stage", "periods", "--out", str(tmp_path / "o")]) == 3
    assert "NonConvergence" in capsys.readouterr().err
