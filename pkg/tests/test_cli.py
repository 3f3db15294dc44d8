import csv
import io
import json

import numpy as np
import pytest

from hamspec import ex_lpc
from hamspec.cli import main
from hamspec.config import ConfigError, load_source, parse_config
from hamspec.model import table_to_json

LAPLACE = {"builtin": "second_order", "params": {"p": 1, "q": 0, "w": 1}}


def run(tmp_path, cfg, *args):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out, err = io.StringIO(), io.StringIO()
    code = main([args[0], "--config", str(path), *args[1:]], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_validate_ok(tmp_path):
    code, out, _ = run(tmp_path, {"system": {"builtin": "ex-lcc"}}, "validate")
    assert code == 0
    assert json.loads(out)["system"]["ok"]


def test_validate_rejects_bad_extension(tmp_path):
    cfg = {"system": {"builtin": "ex-lcc"},
           "sse": {"M": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
                   "N": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}}
    code, _, err = run(tmp_path, cfg, "validate")
    assert code == 2
    assert "MJM*-NJN*" in err


def test_validate_rejects_bad_coefficients(tmp_path):
    cfg = {"system": {"builtin": "second_order", "params": {"w": -1}}}
    code, _, err = run(tmp_path, cfg, "validate")
    assert code == 2 and "W1" in err


def test_missing_config_is_usage_error():
    err = io.StringIO()
    assert main(["validate", "--config", "/nonexistent.json"], stderr=err) == 1
    assert main(["frobnicate", "--config", "x"], stderr=err) == 1


def test_unknown_keys_rejected(tmp_path):
    code, _, err = run(tmp_path, {"system": {"builtin": "ex-lcc"}, "colour": 1}, "classify")
    assert code == 1 and "colour" in err


def test_classify_json(tmp_path):
    code, out, _ = run(tmp_path, {"system": {"builtin": "ex-mid"}}, "classify")
    assert code == 0
    assert json.loads(out) == {"d": 3, "finite_dim_space": False, "kind": "Intermediate"}


def test_classify_ambiguous_exit_code(tmp_path, monkeypatch):
    from hamspec.classify import ClassificationAmbiguous

    def boom(*a, **k):
        raise ClassificationAmbiguous("undecided")

    monkeypatch.setattr("hamspec.config.classify", boom)
    code, _, _ = run(tmp_path, {"system": {"builtin": "ex-lcc"}}, "classify")
    assert code == 4


def test_eigs_dirichlet_with_oracle(tmp_path):
    cfg = {"system": LAPLACE, "boundary": "dirichlet", "b": 7}
    code, out, _ = run(tmp_path, cfg, "eigs", "--oracle")
    assert code == 0
    table = rows(out)
    assert table[0][0].startswith("k [")
    vals = np.array([float(r[1]) for r in table[1:]])
    np.testing.assert_allclose(vals, 4 * np.sin(np.arange(1, 9) * np.pi / 18) ** 2, atol=1e-12)
    oracle = np.array([float(r[3]) for r in table[1:]])
    np.testing.assert_allclose(oracle, vals, atol=1e-7)
    assert [int(r[0]) for r in table[1:]] == list(range(1, 9))


def test_eigs_writes_file(tmp_path):
    cfg = {"system": {"builtin": "ex-lcc"}, "b": 20}
    code, out, _ = run(tmp_path, cfg, "eigs", "--out", str(tmp_path / "o"))
    assert code == 0 and out == ""
    assert (tmp_path / "o" / "eigs_b20.csv").exists()


def test_eigs_needs_b(tmp_path):
    code, _, err = run(tmp_path, {"system": LAPLACE, "boundary": "dirichlet"}, "eigs")
    assert code == 1 and "--b" in err


def test_eigs_empty_weight(tmp_path):
    cfg = {"system": {"builtin": "second_order", "params": {"w": 0}}, "boundary": "dirichlet", "b": 5}
    code, out, _ = run(tmp_path, cfg, "eigs")
    assert code == 0
    assert len(rows(out)) == 1


def test_resolvent_at_eigenvalue(tmp_path):
    cfg = {"system": LAPLACE, "boundary": "dirichlet", "b": 7}
    z = float(4 * np.sin(np.pi / 18) ** 2)
    code, _, err = run(tmp_path, cfg, "resolvent", f"--z={z!r},0")
    assert code == 3 and "eigenvalue" in err


def test_resolvent_zero_source(tmp_path):
    cfg = {"system": LAPLACE, "boundary": "dirichlet", "b": 7, "g": "zero"}
    code, out, _ = run(tmp_path, cfg, "resolvent", "--z", "0,1")
    assert code == 0
    table = rows(out)
    assert all(float(x) == 0.0 for r in table[1:] for x in r[1:5])


def test_resolvent_residual_column(tmp_path):
    cfg = {"system": {"builtin": "ex-lcc"}, "b": 12, "seed": 3}
    code, out, _ = run(tmp_path, cfg, "resolvent", "--z", "0.5,1")
    assert code == 0
    res = [float(r[-1]) for r in rows(out)[1:] if r[-1]]
    assert len(res) == 13 and max(res) < 1e-8


def test_resolvent_bad_z(tmp_path):
    cfg = {"system": LAPLACE, "boundary": "dirichlet", "b": 7}
    code, _, _ = run(tmp_path, cfg, "resolvent", "--z", "a,b")
    assert code == 1


def test_approx_limit_circle_outputs(tmp_path):
    out_dir = tmp_path / "lcc"
    cfg = {"system": {"builtin": "ex-lcc"}, "schedule": [15, 30, 60], "shift": 5.0,
           "out": str(out_dir)}
    code, _, _ = run(tmp_path, cfg, "approx")
    assert code == 0
    for name in ("trajectories.csv", "defects.csv", "convergence.svg", "report.json", "timings.json"):
        assert (out_dir / name).exists()
    svg = (out_dir / "convergence.svg").read_text()
    assert svg.count('class="trajectory"') >= 6
    assert 'class="envelope"' in svg and "inclusion-only" not in svg
    report = json.loads((out_dir / "report.json").read_text())
    assert report["classification"]["kind"] == "LimitCircle"
    assert report["schedule"] == [15, 30, 60]
    traj = rows((out_dir / "trajectories.csv").read_text())
    assert len(traj) == 1 + 3 * 6


def test_approx_is_deterministic(tmp_path):
    cfg = {"system": {"builtin": "ex-lcc"}, "schedule": [15, 30], "shift": 5.0}
    texts = []
    for name in ("a", "b"):
        run(tmp_path, cfg, "approx", "--out", str(tmp_path / name))
        texts.append([(tmp_path / name / f).read_bytes()
                      for f in ("trajectories.csv", "defects.csv", "convergence.svg", "report.json")])
    assert texts[0] == texts[1]


def test_approx_limit_point_banner(tmp_path):
    cfg = {"system": {"builtin": "ex-lpc"}, "schedule": [15, 30], "out": str(tmp_path / "lpc")}
    code, _, _ = run(tmp_path, cfg, "approx")
    assert code == 0
    svg = (tmp_path / "lpc" / "convergence.svg").read_text()
    assert "inclusion-only" in svg and 'class="envelope"' not in svg


def test_approx_empty_schedule(tmp_path):
    code, _, err = run(tmp_path, {"system": {"builtin": "ex-lcc"}}, "approx",
                       "--out", str(tmp_path / "e"))
    assert code == 1 and "schedule" in err
    assert not (tmp_path / "e").exists()


def test_table_system_from_file(tmp_path):
    (tmp_path / "table.json").write_text(json.dumps(table_to_json(ex_lpc(), 10, {"kind": "constant"})))
    cfg = {"system": {"table": "table.json"}}
    code, out, _ = run(tmp_path, cfg, "classify")
    assert code == 0 and json.loads(out)["kind"] == "LimitPoint"


def test_parse_config_schedule_forms():
    cfg = parse_config({"system": {}, "schedule": {"b0": 15, "factor": 2, "count": 4}})
    assert cfg.schedule == [15, 30, 60, 120]
    assert parse_config({"system": {}, "shift": 2.0}).frame == 2.0
    with pytest.raises(ConfigError):
        parse_config({"system": {}, "schedule": [30, 15]})
    with pytest.raises(ConfigError):
        parse_config({"system": {}, "tolerances": {"tail": 0}})
    with pytest.raises(ConfigError):
        parse_config({"schedule": [1]})


def test_inline_source():
    cfg = parse_config({"system": {}, "g": {"start": 0, "values": [[[1, 0], [0, 2]]]}})
    g = load_source(cfg, ex_lpc(), 5)
    np.testing.assert_array_equal(g(0), [1, 2j])
