import csv
import json
import os

import numpy as np
import pytest

from oqrw.cli import main
from oqrw.config import parse_config, serialize, to_dict
from oqrw.errors import ConfigError
from oqrw.model import validate
from oqrw.registry import available, builtin
from oqrw.report import analyze, emit_series, initial_state


def doc(**over):
    base = {"name": "t", "sites": [{"id": "1", "dim": 1}, {"id": "2", "dim": 1}],
            "edges": [{"from": "1", "to": "2", "kraus": [[[[1, 0]]]]},
                      {"from": "2", "to": "1", "kraus": [[[[1, 0]]]]}]}
    base.update(over)
    return json.dumps(base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    @pytest.mark.parametrize("name", available())
    def test_round_trip(self, name):
        w = builtin(name)
        text = serialize(w)
        back = parse_config(text)
        assert back.same_as(w, atol=0)
        assert serialize(back) == text

    def test_minimal(self):
        w = parse_config(doc())
        assert list(w.labels) == ["1", "2"] and validate(w).ok

    def test_syntax_error_position(self):
        with pytest.raises(ConfigError, match="line 1, column"):
            parse_config('{"sites": [}')

    def test_unknown_site(self):
        bad = doc(edges=[{"from": "1", "to": "9", "kraus": [[[[1, 0]]]]}])
        with pytest.raises(ConfigError, match=r"edges\[0\]\.to: unknown site '9'"):
            parse_config(bad)

    def test_missing_field(self):
        with pytest.raises(ConfigError, match="missing field 'edges'"):
            parse_config(json.dumps({"sites": []}))

    def test_shape_mismatch(self):
        k = [[[1, 0], [0, 0]], [[0, 0], [1, 0]], [[0, 0], [0, 0]]]  # 3x2 into dim 1
        with pytest.raises(ConfigError, match="1->2"):
            parse_config(doc(edges=[{"from": "1", "to": "2", "kraus": [k]}]))

    def test_duplicate_edge(self):
        e = {"from": "1", "to": "2", "kraus": [[[[1, 0]]]]}
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(doc(edges=[e, e]))

    def test_ragged_matrix(self):
        sites = [{"id": "a", "dim": 2}]
        k = [[[1, 0], [0, 0]], [[0, 0]]]
        with pytest.raises(ConfigError, match="non-rectangular"):
            parse_config(doc(sites=sites, edges=[{"from": "a", "to": "a", "kraus": [k]}]))

    def test_bad_entry(self):
        with pytest.raises(ConfigError, match=r"\[re, im\]"):
            parse_config(doc(edges=[{"from": "1", "to": "2", "kraus": [[[["x", 0]]]]}]))

    def test_nonpositive_dim(self):
        with pytest.raises(ConfigError, match="positive"):
            parse_config(doc(sites=[{"id": "1", "dim": 0}], edges=[]))

    def test_complex_entries(self):
        w = builtin("z8-period4")
        d = to_dict(w)
        e = next(x for x in d["edges"] if x["from"] == "0" and x["to"] == "7")
        assert e["kraus"][0][1][1][1] == pytest.approx(np.sqrt(0.5))


class TestRegistry:
    def test_names(self):
        assert {"m3", "m4", "m4-eps", "ex-9.2", "ex-6.4", "ex-6.11", "z8-period4", "ex-9.6",
                "remark-4.6"} <= set(available())

    @pytest.mark.parametrize("name", available() + ["m7", "m5-eps", "ex-9.2?a2=0.8&p=0.1"])
    def test_valid(self, name):
        assert validate(builtin(name)).worst_deviation < 1e-12

    def test_parameters(self):
        w = builtin("m4-eps?eps=0.2")
        assert w.name == "m4-eps?eps=0.2"
        assert not w.same_as(builtin("m4-eps"))

    def test_unknown(self):
        with pytest.raises(ConfigError, match="unknown builtin"):
            builtin("nope")

    def test_unused_parameter(self):
        with pytest.raises(ConfigError, match="unused"):
            builtin("m3?eps=0.1")

    def test_bad_parameter(self):
        with pytest.raises(ConfigError, match="not a number"):
            builtin("m4-eps?eps=abc")


class TestAnalyze:
    def test_periodic_cycle(self):
        rep = analyze(builtin("m4"))
        assert rep.irreducible and rep.period == 2 and rep.fixed_space_dim == 1
        assert len(rep.peripheral) == 2
        assert rep.diagnostics["cyclic_dims"] == [4, 4]
        assert rep.decomposition == {"transient_dim": 0, "singletons": [8], "families": []}

    def test_coherent_pair(self):
        rep = analyze(builtin("ex-9.6"))
        assert not rep.irreducible and rep.period is None and rep.fixed_space_dim == 4
        assert rep.decomposition["families"] == [{"member_dims": [2, 2], "isometries": True}]

    def test_apss(self):
        rep = analyze(builtin("ex-9.2"))
        assert rep.fixed_space_dim == 1 and not rep.irreducible
        assert rep.decomposition["transient_dim"] == 3

    def test_json_serializable(self):
        rep = analyze(builtin("z8-period4"))
        back = json.loads(json.dumps(rep.to_json()))
        assert back["period"] == 4
        assert any("period: 4" == line for line in rep.lines())


class TestEmit:
    def test_direct_converges(self, tmp_path):
        w = builtin("m3")
        files = emit_series(w, initial_state(w), 60, "direct", str(tmp_path))
        assert files == ["site_probs.csv", "blocks.csv"]
        rows = read_csv(tmp_path / "site_probs.csv")
        assert len(rows) == 61 * 3
        last = [float(r["probability"]) for r in rows if r["step"] == "60"]
        np.testing.assert_allclose(last, 1 / 3, atol=1e-9)
        for k in range(61):
            tot = sum(float(r["probability"]) for r in rows if r["step"] == str(k))
            assert abs(tot - 1) < 1e-12

    def test_zero_steps(self, tmp_path):
        w = builtin("m3")
        emit_series(w, initial_state(w), 0, "direct", str(tmp_path))
        rows = read_csv(tmp_path / "site_probs.csv")
        assert [(r["site"], float(r["probability"])) for r in rows] == [
            ("1", 1.0), ("2", 0.0), ("3", 0.0)]
        blocks = read_csv(tmp_path / "blocks.csv")
        assert len(blocks) == 12 and float(blocks[0]["re"]) == 1.0

    def test_cesaro(self, tmp_path):
        w = builtin("m4")
        emit_series(w, initial_state(w), 2000, "cesaro", str(tmp_path))
        rows = read_csv(tmp_path / "site_probs.csv")
        last = [float(r["probability"]) for r in rows if r["step"] == "2000"]
        np.testing.assert_allclose(last, 0.25, atol=1e-3)

    def test_sample(self, tmp_path):
        w = builtin("m3")
        files = emit_series(w, initial_state(w), 20, "sample", str(tmp_path), 500, seed=4)
        assert set(files) == {"site_probs.csv", "blocks.csv", "trajectory.csv",
                              "conditional_avg.csv"}
        traj = read_csv(tmp_path / "trajectory.csv")
        assert len(traj) == 21 and traj[0]["site"] == "1"
        probs = read_csv(tmp_path / "site_probs.csv")
        for k in range(21):
            tot = sum(float(r["probability"]) for r in probs if r["step"] == str(k))
            assert abs(tot - 1) < 1e-12
        again = tmp_path / "again"
        emit_series(w, initial_state(w), 20, "sample", str(again), 500, seed=4)
        for f in files:
            assert (tmp_path / f).read_bytes() == (again / f).read_bytes()

    def test_bad_mode(self, tmp_path):
        w = builtin("m3")
        with pytest.raises(ConfigError):
            emit_series(w, initial_state(w), 1, "nope", str(tmp_path))


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        p = tmp_path / "w.json"
        assert main(["example", "m3", "--write", str(p)]) == 0
        assert main(["validate", str(p)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_fails(self, tmp_path):
        d = to_dict(builtin("m3"))
        d["edges"][0]["kraus"][0][0][0] = [0.9, 0]
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(d))
        assert main(["validate", str(p)]) == 1
        assert main(["analyze", str(p)]) == 1

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{")
        assert main(["validate", str(p)]) == 2
        assert main(["analyze", "builtin:nope"]) == 2
        assert main(["validate", str(tmp_path / "missing.json")]) == 2
        assert main(["example", "nope"]) == 2

    def test_analyze_json(self, capsys):
        assert main(["analyze", "builtin:m4", "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["period"] == 2 and out["irreducible"] is True

    def test_analyze_text(self, capsys):
        assert main(["analyze", "builtin:ex-9.2"]) == 0
        assert "irreducible: no" in capsys.readouterr().out

    def test_evolve_and_sample(self, tmp_path):
        out = tmp_path / "o"
        assert main(["evolve", "builtin:m3", "--steps", "5", "--initial", "site=2",
                     "--out", str(out)]) == 0
        rows = read_csv(out / "site_probs.csv")
        assert rows[1]["probability"] == "1"
        assert main(["evolve", "builtin:m4", "--steps", "5", "--cesaro", "--out",
                     str(out)]) == 0
        assert main(["sample", "builtin:m3", "--steps", "5", "--trajectories", "10",
                     "--seed", "1", "--out", str(out)]) == 0
        assert os.path.exists(out / "trajectory.csv")

    def test_bad_initial(self, tmp_path):
        assert main(["evolve", "builtin:m3", "--steps", "1", "--initial", "site=9",
                     "--out", str(tmp_path)]) == 2
        assert main(["evolve", "builtin:m3", "--steps", "1", "--initial", "x",
                     "--out", str(tmp_path)]) == 2

    def test_example_stdout(self, capsys):
        assert main(["example", "ex-9.6"]) == 0
        assert parse_config(capsys.readouterr().out).same_as(builtin("ex-9.6"), atol=0)
