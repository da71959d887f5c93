import json
from fractions import Fraction

import pytest

from kselect import ContinuousFamily, DiscreteDistribution, Instance
from kselect.cli import main
from kselect.io import FormatError, instance_from_json, instance_to_json, load_instance, save_instance

from conftest import coin, risky, safe

F = Fraction


def write(tmp_path, data, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


@pytest.fixture
def intro_file(tmp_path, intro_instance):
    path = tmp_path / "intro.json"
    save_instance(intro_instance, path)
    return str(path)


class TestJson:
    def test_round_trip_exact(self, tmp_path):
        inst = Instance([coin(), risky(), safe()], 2, ["c", "r", "s"])
        path = tmp_path / "a.json"
        save_instance(inst, path)
        back = load_instance(path)
        assert back.k == 2 and back.labels == ["c", "r", "s"]
        assert [v.exact for v in back.variables] == [v.exact for v in inst.variables]

    def test_round_trip_float_and_family(self, tmp_path):
        d = DiscreteDistribution([(0.5, 0.25), (2.0, 0.75)])
        inst = Instance([d, ContinuousFamily.exponential(2.0)], 1)
        path = tmp_path / "b.json"
        save_instance(inst, path)
        back = load_instance(path)
        assert not back.variables[0].is_exact
        assert back.sources[1].params() == inst.sources[1].params()

    def test_number_kinds(self):
        inst = instance_from_json({"k": 1, "variables": [{"atoms": [["1/3", "1/2"], [2, "1/2"]]}]})
        assert inst.variables[0].exact == ((F(1, 3), F(1, 2)), (2, F(1, 2)))

    def test_written_form(self):
        data = instance_to_json(Instance([risky()], 1))
        assert data["variables"][0]["atoms"] == [["0", "9/10"], ["10", "1/10"]]

    @pytest.mark.parametrize("data", [
        {"k": 1},
        {"variables": [{"atoms": [[1, 1]]}]},
        {"k": 1, "variables": [{"atoms": []}]},
        {"k": 1, "variables": [{"atoms": [["x", 1]]}]},
        {"k": 1, "variables": [{"atoms": [[True, 1]]}]},
        {"k": 1, "variables": [{"family": "cauchy"}]},
        {"k": 1, "variables": [{"family": "uniform", "low": 0}]},
        {"k": 1, "variables": [{"nothing": 1}]},
        {"k": 1, "n": 3, "variables": [{"atoms": [[1, 1]]}]},
    ])
    def test_format_errors(self, data):
        with pytest.raises(FormatError):
            instance_from_json(data)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(FormatError):
            load_instance(path)


class TestCliQueries:
    def test_eval(self, capsys, intro_file):
        code, out = run(capsys, ["eval", "--instance", intro_file, "--subset", "10,11"])
        assert code == 0
        assert json.loads(out.out)["value"] == "19/10"

    def test_eval_smax_with_mc(self, capsys, tmp_path):
        path = write(tmp_path, {"k": 2, "variables": [{"atoms": [[1, 1]]}, {"atoms": [[3, 1]]}]})
        code, out = run(capsys, ["eval", "--instance", path, "--objective", "smax", "--mc", "100"])
        res = json.loads(out.out)
        assert code == 0 and res["value"] == "1" and res["monte_carlo"]["mean"] == 1.0

    def test_oracle(self, capsys, tmp_path):
        path = write(tmp_path, instance_to_json(Instance([risky()] * 4 + [safe()], 2)))
        code, out = run(capsys, ["oracle", "--instance", path])
        res = json.loads(out.out)
        # one safe floor beats a second risky variable: 1.99 > 1.9
        assert code == 0 and res["subset"] == [0, 4] and res["value"] == "199/100"

    def test_oracle_cap_is_usage_error(self, capsys, intro_file):
        code, out = run(capsys, ["oracle", "--instance", intro_file, "--cap", "10"])
        assert code == 2 and "too large" in out.err

    @pytest.mark.parametrize("argv,subset", [
        (["--method", "quantile"], list(range(10))),
        (["--method", "quantile", "--param", "0.5", "--quantile-convention", "bottom"], list(range(10))),
        (["--method", "kr-q", "--param", "0.1"], list(range(10, 20))),
        (["--method", "kr-q", "--param", "0.9", "--quantile-convention", "bottom"], list(range(10, 20))),
        (["--method", "kr-samples"], list(range(10, 20))),
        (["--method", "mean"], list(range(10))),
        (["--method", "greedy"], [0] + list(range(10, 19))),
    ])
    def test_select(self, capsys, intro_file, argv, subset):
        code, out = run(capsys, ["select", "--instance", intro_file] + argv)
        assert code == 0
        assert json.loads(out.out)["subset"] == subset

    def test_select_bad_param(self, capsys, intro_file):
        code, _ = run(capsys, ["select", "--instance", intro_file, "--method", "quantile",
                               "--param", "1.5", "--quantile-convention", "bottom"])
        assert code == 2

    def test_select_missing_method_exits(self, intro_file):
        with pytest.raises(SystemExit) as exc:
            main(["select", "--instance", intro_file])
        assert exc.value.code == 2

    def test_ptas_trace(self, capsys, tmp_path, intro_file):
        trace = tmp_path / "trace.json"
        code, out = run(capsys, ["ptas", "--instance", intro_file, "--epsilon", "0.25", "--trace", str(trace)])
        assert code == 0
        res = json.loads(out.out)
        opt = 10 * (1 - 0.9 ** 9) + 1.1 * 0.9 ** 9
        assert len(res["subset"]) == 10 and F(res["value_max"]) >= 0.75 * opt
        assert "tau" in json.loads(trace.read_text())

    def test_k_override(self, capsys, intro_file):
        code, out = run(capsys, ["select", "--instance", intro_file, "--k", "2", "--method", "mean"])
        assert code == 0 and json.loads(out.out)["subset"] == [0, 1]

    def test_missing_file(self, capsys, tmp_path):
        code, _ = run(capsys, ["eval", "--instance", str(tmp_path / "none.json")])
        assert code == 2


class TestCliBeta:
    def test_discrete_report(self, capsys, intro_file):
        code, out = run(capsys, ["beta", "--instance", intro_file, "--report"])
        res = json.loads(out.out)
        assert code == 0
        assert res["probability"]["holds"] and res["truncation_equivariant"]
        assert "tail_bounds" not in res

    def test_exponential_report(self, capsys, tmp_path):
        path = write(tmp_path, {"k": 8, "variables": [{"family": "exponential", "rate": 1.0}] * 8})
        code, out = run(capsys, ["beta", "--instance", path, "--report"])
        assert code == 0 and json.loads(out.out)["tail_bounds"]["ok"]

    def test_plain(self, capsys, tmp_path):
        path = write(tmp_path, {"k": 2, "variables": [{"atoms": [[5, 1]]}, {"atoms": [[3, 1]]}]})
        code, out = run(capsys, ["beta", "--instance", path])
        res = json.loads(out.out)
        assert code == 0 and (res["beta1"], res["beta2"]) == ("3", "5")


class TestCliGen:
    def test_clique(self, tmp_path):
        out = tmp_path / "g.json"
        assert main(["gen", "--family", "clique-reduction", "--params", "graph=cycle:4", "k=2",
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["certificates"]["soundness"] and data["graph"]["n_vertices"] == 4
        assert load_instance(out).n == 4

    def test_dks(self, tmp_path):
        out = tmp_path / "d.json"
        assert main(["gen", "--family", "dks-reduction", "--params", "graph=complete:4", "k=3",
                     "--out", str(out)]) == 0
        assert load_instance(out).k == 3

    def test_graph_file(self, tmp_path):
        g = write(tmp_path, {"n_vertices": 2, "edges": [[0, 1]]}, "graph.json")
        out = tmp_path / "d.json"
        assert main(["gen", "--family", "dks-reduction", "--params", f"graph={g}", "--out", str(out)]) == 0

    def test_clipped_normal_and_bias(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["gen", "--family", "clipped-normal", "--params", "n=20", "k=3", "draws=50",
                     "--out", str(a)]) == 0
        assert main(["gen", "--family", "bias", "--params", "n=20", "k=3", "big_draws=50",
                     "--out", str(b)]) == 0
        assert load_instance(a).n == 20
        data = json.loads(b.read_text())
        assert len(data["true_families"]) == 20
        assert {v["label"] for v in data["variables"]} <= {"small", "big"}

    def test_bad_params(self, capsys, tmp_path):
        code, _ = run(capsys, ["gen", "--family", "bias", "--params", "n", "--out", str(tmp_path / "x.json")])
        assert code == 2
        code, _ = run(capsys, ["gen", "--family", "clique-reduction", "--params", "graph=cycle:9",
                               "--out", str(tmp_path / "x.json")])
        assert code == 2


class TestCliExperiments:
    def test_verify_pass(self, capsys, tmp_path):
        cfg = write(tmp_path, {"trials": 2, "suites": ["greedy", "beta-probability"]}, "cfg.json")
        out = tmp_path / "v.csv"
        code, res = run(capsys, ["verify", "--config", cfg, "--out", str(out)])
        assert code == 0 and json.loads(res.out)["violations"] == []
        assert out.exists()

    def test_verify_violation(self, capsys, tmp_path):
        cfg = write(tmp_path, {"trials": 1, "seed": 0, "suites": ["dks-upper"]}, "cfg.json")
        code, res = run(capsys, ["verify", "--config", cfg])
        assert code == 1 and json.loads(res.out)["violations"]

    def test_compare(self, capsys, tmp_path):
        cfg = write(tmp_path, {"n": 30, "k_list": [3], "trials": 2, "draws": 40, "sweep": False}, "cfg.json")
        out = tmp_path / "c.csv"
        code, res = run(capsys, ["compare", "--config", cfg, "--out", str(out)])
        assert code == 0 and out.exists() and (tmp_path / "c.summary.csv").exists()
        assert {r["method"] for r in json.loads(res.out)} == {"quantile", "kr-q", "kr-samples", "mean", "greedy"}

    def test_scaling(self, capsys, tmp_path):
        cfg = write(tmp_path, {"sizes": [200, 400], "repeats": 1, "scaling_k": 5}, "cfg.json")
        code, res = run(capsys, ["scaling", "--config", cfg])
        assert code == 0 and len(json.loads(res.out)["doubling_factors"]) == 1

    def test_bad_config(self, capsys, tmp_path):
        cfg = write(tmp_path, {"nonsense": 1}, "cfg.json")
        code, _ = run(capsys, ["compare", "--config", cfg])
        assert code == 2
