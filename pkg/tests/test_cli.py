import csv
import io

import pytest

from udsched.cli import main
from udsched.experiment import SUMMARY_HEADER, ExperimentSpec, run_seed, summary_csv, sweep
from udsched.workflow import Edge, Task, WorkflowGraph, to_dax

CYCLIC = ('<adag><job id="a" runtime="1"/><job id="b" runtime="1"/>'
          '<child ref="a"><parent ref="b"/></child><child ref="b"><parent ref="a"/></child></adag>')


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def dax_file(tmp_path, graph, name="w.xml"):
    p = tmp_path / name
    p.write_text(to_dax(graph, 2000.0))
    return str(p)


class TestRun:
    def test_three_reps(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "--workflow", "pipeline:20", "--theta", "0.5", "--reps", "3",
                     "--out", str(out)]) == 0
        r = rows(out / "summary.csv")
        assert len(r) == 3 and tuple(r[0]) == SUMMARY_HEADER

    def test_theta_sweep_deterministic(self, tmp_path):
        args = ["run", "--workflow", "fanout_fanin:10", "--theta", ",".join(f"0.{i}" for i in range(1, 10)),
                "--seed", "17"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        a = (tmp_path / "a" / "summary.csv").read_bytes()
        assert a == (tmp_path / "b" / "summary.csv").read_bytes()
        assert len(rows(tmp_path / "a" / "summary.csv")) == 9

    def test_missing_dax(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["run", "--workflow", f"{tmp_path / 'nope.xml'},pipeline:5", "--out", str(out)])
        assert code != 0
        r = rows(out / "summary.csv")
        assert [x["workflow"] for x in r] == ["pipeline:5"]
        assert "nope.xml" in capsys.readouterr().err

    def test_traces(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "--workflow", "pipeline:4", "--reps", "2", "--trace", "--out", str(out)]) == 0
        traces = sorted(p.name for p in out.glob("trace-*.csv"))
        assert len(traces) == 2
        assert (out / traces[0]).read_text().startswith("task,vm,pricing,est,eft,ast,aft,attempt\n")

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.ini"
        cfg.write_text("[workflow]\nworkflow = pipeline:6\n[uds]\ntheta = 0.2, 0.8\na = 1\n"
                       "[sweep]\nreps = 2\nseed = 5\n[sim]\nvariation = off\n")
        out = tmp_path / "o"
        assert main(["run", "--config", str(cfg), "--reps", "1", "--out", str(out)]) == 0
        r = rows(out / "summary.csv")
        assert [(x["theta"], x["a"]) for x in r] == [("0.2", "1"), ("0.8", "1")]

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[uds]\ntheta = 0.5\nbogus = 1\n")
        assert main(["run", "--config", str(cfg), "--workflow", "pipeline:3", "--out", str(tmp_path)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "x.ini"), "--out", str(tmp_path)]) == 2


class TestBounds:
    def test_chain_example(self, tmp_path, capsys):
        cat = tmp_path / "cat.csv"
        cat.write_text("name,vcpus,price_reliable,price_unreliable,p_hourly,speed_mips\n"
                       "slow,1,1.0,0.2,0.1,1\nfast,1,2.0,0.4,0.1,2\n")
        g = WorkflowGraph([Task("t1", 100.0), Task("t2", 100.0)], [Edge("t1", "t2", 0.0)])
        p = tmp_path / "w.xml"
        p.write_text(to_dax(g, 1.0))
        assert main(["bounds", "--workflow", str(p), "--catalog", str(cat),
                     "--provisioning_seconds", "0"]) == 0
        assert "m_lower = 100 s" in capsys.readouterr().out

    def test_single_small_task(self, tmp_path, capsys):
        p = dax_file(tmp_path, WorkflowGraph([Task("a", 10_000.0)]))
        assert main(["bounds", "--workflow", p]) == 0
        assert "c_lower = 0.005" in capsys.readouterr().out


class TestValidate:
    def test_valid(self, tmp_path, capsys):
        p = dax_file(tmp_path, WorkflowGraph([Task("a", 1.0), Task("b", 1.0)], [Edge("a", "b", 1.0)]))
        assert main(["validate", p]) == 0
        assert "2 tasks, 1 edges" in capsys.readouterr().out

    def test_cyclic(self, tmp_path):
        p = tmp_path / "c.xml"
        p.write_text(CYCLIC)
        assert main(["validate", str(p)]) != 0

    def test_isolated_task_warns(self, tmp_path, capsys):
        g = WorkflowGraph([Task("a", 1.0), Task("b", 1.0), Task("lonely", 1.0)], [Edge("a", "b", 1.0)])
        assert main(["validate", dax_file(tmp_path, g)]) == 0
        out = capsys.readouterr().out
        assert "warning" in out and "lonely" in out and "pseudo" in out


class TestExperiment:
    def test_row_count_is_cross_product(self):
        spec = ExperimentSpec(("pipeline:5", "aggregation:5"), (0.3, 0.7), (1.0, 2.0), (2.0,), 2, seed=1)
        assert len(list(csv.DictReader(io.StringIO(summary_csv(sweep(spec)))))) == 2 * 2 * 2 * 1 * 2

    def test_failures_recorded_and_skipped(self):
        spec = ExperimentSpec(("pipeline:5", "/nonexistent.xml"), (0.5,), replications=1)
        outcomes = sweep(spec)
        assert sum(o.error is not None for o in outcomes) == 1
        assert summary_csv(outcomes).count("\n") == 2

    def test_seed_is_stable(self):
        assert run_seed(3, "pipeline:5", 0.5, 2, 2, 0) == run_seed(3, "pipeline:5", 0.5, 2.0, 2.0, 0)
        assert run_seed(3, "pipeline:5", 0.5, 2, 2, 0) != run_seed(3, "pipeline:5", 0.5, 2, 2, 1)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(("pipeline:5",), thetas=())
        with pytest.raises(ValueError):
            ExperimentSpec(("pipeline:5",), replications=0)
