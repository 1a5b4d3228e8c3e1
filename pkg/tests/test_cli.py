import json
from pathlib import Path

import numpy as np
import pytest

from flowchain.cli import main
from flowchain.config import load_config, parse_config
from flowchain.errors import ConfigError

REPO = Path(__file__).resolve().parent.parent
DIAMOND = REPO / "configs" / "diamond.json"
TWO_STATE = REPO / "configs" / "two_state_split.json"
CONTINUOUS = REPO / "configs" / "interval_geometric.json"
BIMODAL = REPO / "configs" / "bimodal.json"
GRID = REPO / "configs" / "grid4.json"


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _read_config(path):
    return json.loads(Path(path).read_text())


# -- config parsing -----------------------------------------------------------

def test_load_golden_config():
    config = load_config(str(DIAMOND))
    dag = config.dag()
    assert dag.states[0] == "s0"
    kern, flow = config.kernel_and_flow()
    assert flow.values[0] == pytest.approx(5.0)
    assert config.reward().total() == pytest.approx(5.0)


def test_malformed_json_reports_line_and_column(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"space": [,]}')
    with pytest.raises(ConfigError, match=r"line 1, column"):
        load_config(str(path))
    # through the CLI: exit 1 and a diagnostic on stderr
    code = main(["verify", "--config", str(path)])
    assert code == 1
    assert "line 1" in capsys.readouterr().err


def test_config_requires_exactly_one_kernel_spec(tmp_path):
    data = _read_config(DIAMOND)
    data["kernel"] = {"rows": np.eye(5).tolist()}
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(data)
    del data["kernel"]
    del data["edge_flows"]
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(data)


def test_config_validates_seed_and_state_names(tmp_path):
    data = _read_config(DIAMOND)
    data["simulation"]["seed"] = -1
    with pytest.raises(ConfigError, match="seed"):
        parse_config(data)
    data = _read_config(DIAMOND)
    data["space"]["states"][0] = "start"
    with pytest.raises(ConfigError, match="s0"):
        parse_config(data).dag()
    data = _read_config(DIAMOND)
    data["reward"] = {"nope": 1.0}
    with pytest.raises(ConfigError, match="unknown state"):
        parse_config(data).reward()
    data = _read_config(DIAMOND)
    data["reward"] = {"a": 1.0}
    with pytest.raises(ConfigError, match="non-terminating"):
        parse_config(data).reward()


def test_missing_config_file_is_config_error():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/path.json")


def test_cli_rejects_out_of_range_seed(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code = main(["terminating", "--config", str(DIAMOND), "--method", "sim",
                 "--excursions", "100", "--seed", "-5", "--out", str(out)])
    assert code == 1
    assert "64-bit" in capsys.readouterr().err


# -- exit-code contract ---------------------------------------------------------

def test_verify_golden_diamond_exits_zero():
    assert main(["verify", "--config", str(DIAMOND)]) == 0


def test_verify_perturbed_flow_exits_two(tmp_path):
    data = _read_config(DIAMOND)
    data["flow"] = {"s0": 5.0, "a": 2.6, "b": 2.5, "x1": 1.0, "x2": 4.0}
    assert main(["verify", "--config", _write(tmp_path, data)]) == 2


def test_verify_conclusion_failure_exits_three(tmp_path):
    # hypotheses hold within a loose tol, yet the conclusion deviates more:
    # F = 0.1*lambda with rewards off by under tol in each boundary term
    lam = {"s0": 1.0, "a": 0.5, "b": 0.5, "x1": 0.2, "x2": 0.8}
    rows = [
        [0.0, 0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.4, 0.6],
        [0.0, 0.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
    ]
    data = _read_config(DIAMOND)
    del data["edge_flows"]
    data["kernel"] = {"rows": rows}
    data["flow"] = {name: 0.1 * v for name, v in lam.items()}
    data["reward"] = {"x1": 0.06, "x2": 0.04}
    data["tolerances"] = {"tol": 0.045}
    assert main(["verify", "--config", _write(tmp_path, data)]) == 3


def test_validate_subcommand(capsys):
    assert main(["validate", "--config", str(DIAMOND)]) == 0
    assert "ok:" in capsys.readouterr().out


def test_verify_writes_verdict_json(tmp_path):
    out = tmp_path / "verdict.json"
    assert main(["verify", "--config", str(DIAMOND), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["passed"] is True
    assert payload["max_deviation"] <= 1e-10


# -- artifacts -------------------------------------------------------------------

def _lines(path):
    return Path(path).read_text().splitlines()


def test_solve_invariant_csv_schema(tmp_path):
    out = tmp_path / "lambda.csv"
    assert main(["solve-invariant", "--config", str(DIAMOND), "--method", "exact", "--out", str(out)]) == 0
    lines = _lines(out)
    assert lines[0] == "state,lambda,stderr"
    assert lines[1] == "s0,1.0,"
    assert lines[-1].startswith("# seed=20240817, version=")
    values = {row.split(",")[0]: float(row.split(",")[1]) for row in lines[1:-1]}
    assert values == {"s0": 1.0, "a": 0.5, "b": 0.5, "x1": 0.2, "x2": 0.8}


def test_solve_invariant_power_method_via_cli(tmp_path):
    out = tmp_path / "lambda_power.csv"
    assert main(["solve-invariant", "--config", str(DIAMOND), "--method", "power", "--out", str(out)]) == 0
    values = {row.split(",")[0]: float(row.split(",")[1]) for row in _lines(out)[1:-1]}
    for name, expected in (("s0", 1.0), ("a", 0.5), ("b", 0.5), ("x1", 0.2), ("x2", 0.8)):
        assert abs(values[name] - expected) <= 1e-9


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "flowchain" in capsys.readouterr().out


def test_terminating_methods_agree_via_cli(tmp_path):
    outs = {}
    for method in ("enum", "lemma", "sim"):
        out = tmp_path / f"{method}.csv"
        args = ["terminating", "--config", str(DIAMOND), "--method", method, "--out", str(out)]
        if method == "sim":
            args += ["--excursions", "200000"]
        assert main(args) == 0
        rows = [line.split(",") for line in _lines(out)[1:-1]]
        outs[method] = {r[0]: float(r[1]) for r in rows}
    assert outs["enum"] == {"x1": 0.2, "x2": 0.8}
    assert outs["enum"] == outs["lemma"]
    for x, p in outs["enum"].items():
        assert abs(outs["sim"][x] - p) <= 4 * np.sqrt(p * (1 - p) / 200_000)


def test_train_subcommand_writes_params_and_history(tmp_path):
    params = tmp_path / "params.json"
    history = tmp_path / "history.csv"
    code = main([
        "train", "--config", str(GRID), "--iters", "60000", "--step", "0.05",
        "--seed", "7", "--out", str(params), "--history", str(history),
    ])
    assert code == 0
    payload = json.loads(params.read_text())
    assert payload["final_loss"] <= 1e-8
    assert set(payload["logits"]["s0"].keys()) == {"c00"}
    lines = _lines(history)
    assert lines[0] == "iter,loss"
    assert float(lines[-2].split(",")[1]) == payload["final_loss"]


def test_split_simulate_discrete_and_continuous(tmp_path):
    out = tmp_path / "split.csv"
    assert main(["split-simulate", "--config", str(TWO_STATE), "--excursions", "50000", "--out", str(out)]) == 0
    lines = _lines(out)
    assert lines[0] == "state,prob,stderr"
    probs = {int(r.split(",")[0]): float(r.split(",")[1]) for r in lines[1:-1]}
    assert abs(probs[0] - 5 / 17) <= 4 * np.sqrt((5 / 17) * (12 / 17) / 50_000)

    out2 = tmp_path / "hist.csv"
    assert main(["split-simulate", "--config", str(CONTINUOUS), "--excursions", "50000", "--out", str(out2)]) == 0
    lines = _lines(out2)
    assert lines[0] == "bin_lo,bin_hi,mass,count"
    assert len(lines) == 1 + 64 + 1
    masses = [float(r.split(",")[2]) for r in lines[1:-1]]
    assert sum(masses) == pytest.approx(1.0, abs=1e-12)


def test_counterexample_csv(tmp_path):
    out = tmp_path / "ce.csv"
    assert main(["counterexample", "--excursions", "100000", "--cap", "200", "--seed", "3", "--out", str(out)]) == 0
    lines = _lines(out)
    assert lines[0] == "n,analytic_cumulative,simulated_fraction,stderr"
    assert len(lines) == 1 + 200 + 1
    last = lines[-2].split(",")
    assert abs(float(last[1]) - float(last[2])) <= 6 * float(last[3]) + 1e-9


def test_mcmc_compare_csv(tmp_path):
    out = tmp_path / "compare.csv"
    code = main([
        "mcmc-compare", "--config", str(BIMODAL), "--steps", "50000",
        "--excursions", "50000", "--seed", "5", "--out", str(out),
    ])
    assert code == 0
    lines = _lines(out)
    assert lines[0] == "section,x,gfn,mh"
    sections = {line.split(",")[0] for line in lines[1:-1]}
    assert sections == {"tv", "autocorr", "ess"}


# -- determinism across worker counts -------------------------------------------

def _run_twice(tmp_path, args_template):
    outputs = []
    for workers, name in ((1, "w1.csv"), (4, "w4.csv")):
        out = tmp_path / name
        args = [a.format(out=str(out)) for a in args_template]
        args += ["--workers", str(workers)]
        assert main(args) == 0
        outputs.append(out.read_bytes())
    return outputs


@pytest.mark.parametrize(
    "args_template",
    [
        ["terminating", "--config", str(DIAMOND), "--method", "sim", "--excursions", "30000", "--out", "{out}"],
        ["solve-invariant", "--config", str(DIAMOND), "--method", "occupation", "--excursions", "30000", "--out", "{out}"],
        ["split-simulate", "--config", str(TWO_STATE), "--excursions", "30000", "--out", "{out}"],
        ["split-simulate", "--config", str(CONTINUOUS), "--excursions", "30000", "--out", "{out}"],
    ],
    ids=["terminating-sim", "occupation", "split-discrete", "split-continuous"],
)
def test_worker_count_does_not_change_output_bytes(tmp_path, args_template):
    w1, w4 = _run_twice(tmp_path, args_template)
    assert w1 == w4


def test_rerun_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        assert main(["terminating", "--config", str(DIAMOND), "--method", "sim",
                     "--excursions", "20000", "--out", str(out)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_rgfn_workers_env_default(tmp_path, monkeypatch):
    out1 = tmp_path / "env.csv"
    monkeypatch.setenv("RGFN_WORKERS", "3")
    assert main(["terminating", "--config", str(DIAMOND), "--method", "sim",
                 "--excursions", "20000", "--out", str(out1)]) == 0
    out2 = tmp_path / "flag.csv"
    monkeypatch.delenv("RGFN_WORKERS")
    assert main(["terminating", "--config", str(DIAMOND), "--method", "sim",
                 "--excursions", "20000", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
