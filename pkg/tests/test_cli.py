"""Configuration parsing, CSV round-trips, and the command-line front end."""

import json
import math
import os

import pytest

from qlink.cli import main
from qlink.config import ConfigError, load_config, parse_config
from qlink.csvio import ResultTable, config_hash, read_result_table, write_result_table
from qlink.cutoff import prob_active, waiting_time


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def analytic_doc(**extra):
    doc = {
        "schema_version": 1,
        "mode": "analytic",
        "link": {"p": 0.3, "tstar": 2,
                 "fidelity": {"kind": "depolarizing", "f0": 1.0, "lam": 0.9, "dim": 4}},
        "times": [1, 2, 5, 10],
    }
    doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_valid_config():
    config = parse_config(analytic_doc())
    assert config.mode == "analytic"
    assert config.link.p == 0.3
    assert config.link.tstar.finite_value == 2
    assert config.times == (1, 2, 5, 10)


def test_parse_infinite_cutoff_and_range_times():
    doc = analytic_doc(times={"start": 1, "stop": 6, "step": 2})
    doc["link"]["tstar"] = "inf"
    config = parse_config(doc)
    assert config.link.tstar.is_infinite
    assert config.times == (1, 3, 5)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.pop("schema_version"), "schema_version"),
    (lambda d: d.update(schema_version=99), "schema_version"),
    (lambda d: d.update(mode="frobnicate"), "mode"),
    (lambda d: d["link"].update(p=1.5), "link.p"),
    (lambda d: d["link"].update(tstar=-2), "link.tstar"),
    (lambda d: d["link"].update(tstar="soon"), "link.tstar"),
    (lambda d: d.update(times=[]), "times"),
    (lambda d: d.update(times=[0]), "times"),
    (lambda d: d["link"]["fidelity"].update(kind="magic"), "kind"),
])
def test_parse_rejects_invalid_fields(mutate, fragment):
    doc = analytic_doc()
    mutate(doc)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(doc)


def test_mode_specific_requirements():
    with pytest.raises(ConfigError, match="seed"):
        parse_config({"schema_version": 1, "mode": "simulate",
                      "link": {"p": 0.3, "tstar": 2}, "trials": 10, "horizon": 5})
    with pytest.raises(ConfigError, match="fidelity"):
        parse_config({"schema_version": 1, "mode": "optimize",
                      "link": {"p": 0.3, "tstar": 2}, "horizon": 5})
    with pytest.raises(ConfigError, match="sweep"):
        parse_config({"schema_version": 1, "mode": "sweep",
                      "link": {"p": 0.3, "tstar": 2}, "times": [1]})
    with pytest.raises(ConfigError, match="figure"):
        parse_config({"schema_version": 1, "mode": "reproduce"})
    with pytest.raises(ConfigError, match="figure"):
        parse_config({"schema_version": 1, "mode": "reproduce", "figure": "fig99"})


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema_version": 1,\n  "mode" "analytic"\n}\n')
    with pytest.raises(ConfigError, match=r"line 3"):
        load_config(str(path))


# ---------------------------------------------------------------------------
# config hashing and CSV round-trips
# ---------------------------------------------------------------------------

def test_config_hash_ignores_key_order_but_not_values():
    a = {"mode": "analytic", "link": {"p": 0.3, "tstar": 2}}
    b = {"link": {"tstar": 2, "p": 0.3}, "mode": "analytic"}
    assert config_hash(a) == config_hash(b)
    c = {"mode": "analytic", "link": {"p": 0.31, "tstar": 2}}
    assert config_hash(a) != config_hash(c)


def test_result_table_round_trip(tmp_path):
    table = ResultTable(columns=["a", "b", "c"], rows=[],
                        metadata={"mode": "analytic", "seed": "7"})
    table.append(1, 0.1 + 0.2, None)
    table.append(math.inf, -0.0, "text")
    path = str(tmp_path / "out.csv")
    write_result_table(table, path)
    back = read_result_table(path)
    assert back.columns == table.columns
    assert back.metadata == table.metadata
    assert back.rows == table.rows  # repr round-trips floats exactly


def test_result_table_rejects_ragged_rows(tmp_path):
    table = ResultTable(columns=["a", "b"], rows=[(1,)])
    with pytest.raises(ValueError):
        write_result_table(table, str(tmp_path / "bad.csv"))
    with pytest.raises(ValueError):
        table.append(1, 2, 3)


# ---------------------------------------------------------------------------
# the command-line interface
# ---------------------------------------------------------------------------

def test_cli_analytic(tmp_path):
    config = write_config(tmp_path, analytic_doc())
    out = str(tmp_path / "out.csv")
    assert main(["analytic", "--config", config, "--out", out]) == 0
    table = read_result_table(out)
    assert table.columns == ["p", "tstar", "t", "prob_active", "e_ftilde", "e_f", "e_s"]
    assert table.metadata["mode"] == "analytic"
    assert "config-hash" in table.metadata
    row = dict(zip(table.columns, table.rows[-1]))
    assert row["t"] == 10
    assert row["prob_active"] == pytest.approx(prob_active(10, 2, 0.3), abs=0)


def test_cli_analytic_waiting_table(tmp_path):
    doc = {"schema_version": 1, "mode": "analytic",
           "link": {"p": 0.3, "tstar": 5}, "t_req": [0, 10, 30]}
    config = write_config(tmp_path, doc)
    out = str(tmp_path / "wait.csv")
    assert main(["analytic", "--config", config, "--out", out]) == 0
    table = read_result_table(out)
    assert table.columns == ["p", "tstar", "t_req", "e_wait", "e_wait_limit"]
    row = dict(zip(table.columns, table.rows[0]))
    assert row["e_wait"] == pytest.approx(waiting_time(0, 5, 0.3).expectation, abs=0)


def test_cli_sweep_is_thread_count_invariant(tmp_path, monkeypatch):
    doc = {"schema_version": 1, "mode": "sweep",
           "link": {"p": 0.3, "tstar": 2}, "times": [1, 5, 9],
           "sweep": {"field": "tstar", "values": [5, 0, "inf", 2]}}
    config = write_config(tmp_path, doc)
    out1, out2 = str(tmp_path / "s1.csv"), str(tmp_path / "s2.csv")
    assert main(["sweep", "--config", config, "--out", out1, "--threads", "1"]) == 0
    monkeypatch.setenv("QLINK_THREADS", "4")
    assert main(["sweep", "--config", config, "--out", out2]) == 0
    assert open(out1).read() == open(out2).read()
    # rows are ordered by sweep value (finite ascending, then inf)
    table = read_result_table(out1)
    assert [r[1] for r in table.rows[::3]] == [0, 2, 5, math.inf]


def test_cli_simulate_deterministic_and_seed_override(tmp_path):
    doc = {"schema_version": 1, "mode": "simulate",
           "link": {"p": 0.4, "tstar": 2,
                    "fidelity": {"kind": "depolarizing", "lam": 0.9}},
           "horizon": 6, "trials": 200, "seed": 5}
    config = write_config(tmp_path, doc)
    outs = [str(tmp_path / f"sim{i}.csv") for i in range(3)]
    assert main(["simulate", "--config", config, "--out", outs[0]]) == 0
    assert main(["simulate", "--config", config, "--out", outs[1]]) == 0
    assert open(outs[0]).read() == open(outs[1]).read()
    assert main(["simulate", "--config", config, "--out", outs[2],
                 "--seed", "6"]) == 0
    assert open(outs[0]).read() != open(outs[2]).read()
    table = read_result_table(outs[2])
    assert table.metadata["seed"] == "6"
    row = dict(zip(table.columns, table.rows[0]))
    assert row["prob_active_exact"] == pytest.approx(0.4, abs=0)


def test_cli_simulate_single_trial_blank_errors(tmp_path):
    doc = {"schema_version": 1, "mode": "simulate",
           "link": {"p": 0.4, "tstar": 2}, "horizon": 3, "trials": 1, "seed": 1}
    config = write_config(tmp_path, doc)
    out = str(tmp_path / "one.csv")
    assert main(["simulate", "--config", config, "--out", out]) == 0
    table = read_result_table(out)
    row = dict(zip(table.columns, table.rows[0]))
    assert row["prob_active_se"] is None


def test_cli_optimize(tmp_path):
    doc = {"schema_version": 1, "mode": "optimize",
           "link": {"p": 0.3, "tstar": 2,
                    "fidelity": {"kind": "depolarizing", "lam": 0.8}},
           "horizon": 8}
    config = write_config(tmp_path, doc)
    out = str(tmp_path / "opt.csv")
    assert main(["optimize", "--config", config, "--out", out]) == 0
    table = read_result_table(out)
    rows = {r[0]: dict(zip(table.columns, r)) for r in table.rows}
    assert set(rows) == {"optimal", "greedy"} | {
        f"cutoff({v})" for v in list(range(9)) + ["inf"]}
    best = rows["optimal"]["e_ftilde"]
    for name, row in rows.items():
        assert best >= row["e_ftilde"] - 1e-12
    # the policy dump sits next to the table
    dump = json.load(open(out + ".policy.json"))
    assert dump["horizon"] == 8 and dump["mode"] == "reduced"
    assert any(a["x"] == 0 and a["action"] == 1 for a in dump["actions"])


def test_cli_optimize_full_mode_cap_is_a_limit_error(tmp_path):
    doc = {"schema_version": 1, "mode": "optimize", "optimizer_mode": "full",
           "link": {"p": 0.3, "tstar": 2,
                    "fidelity": {"kind": "depolarizing", "lam": 0.8}},
           "horizon": 20}
    config = write_config(tmp_path, doc)
    assert main(["optimize", "--config", config,
                 "--out", str(tmp_path / "x.csv")]) == 3


def test_cli_exit_codes(tmp_path):
    good = write_config(tmp_path, analytic_doc())
    # bad config document
    bad = write_config(tmp_path, {"schema_version": 1, "mode": "nope"}, "bad.json")
    assert main(["analytic", "--config", bad, "--out", str(tmp_path / "o.csv")]) == 2
    # command/mode mismatch
    assert main(["simulate", "--config", good, "--out", str(tmp_path / "o.csv")]) == 2
    # missing config file
    assert main(["analytic", "--config", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "o.csv")]) == 4
    # unwritable output
    assert main(["analytic", "--config", good,
                 "--out", str(tmp_path / "no_dir" / "o.csv")]) == 4
    # bad thread count from the environment
    os.environ["QLINK_THREADS"] = "many"
    try:
        assert main(["analytic", "--config", good,
                     "--out", str(tmp_path / "o.csv")]) == 2
    finally:
        del os.environ["QLINK_THREADS"]


def test_cli_reproduce_figure(tmp_path):
    doc = {"schema_version": 1, "mode": "reproduce", "figure": "fig7",
           "overrides": {"t_req_max": 5, "tstars": [0, 5]}}
    config = write_config(tmp_path, doc)
    out = str(tmp_path / "fig7.csv")
    assert main(["reproduce", "--config", config, "--out", out]) == 0
    table = read_result_table(out)
    assert table.columns == ["tstar", "t_req", "e_wait"]
    assert table.metadata["figure"] == "fig7"
    assert len(table.rows) == 12
    row = dict(zip(table.columns, table.rows[0]))
    assert row["e_wait"] == pytest.approx(waiting_time(0, 0, 0.3).expectation, abs=0)
