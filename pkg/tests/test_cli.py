import json

import pytest

from helpers import delete_send, golden_doc
from wavepipe import parse_action_list
from wavepipe.cli import OUT_DIR_ENV, main


@pytest.fixture
def gpipe_file(tmp_path):
    path = tmp_path / "g.json"
    assert main(["generate", "--scheme", "gpipe", "--devices", "4", "--microbatches", "4",
                 "--out", str(path)]) == 0
    return path


def test_generate_hanayo(tmp_path):
    path = tmp_path / "h.json"
    assert main(["generate", "--scheme", "hanayo", "--devices", "4", "--waves", "2",
                 "--microbatches", "4", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["config"]["S"] == 16


def test_generate_bad_config(capsys):
    assert main(["generate", "--scheme", "chimera", "--devices", "3", "--microbatches", "4"]) == 2
    assert "P must be even" in capsys.readouterr().err


def test_generate_round_trips(gpipe_file):
    blob = gpipe_file.read_bytes()
    from wavepipe import serialize_action_list
    assert serialize_action_list(parse_action_list(blob)) == blob


def test_generate_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "out"))
    assert main(["generate", "--scheme", "dapple", "-P", "2", "-B", "2"]) == 0
    assert (tmp_path / "out" / "dapple-P2-B2-W1.json").exists()


def test_generate_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--scheme", "gpipe", "-P", "2", "-B", "2",
                 "--out", str(blocker / "sub" / "a.json")]) == 3


def test_usage_error():
    assert main(["generate", "--scheme", "nope", "-P", "2", "-B", "2"]) == 2
    assert main([]) == 2


def test_validate_ok(gpipe_file, capsys):
    assert main(["validate", str(gpipe_file)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_deleted_send(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(delete_send(golden_doc("gpipe_P4_B4"))))
    assert main(["validate", str(path), "--json"]) == 1
    diags = json.loads(capsys.readouterr().out)
    assert any(d["check"] == "dependencies" for d in diags)


def test_validate_truncated(gpipe_file, tmp_path):
    path = tmp_path / "trunc.json"
    path.write_bytes(gpipe_file.read_bytes()[:120])
    assert main(["validate", str(path)]) == 2


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "none.json")]) == 3


def test_simulate_gpipe(gpipe_file, capsys):
    assert main(["simulate", str(gpipe_file), "--tf", "1", "--tb", "2", "--tc", "0", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["bubble_ratio"] - 3 / 7) < 1e-9


def test_simulate_comm_cost(gpipe_file, capsys):
    main(["simulate", str(gpipe_file), "--json"])
    base = json.loads(capsys.readouterr().out)["makespan"]
    main(["simulate", str(gpipe_file), "--tc", "0.5", "--json"])
    assert json.loads(capsys.readouterr().out)["makespan"] > base


def test_simulate_gantt(gpipe_file, tmp_path, capsys):
    svg = tmp_path / "g.svg"
    trace = tmp_path / "t.json"
    assert main(["simulate", str(gpipe_file), "--gantt", "svg", "--gantt-out", str(svg),
                 "--trace-out", str(trace)]) == 0
    n = sum(len(dev) for dev in json.loads(trace.read_text())["devices"])
    assert svg.read_text().count("<rect ") == n + 1


def test_simulate_refuses_invalid(tmp_path):
    path = tmp_path / "bad.json"
    doc = golden_doc("gpipe_P4_B4")
    del doc["actions"][1][1]  # a forward
    path.write_text(json.dumps(doc))
    assert main(["simulate", str(path)]) == 1


def test_render_csv(gpipe_file, tmp_path):
    out = tmp_path / "g.csv"
    assert main(["render", str(gpipe_file), "--format", "csv", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 32


def test_compare_sweep(capsys):
    assert main(["compare", "-P", "4", "-B", "4", "--schemes", "gpipe,dapple,chimera-wave,hanayo",
                 "--waves-sweep", "4", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    hanayo = sorted((r for r in rows if r["scheme"] == "hanayo"), key=lambda r: r["W"])
    ratios = [r["simulated_ratio"] for r in hanayo]
    assert len(ratios) == 4 and all(a > b for a, b in zip(ratios, ratios[1:]))
    assert rows[0]["scheme"] == "hanayo" and rows[0]["W"] == 4


def test_compare_gpipe_dapple(capsys):
    assert main(["compare", "-P", "4", "-B", "4", "--schemes", "gpipe,dapple", "--json"]) == 0
    g, d = sorted(json.loads(capsys.readouterr().out), key=lambda r: r["scheme"], reverse=True)
    assert g["simulated_ratio"] == d["simulated_ratio"]
    assert g["act_variance"] != d["act_variance"]


def test_compare_empty():
    assert main(["compare", "-P", "4", "-B", "4", "--schemes", ""]) == 2


def test_compare_all_rows_fail(capsys):
    assert main(["compare", "-P", "3", "-B", "4", "--schemes", "chimera"]) == 1


def test_analyze(capsys):
    assert main(["analyze", "-P", "4", "-W", "2", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["simplified"] == pytest.approx(6 / 27)
    assert out["chimera_K"] == 4 and len(out["zones"]) == 4


def test_analyze_curves(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["analyze", "--curves", "2,4", "--waves-sweep", "2", "--out", str(out)]) == 0
    assert out.read_text().startswith("scheme,P,W,analytic,simulated")
