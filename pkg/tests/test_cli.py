import json

from patchwork import cli


def summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


def test_run_writes_report_and_replays(tmp_path, capsys):
    code = cli.main(["run", "--scenario", "scenarios/honest.json", "--out", str(tmp_path),
                     "--format", "both", "--seed", "11"])
    assert code == 0
    info = summary(capsys)
    assert info["status"] == "ok" and info["seed"] == 11
    report = next(p for p in info["report"] if p.endswith(".json"))
    assert cli.main(["replay", report]) == 0
    assert summary(capsys)["status"] == "ok"


def test_replay_mismatch_exit_code(tmp_path, capsys):
    cli.main(["run", "--scenario", "scenarios/honest.json", "--out", str(tmp_path)])
    path = summary(capsys)["report"][0]
    data = json.loads(open(path).read())
    data["body"]["trials"][0]["days_run"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert cli.main(["replay", str(bad)]) == 3
    assert "days_run" in capsys.readouterr().err


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PATCHWORK_SEED", "77")
    assert cli.main(["campaign", "--scenario", "scenarios/honest.json", "--trials", "2",
                     "--out", str(tmp_path)]) == 0
    info = summary(capsys)
    assert info["seed"] == 77 and info["trials"] == 2


def test_validation_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"banks": [{"id": "B1"}], "days": "many"}')
    assert cli.main(["run", "--scenario", str(bad)]) == 1
    captured = capsys.readouterr()
    assert "days" in captured.err
    assert json.loads(captured.out)["status"] == "invalid"


def test_bad_arguments_exit_code(capsys):
    assert cli.main(["run"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_sweep_csv(tmp_path, capsys):
    assert cli.main(["sweep", "--scenario", "scenarios/econ_grid.json", "--out", str(tmp_path),
                     "--format", "csv"]) == 0
    path = summary(capsys)["report"][0]
    lines = open(path).read().splitlines()
    assert len(lines) == 28


def test_verify_theorems_quick(tmp_path, capsys):
    assert cli.main(["verify-theorems", "--seed", "42", "--scale", "0.01",
                     "--out", str(tmp_path)]) == 0
    info = summary(capsys)
    assert info["failed"] == [] and info["checks"] == 16
