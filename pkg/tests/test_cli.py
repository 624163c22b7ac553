import json

import pytest

from dualmem.cli import (
    EXIT_BACKEND,
    EXIT_CONFIG,
    EXIT_MISMATCH,
    EXIT_OK,
    OUTPUT_FILES,
    RunConfig,
    main,
)
from dualmem.persistence import read_records_file


def test_capacity_writes_layout(tmp_path):
    out = tmp_path / "cap"
    assert main(["capacity", "--out", str(out), "--scales", "10,1300", "--placement", "beginning"]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == sorted(OUTPUT_FILES)
    cfg = RunConfig.from_json((out / "config.snapshot").read_text())
    assert cfg.scales == [10, 1300] and cfg.placements == ["beginning"]
    _, records = read_records_file(out / "records.ldj")
    fc = {r.scale: r.matched for r in records if r.architecture == "full_context"}
    assert fc == {10: True, 1300: False}
    assert "0.0% (Lost)" in (out / "report.md").read_text()


def test_replay_is_byte_identical(tmp_path, capsys):
    src = tmp_path / "src"
    assert main(["realistic", "--out", str(src), "--scales", "100,300", "--seeds", "2",
                 "--arch", "dp", "--arch", "fc", "--arch", "rag"]) == EXIT_OK
    assert main(["replay", str(src), "--out", str(tmp_path / "again")]) == EXIT_OK
    assert "identical" in capsys.readouterr().out
    for name in OUTPUT_FILES:
        assert (src / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_replay_detects_tampering(tmp_path):
    src = tmp_path / "src"
    main(["cost", "--out", str(src), "--scales", "100"])
    (src / "report.md").write_text("edited\n")
    assert main(["replay", str(src)]) == EXIT_MISMATCH


@pytest.mark.parametrize("argv", [
    ["capacity", "--out", "X", "--scales", "5"],
    ["capacity", "--out", "X", "--scales", "abc"],
    ["realistic", "--out", "X", "--backend", "http"],
    ["realistic", "--out", "X", "--cadence", "0"],
    ["consolidation-ablation", "--out", "X", "--drop-fractions", "0.0"],
    ["nonsense"],
])
def test_configuration_errors_exit_1(argv, tmp_path):
    argv = [a.replace("X", str(tmp_path / "o")) for a in argv]
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    assert code == EXIT_CONFIG


def test_replay_without_snapshot_is_config_error(tmp_path):
    assert main(["replay", str(tmp_path)]) == EXIT_CONFIG


def test_backend_errors_exit_2(tmp_path):
    out = tmp_path / "http"
    code = main(["capacity", "--out", str(out), "--scales", "10", "--placement", "end",
                 "--backend", "http", "--endpoint", "http://127.0.0.1:9",
                 "--fixtures", str(tmp_path / "fx"), "--fixture-mode", "replay"])
    assert code == EXIT_BACKEND
    _, records = read_records_file(out / "records.ldj")
    assert records and all(r.outcome == "error" for r in records)


def test_crash_is_data_not_failure(tmp_path):
    out = tmp_path / "crash"
    assert main(["realistic", "--out", str(out), "--scales", "10000", "--seeds", "1", "--arch", "fc"]) == EXIT_OK
    assert "0.0% (Crash)" in (out / "report.md").read_text()


def test_cost_report(tmp_path):
    out = tmp_path / "cost"
    assert main(["cost", "--out", str(out), "--scales", "1000"]) == EXIT_OK
    text = (out / "report.md").read_text()
    assert "| 1000 | 8.335 | 52.125 | 0 |" in text
    assert "crossover" in text and "gpt-4o-mini" in text


def test_ablation_orders_variants(tmp_path):
    out = tmp_path / "abl"
    assert main(["consolidation-ablation", "--out", str(out), "--total", "1500"]) == EXIT_OK
    _, records = read_records_file(out / "records.ldj")
    acc = {}
    for r in records:
        if r.call_kind == "inference":
            acc.setdefault(r.group, []).append(r.matched)
    assert sum(acc["oracle"]) / len(acc["oracle"]) > sum(acc["drop_0.5"]) / len(acc["drop_0.5"])


def test_snapshot_roundtrip_ignores_unknown_fields(caplog):
    cfg = RunConfig(command="cost", scales=[10])
    raw = json.loads(cfg.to_json())
    raw["from_the_future"] = 1
    assert RunConfig.from_json(json.dumps(raw)) == cfg
    assert "from_the_future" in caplog.text
