import json

import pytest

from czxlab.cli import SELFTESTS, build_parser, main


def _load(path):
    doc = json.loads(path.read_text())
    doc.pop("timestamp")
    doc["config"].pop("threads", None)
    return doc


def test_every_command_has_a_selftest():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == set(SELFTESTS)
    assert len(sub) == 13


@pytest.mark.parametrize("name", sorted(SELFTESTS))
def test_selftests_pass(name, capsys):
    assert main([name, "--selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_outputs_and_thread_determinism(tmp_path):
    args = ["kgood", "--jmax", "4", "--trials", "10000", "--plot"]
    assert main(args + ["--output", str(tmp_path / "a")]) == 0
    assert main(args + ["--output", str(tmp_path / "b"), "--threads", "3"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert _load(a / "kgood.json") == _load(b / "kgood.json")
    assert (a / "kgood.csv").read_text().startswith("# version:")
    assert (a / "kgood.png").read_bytes()[:4] == b"\x89PNG"
    doc = json.loads((a / "kgood.json").read_text())
    assert set(doc) == {"config", "version", "result", "timestamp"}
    assert doc["config"]["seed"] == 0


def test_rep_check_ledger(tmp_path):
    out = tmp_path / "r"
    code = main(["rep-check", "--n", "4", "--trials", "2", "--lattices", "1",
                 "--ledger", "--output", str(out)])
    assert code == 0
    assert (out / "rep-check-ledger.csv").exists()


def test_failing_check_exits_one(tmp_path):
    # the theta2 = 0.1 growth check is expected to fail at this resolution
    code = main(["weighted-check", "--n", "6", "--trials", "1", "--output", str(tmp_path)])
    doc = json.loads((tmp_path / "weighted-check.json").read_text())
    assert code == (0 if doc["result"]["passed"] else 1)


@pytest.mark.parametrize("argv", [
    ["kgood", "--threads", "0"],
    ["kgood", "--jmax", "0"],
    ["rep-check", "--kernel", "wavelet"],
    ["nonsense"],
    ["kgood", "--trials", "many"],
])
def test_usage_errors_exit_two(argv, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(argv + ["--output", str(tmp_path)] if argv[0] != "nonsense" else argv)
    assert e.value.code == 2
