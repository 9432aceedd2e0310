import json

import pytest

from timemark.cli import main
from timemark.encoder import read_documents

SMALL = ["--vocab-size", "64"]


@pytest.fixture
def vault(tmp_path, monkeypatch):
    path = tmp_path / "vault.json"
    monkeypatch.setenv("TIMEMARK_VAULT", str(path))
    assert main(["keyinit", "--seed", "7"]) == 0
    return path


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_keyinit_refuses_overwrite(vault, capsys):
    capsys.readouterr()
    assert main(["keyinit", "--seed", "7"]) == 4
    assert "already exists" in capsys.readouterr().err
    assert main(["keyinit", "--seed", "7", "--force"]) == 0


def test_missing_vault(tmp_path, monkeypatch):
    monkeypatch.delenv("TIMEMARK_VAULT", raising=False)
    assert main(["advance"]) == 4
    assert main(["advance", "--vault", str(tmp_path / "none.json")]) == 4


def test_advance_and_generate_identify(vault, tmp_path, capsys):
    assert main(["advance", "3"]) == 0
    assert _json(capsys)["current_index"] == 3
    out = tmp_path / "docs.jsonl"
    assert main(["generate", "--out", str(out), "--count", "2", *SMALL]) == 0
    assert _json(capsys)["documents"] == 2
    assert len(read_documents(out)) == 2
    assert main(["identify", str(out), "--windows", "1:3", *SMALL]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["verdict"] for r in lines] == ["Identified", "Identified"]
    assert all(r["window"] == 3 for r in lines)

    plain = tmp_path / "plain.jsonl"
    assert main(["generate", "--out", str(plain), "--no-watermark", *SMALL]) == 0
    assert main(["identify", str(plain), "--windows", "0,1,2,3", *SMALL]) == 1

    audit = json.loads(vault.read_text())["audit"]
    assert any(a["action"] == "read" and a["requester_role"] == "authority" for a in audit)


def test_identify_exit_code_is_worst_verdict(vault, tmp_path, capsys):
    out = tmp_path / "mix.jsonl"
    main(["generate", "--out", str(out), *SMALL])
    plain = tmp_path / "plain.jsonl"
    main(["generate", "--out", str(plain), "--no-watermark", *SMALL])
    out.write_text(out.read_text() + plain.read_text())
    capsys.readouterr()
    assert main(["identify", str(out), "--windows", "0", *SMALL]) == 1


def test_provider_cannot_generate_for_past_window(vault, tmp_path, capsys):
    main(["advance", "2"])
    capsys.readouterr()
    assert main(["generate", "--out", str(tmp_path / "x.jsonl"), "--window", "1", *SMALL]) == 4
    assert "ProviderPastAccessDenied" in capsys.readouterr().err
    audit = json.loads(vault.read_text())["audit"]
    denied = [a for a in audit if not a["granted"]]
    assert denied and denied[-1]["requested_index"] == 1 and denied[-1]["requester_role"] == "provider"


def test_identify_future_window_is_vault_error(vault, tmp_path):
    out = tmp_path / "d.jsonl"
    main(["generate", "--out", str(out), *SMALL])
    assert main(["identify", str(out), "--windows", "0:2", *SMALL]) == 4


def test_input_errors(vault, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{nope\n")
    assert main(["identify", str(bad), "--windows", "0", *SMALL]) == 3
    assert "line 1" in capsys.readouterr().err
    short = tmp_path / "short.jsonl"
    short.write_text('{"tokens": [1, 2, 3]}\n')
    assert main(["identify", str(short), "--windows", "0", *SMALL]) == 3
    assert main(["identify", str(short), "--windows", "a:b"]) == 3
    assert main(["analyze", "--phi", "2"]) == 3
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text('{"vocab_size": 64, "bogus": 1}')
    assert main(["generate", "--out", str(tmp_path / "o"), "--config", str(cfgfile)]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["identify"])
    assert exc.value.code == 3


def test_analyze_output(capsys):
    assert main(["analyze", "--pretty"]) == 0
    captured = capsys.readouterr()
    js = json.loads(captured.out)
    assert js["accept_count"] == 205
    assert js["p_tok"]["value"] == pytest.approx(0.9241418, abs=1e-7)
    assert "1-p_R" in captured.err


def test_experiment_is_byte_deterministic(capsys):
    argv = ["experiment", "--trials", "2", *SMALL]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["correct_identifications"]["count"] == 2


def test_attack_subcommand(capsys):
    argv = ["attack", "--mode", "timemark", "--docs", "8", "--forge-trials", "1", "--iterations", "5", "--pretty"]
    assert main(argv) == 0
    captured = capsys.readouterr()
    js = json.loads(captured.out)
    assert list(js) == ["timemark"] and js["timemark"]["forge_trials"] == 1
    assert "bal.acc" in captured.err


def test_generate_is_byte_deterministic(tmp_path, monkeypatch):
    outputs = []
    for run in range(2):
        monkeypatch.setenv("TIMEMARK_VAULT", str(tmp_path / f"v{run}.json"))
        main(["keyinit", "--seed", "11"])
        out = tmp_path / f"d{run}.jsonl"
        main(["generate", "--out", str(out), "--count", "2", "--gamma", "1.5", *SMALL])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
