import json
import os
import subprocess
import sys

import jsonschema
import pytest

from tmev.cli import main

from conftest import CORPUS, DOCS, corpus_labels, fixture_path


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _tok_files():
    return sorted(os.path.join(CORPUS, f) for f in os.listdir(CORPUS) if f.endswith(".tok"))


def test_scan_corpus_matches_labels(tmp_path, capsys):
    report = tmp_path / "r.json"
    code, _, err = run(["scan", *_tok_files(), "--report", str(report)], capsys)
    assert code == 0
    doc = json.loads(report.read_text())
    with open(os.path.join(DOCS, "report.schema.json"), encoding="utf-8") as fh:
        jsonschema.validate(doc, json.load(fh))
    labels = corpus_labels()
    got = {os.path.basename(r["source"]): r["verdict"] for r in doc["reports"]}
    for name, label in labels.items():
        if "expected_miss_at_depth" in label:
            assert got[name] == "non_tsc_token"
        else:
            assert got[name] == label["verdict"], name
    assert "12 report(s), 0 error(s)" in err


def test_scan_guarded_to_stdout(capsys):
    code, out, _ = run(["scan", os.path.join(CORPUS, "guarded_rebase_chain.tok")], capsys)
    assert code == 0
    assert json.loads(out)["reports"][0]["verdict"] == "tsc_token"


def test_scan_missing_file(capsys):
    code, _, err = run(["scan", "/no/such/file.tok"], capsys)
    assert code == 2
    assert "no such file" in err


def test_scan_syntax_error_is_finding(tmp_path, capsys):
    bad = tmp_path / "bad.tok"
    bad.write_text("contract {")
    good = os.path.join(CORPUS, "erc20_plain.tok")
    code, out, err = run(["scan", str(bad), good], capsys)
    assert code == 1
    assert len(json.loads(out)["reports"]) == 1
    assert "bad.tok: error" in err


def test_scan_parallel_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    files = _tok_files()
    assert run(["scan", *files, "--report", str(a)], capsys)[0] == 0
    assert run(["scan", *files, "--jobs", "3", "--report", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_scan_depth_flag_and_env_config(tmp_path, capsys, monkeypatch):
    path = os.path.join(CORPUS, "depth4_chain.tok")
    _, out, _ = run(["scan", path], capsys)
    assert json.loads(out)["reports"][0]["verdict"] == "non_tsc_token"
    _, out, _ = run(["scan", path, "--depth", "4"], capsys)
    assert json.loads(out)["reports"][0]["verdict"] == "tsc_token"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"depth": 4}))
    monkeypatch.setenv("TMEV_CONFIG", str(cfg))
    _, out, _ = run(["scan", path], capsys)
    assert json.loads(out)["reports"][0]["verdict"] == "tsc_token"


def test_bad_config_is_usage_error(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"depth": 0}))
    monkeypatch.setenv("TMEV_CONFIG", str(cfg))
    assert run(["scan", os.path.join(CORPUS, "erc20_plain.tok")], capsys)[0] == 2


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 2
    assert run(["scan", "x.tok", "--depth", "0"], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2


@pytest.mark.parametrize("pool,fixture,expect", [
    ("q", "tournament.scn", "insensitive"),
    ("p", "tournament.scn", "sensitive"),
])
def test_pitex_command(pool, fixture, expect, capsys):
    code, out, _ = run(["pitex", "--fixture", fixture_path(fixture), "--pool", pool], capsys)
    assert code == 0
    assert json.loads(out)["classification"] == expect


def test_pitex_lending(tmp_path, capsys):
    scn = {"tokens": {"X": {}, "Y": {}},
           "pools": {"l": {"kind": "lending_fixed", "token_x": "X", "token_y": "Y",
                           "price_num": 3, "price_den": 2, "reserve_x": 10 ** 6,
                           "reserve_y": 10 ** 6}}}
    f = tmp_path / "l.scn"
    f.write_text(json.dumps(scn))
    code, out, _ = run(["pitex", "--fixture", str(f), "--pool", "l"], capsys)
    assert (code, json.loads(out)["classification"]) == (0, "insensitive")


def test_pitex_unknown_pool(capsys):
    assert run(["pitex", "--fixture", fixture_path("tournament.scn"), "--pool", "zz"],
               capsys)[0] == 2


def test_sim_command(tmp_path, capsys):
    bundle = tmp_path / "b.txs"
    bundle.write_text("searcher q swap_xy 1000\nowner Y rebase 2\n")
    code, out, _ = run(["sim", "--fixture", fixture_path("d1plus_demo.scn"),
                        "--bundle", str(bundle)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and len(doc["receipts"]) == 2
    assert doc["conservation_violations"] == []
    bundle.write_text("searcher q swap_xy 999999999\n")
    code, out, _ = run(["sim", "--fixture", fixture_path("d1plus_demo.scn"),
                        "--bundle", str(bundle)], capsys)
    assert code == 1 and json.loads(out)["reverted_at"] == 0


def test_sim_missing_bundle(capsys):
    assert run(["sim", "--fixture", fixture_path("d1plus_demo.scn"), "--bundle",
                "/nope.txs"], capsys)[0] == 2


def _search(tmp_path, capsys, name, fixture="d1plus_demo.scn",
            mempool="rebase_mempool.jsonl", extra=()):
    out = tmp_path / name
    code, _, err = run(["search", "--fixture", fixture_path(fixture),
                        "--watch", fixture_path("elastic.report.json"),
                        "--mempool", fixture_path(mempool), "--out", str(out), *extra], capsys)
    return code, out, err


def test_search_and_replay(tmp_path, capsys):
    code, plans, err = _search(tmp_path, capsys, "p1.jsonl")
    assert code == 0
    lines = plans.read_text().splitlines()
    assert len(lines) == 1
    plan = json.loads(lines[0])
    assert plan["template_id"] == "D1_plus" and plan["profit"] > 0
    code2, plans2, _ = _search(tmp_path, capsys, "p2.jsonl")
    assert plans.read_bytes() == plans2.read_bytes()
    code, out, _ = run(["replay", "--fixture", fixture_path("d1plus_demo.scn"),
                        "--plans", str(plans)], capsys)
    assert code == 0 and json.loads(out)["failed"] == 0


def test_replay_mismatch_and_stale(tmp_path, capsys):
    _, plans, _ = _search(tmp_path, capsys, "p.jsonl")
    plan = json.loads(plans.read_text())
    edited = tmp_path / "edited.jsonl"
    edited.write_text(json.dumps({**plan, "profit": plan["profit"] + 1}) + "\n")
    code, out, _ = run(["replay", "--fixture", fixture_path("d1plus_demo.scn"),
                        "--plans", str(edited)], capsys)
    assert code == 1 and json.loads(out)["plans"][0]["status"] == "mismatch"
    with open(fixture_path("d1plus_demo.scn"), encoding="utf-8") as fh:
        scn = json.load(fh)
    scn["pools"]["q"]["reserve_x"] += 1
    perturbed = tmp_path / "perturbed.scn"
    perturbed.write_text(json.dumps(scn))
    code, out, _ = run(["replay", "--fixture", str(perturbed), "--plans", str(plans)], capsys)
    assert code == 1 and json.loads(out)["plans"][0]["status"] == "stale_state"


def test_search_empty_mempool(tmp_path, capsys):
    code, out, _ = _search(tmp_path, capsys, "e.jsonl", mempool="empty_mempool.jsonl")
    assert code == 0 and out.read_text() == ""


def test_search_b1_only(tmp_path, capsys):
    code, out, _ = _search(tmp_path, capsys, "b1.jsonl", fixture="b1_only.scn")
    assert code == 0 and out.read_text() == ""


def test_search_options(tmp_path, capsys):
    code, out, _ = _search(tmp_path, capsys, "t.jsonl", fixture="tournament.scn",
                           extra=["--templates", "B2_plus", "--budget", "5000"])
    plan = json.loads(out.read_text())
    assert plan["template_id"] == "B2_plus" and plan["solved_args"]["dX"] <= 5000
    code, _, _ = _search(tmp_path, capsys, "x.jsonl", extra=["--templates", "Q7"])
    assert code == 2


def test_search_skips_malformed_lines(tmp_path, capsys):
    pending = tmp_path / "m.jsonl"
    pending.write_text("garbage\n" + open(fixture_path("rebase_mempool.jsonl")).read())
    out = tmp_path / "o.jsonl"
    code, _, err = run(["search", "--fixture", fixture_path("d1plus_demo.scn"),
                        "--watch", fixture_path("elastic.report.json"),
                        "--mempool", str(pending), "--out", str(out)], capsys)
    assert code == 0 and len(out.read_text().splitlines()) == 1


def test_watch_file_variants(tmp_path, capsys):
    with open(fixture_path("elastic.report.json"), encoding="utf-8") as fh:
        doc = json.load(fh)
    for i, variant in enumerate((doc, [doc], {"reports": [doc]})):
        w = tmp_path / f"w{i}.json"
        w.write_text(json.dumps(variant))
        out = tmp_path / f"o{i}.jsonl"
        code, _, _ = run(["search", "--fixture", fixture_path("d1plus_demo.scn"),
                          "--watch", str(w), "--mempool",
                          fixture_path("rebase_mempool.jsonl"), "--out", str(out)], capsys)
        assert code == 0 and out.read_text()


def test_gen_corpus(tmp_path, capsys):
    d = tmp_path / "gen"
    assert run(["gen-corpus", "--out", str(d), "--count", "6", "--seed", "4"], capsys)[0] == 0
    labels = json.loads((d / "labels.json").read_text())
    assert len(labels) == 6
    code, out, _ = run(["scan", str(d)], capsys)
    assert code == 0
    got = {os.path.basename(r["source"]): r["verdict"] for r in json.loads(out)["reports"]}
    assert got == {k: v["verdict"] for k, v in labels.items()}


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "tmev.cli", "scan", "/missing.tok"],
                       capture_output=True, text=True)
    assert r.returncode == 2
