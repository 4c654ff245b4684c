import csv
import json
import os

import pytest

from conftest import FIXTURES
from knockout_eval.cli import main
from knockout_eval.data import load_exam_dataset
from knockout_eval.reporting import load_run

EXAM = FIXTURES / "exam_small.json"


def run_cli(*args):
    return main([str(a) for a in args])


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def one_question(tmp_path):
    doc = json.loads(EXAM.read_text(encoding="utf-8"))
    doc["questions"] = doc["questions"][:1]
    path = tmp_path / "one.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_run_knockout_n4(tmp_path):
    out = tmp_path / "ko"
    assert run_cli("run", "--dataset", one_question(tmp_path), "--format", "exam-json",
                   "--method", "knockout", "--out", out) == 0
    rows = read_rows(out / "scores.csv")
    assert len(rows) == 4
    assert list(rows[0]) == ["item_id", "answer_id", "method", "final_score", "elimination_round", "n_scores"]
    matches = json.loads((out / "matches.json").read_text())
    assert sum(len(i["matches"]) for i in matches["items"]) == 3
    champion = [r for r in rows if r["elimination_round"] == "champion"]
    assert [r["answer_id"] for r in champion] == ["gpt4v"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["judge_call_count"] == 3 and manifest["backend_calls"] == 3
    assert set(manifest["template_hashes"]) >= {"PairwiseExamEN", "IndividualExamEN"}


def test_run_individual_call_count(tmp_path):
    out = tmp_path / "ind"
    assert run_cli("run", "--dataset", one_question(tmp_path), "--format", "exam-json",
                   "--method", "individual", "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["judge_call_count"] == 4


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    out = blocker / "sub"
    assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--out", out) != 0
    assert not out.exists()
    assert "not writable" in capsys.readouterr().err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_output(tmp_path):
    out = tmp_path / "ro"
    out.mkdir()
    out.chmod(0o500)
    try:
        assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--out", out) != 0
        assert list(out.iterdir()) == []
    finally:
        out.chmod(0o700)


def test_report_two_methods(tmp_path):
    for method in ("knockout", "individual"):
        assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--method", method,
                       "--out", tmp_path / method, "--oracle-sigma", "1", "--seed", "3") == 0
    rep = tmp_path / "rep"
    assert run_cli("report", "--results", tmp_path / "knockout", tmp_path / "individual",
                   "--dataset", EXAM, "--format", "exam-json", "--out", rep) == 0
    report = json.loads((rep / "report.json").read_text())
    labels = [r["label"] for r in report["correlation"]["rows"]]
    assert labels == ["knockout", "individual"]
    assert report["correlation"]["columns"] == ["question", "exam", "whole"]
    assert [r["label"] for r in report["elimination_split"]["rows"]] == ["knockout"]
    assert set(report["by_difficulty"]["columns"]) == {"Easy", "Medium"}
    md = (rep / "report.md").read_text()
    assert "| knockout |" in md and "| individual |" in md
    assert (rep / "report.csv").read_text().startswith("table,label,column,metric,value")


def test_report_missing_difficulty(tmp_path, capsys):
    doc = json.loads(EXAM.read_text(encoding="utf-8"))
    for q in doc["questions"]:
        q.pop("difficulty")
    data = tmp_path / "nodiff.json"
    data.write_text(json.dumps(doc), encoding="utf-8")
    assert run_cli("run", "--dataset", data, "--format", "exam-json", "--out", tmp_path / "r") == 0
    code = run_cli("report", "--results", tmp_path / "r", "--dataset", data, "--format", "exam-json",
                   "--out", tmp_path / "rep", "--groupings", "difficulty")
    assert code != 0
    err = capsys.readouterr().err
    assert "q1" in err and "q2" in err


def test_report_rejects_foreign_results(tmp_path, capsys):
    assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--out", tmp_path / "r") == 0
    other = one_question(tmp_path)
    doc = json.loads(other.read_text())
    doc["questions"][0]["answers"] = doc["questions"][0]["answers"][:2]
    other.write_text(json.dumps(doc))
    assert run_cli("report", "--results", tmp_path / "r", "--dataset", other, "--format", "exam-json",
                   "--out", tmp_path / "rep") != 0
    assert "q2" in capsys.readouterr().err


def test_run_with_report_and_reload(tmp_path):
    out = tmp_path / "deb"
    assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--method", "knockout-debiased",
                   "--oracle-bias", "0.5", "--out", out, "--report", "json,markdown") == 0
    assert (out / "report.json").exists() and (out / "report.md").exists()
    items = {it.id: it for it in load_exam_dataset(EXAM)}
    run = load_run(out, items)
    assert all(len(m.orderings) == 2 for r in run.results for m in r.matches)
    # each answer is listed first in exactly half of its prompts, so the bias
    # turns into a uniform +bias/2 shift while no score hits the ceiling
    latents = {(it.id, a.id): a.latent_quality for it in items.values() for a in it.answers}
    for res in run.results:
        for aid, score in res.final_scores.items():
            assert score == latents[(res.item_id, aid)] + 0.25


def test_unscorable_item_exit_code(tmp_path, stub_llm):
    stub = stub_llm([(200, "I refuse to grade.")])
    out = tmp_path / "bad"
    code = run_cli("run", "--dataset", one_question(tmp_path), "--format", "exam-json", "--backend", "remote",
                   "--endpoint", stub.url, "--model", "m", "--retries", "1", "--out", out)
    assert code == 2
    manifest = json.loads((out / "manifest.json").read_text())
    [failure] = manifest["unscorable_items"]
    assert failure["item_id"] == "q1" and failure["raw_texts"] == ["I refuse to grade."] * 2


def test_remote_run(tmp_path, stub_llm):
    def reply(body):
        prompt = body["messages"][0]["content"]
        return "Answer 1: 4/10 Answer 2: 6/10" if "Answer 2:" in prompt else "Score: 5/10"

    stub = stub_llm([(200, reply)])
    out = tmp_path / "remote"
    assert run_cli("run", "--dataset", one_question(tmp_path), "--format", "exam-json", "--backend", "remote",
                   "--endpoint", stub.url, "--model", "m", "--out", out, "--cache-dir", tmp_path / "c") == 0
    assert len(stub.requests) == 3
    assert len(read_rows(out / "scores.csv")) == 4


def test_simulate_command(tmp_path, capsys):
    assert run_cli("simulate", "--answers", "4", "--trials", "5", "--sigma", "0", "--out", tmp_path / "sim") == 0
    doc = json.loads((tmp_path / "sim" / "simulate.json").read_text())
    assert {m["method"]: m["mean_pearson"] for m in doc["methods"]} == {
        "individual": 1.0, "naive-pairwise": 1.0, "knockout": 1.0, "knockout-debiased": 1.0,
    }
    assert "Mean Pearson" in capsys.readouterr().out


def test_cache_command(tmp_path, capsys):
    cache = tmp_path / "c"
    assert run_cli("run", "--dataset", EXAM, "--format", "exam-json", "--out", tmp_path / "r",
                   "--cache-dir", cache) == 0
    capsys.readouterr()
    assert run_cli("cache", "inspect", "--cache-dir", cache) == 0
    assert "6 cached response(s)" in capsys.readouterr().out
    assert run_cli("cache", "clear", "--cache-dir", cache) == 0
    assert "removed 6" in capsys.readouterr().out


def test_bad_dataset(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert run_cli("run", "--dataset", bad, "--format", "exam-json", "--out", tmp_path / "o") == 1
    assert "schema_version" in capsys.readouterr().err
