from __future__ import annotations

import json

import pytest

from laybench.cli import main
from laybench.corpus import load_jsonl, synthetic_corpus_path, write_jsonl


@pytest.fixture
def corpus_file(tmp_path, synthetic_corpus):
    path = tmp_path / "corpus.jsonl"
    write_jsonl(synthetic_corpus, path)
    return path


def _run(capsys, argv: list[str]) -> tuple[int, dict]:
    code = main(argv)
    out = capsys.readouterr().out.strip().splitlines()
    summary = json.loads(out[-1]) if out else {}
    return code, summary


def test_ingest_reports_stats(tmp_path, corpus_file, capsys) -> None:
    out = tmp_path / "canonical.jsonl"
    code, summary = _run(capsys, ["ingest", "--in", str(corpus_file),
                                  "--out", str(out)])
    assert code == 0
    assert summary["documents"] == 10
    assert out.exists()


def test_ingest_rejects_duplicate_ids(tmp_path, capsys) -> None:
    bad = tmp_path / "bad.jsonl"
    line = json.dumps({"id": "x1", "article": "a", "abstract": "b",
                       "lay_summary": None, "split": "train"})
    bad.write_text(line + "\n" + line + "\n")
    code, _ = _run(capsys, ["ingest", "--in", str(bad)])
    assert code == 2


def test_unknown_backend_is_config_error(tmp_path, corpus_file, capsys) -> None:
    code, _ = _run(capsys, ["explain", "--corpus", str(corpus_file),
                            "--out-dir", str(tmp_path / "out"),
                            "--backend", "http"])
    assert code == 2  # no LAYBENCH_API_BASE / key


def test_missing_api_key_names_env_var(tmp_path, corpus_file, capsys,
                                       monkeypatch, caplog) -> None:
    monkeypatch.setenv("LAYBENCH_API_BASE", "http://127.0.0.1:9")
    monkeypatch.delenv("LAYBENCH_API_KEY", raising=False)
    code = main(["explain", "--corpus", str(corpus_file),
                 "--out-dir", str(tmp_path / "out"), "--backend", "http"])
    assert code == 2
    assert "LAYBENCH_API_KEY" in caplog.text


def test_explain_augment_summarise_evaluate_correlate(tmp_path, corpus_file,
                                                      capsys) -> None:
    out_dir = tmp_path / "run"
    common = ["--backend", "mock", "--seed", "7",
              "--cache-dir", str(tmp_path / "cache")]

    code, summary = _run(capsys, ["explain", "--corpus", str(corpus_file),
                                  "--out-dir", str(out_dir), *common])
    assert code == 0
    assert summary["processed"] == 10

    code, summary = _run(capsys, ["augment", "--corpus", str(corpus_file),
                                  "--out-dir", str(out_dir), *common])
    assert code == 0

    code, summary = _run(capsys, ["summarise", "--corpus", str(corpus_file),
                                  "--out-dir", str(out_dir),
                                  "--system", "ZS_GPT_class", *common])
    assert code == 0
    summaries_path = out_dir / "zeroshot.jsonl"

    metrics_path = tmp_path / "metrics.jsonl"
    code, summary = _run(capsys, ["evaluate", "--metrics", "cli,rouge",
                                  "--in", str(summaries_path),
                                  "--ref", str(corpus_file),
                                  "--out", str(metrics_path)])
    assert code == 0
    records = [json.loads(line) for line in metrics_path.read_text().splitlines()]
    metrics_seen = {r["metric"] for r in records}
    assert metrics_seen == {"CLI", "R1", "R2", "RL", "RougeGeoMean"}
    assert summary["records"] == 50  # 10 docs x 5 metric records

    code, summary = _run(capsys, ["correlate", "--metrics", "cli",
                                  "--corpus", str(corpus_file),
                                  "--out-prefix", str(tmp_path / "table1")])
    assert code == 0
    assert (tmp_path / "table1.csv").exists()
    row = summary["rows"][0]
    assert row["metric"] == "CLI"
    assert row["n"] == 20


def test_correlate_rejects_unknown_metric(tmp_path, corpus_file, capsys) -> None:
    code, _ = _run(capsys, ["correlate", "--metrics", "rouge",
                            "--corpus", str(corpus_file),
                            "--out-prefix", str(tmp_path / "x")])
    assert code == 2


def test_humaneval_export_and_report(tmp_path, corpus_file, capsys) -> None:
    # build three summary files from the mock pipeline outputs
    corpus = load_jsonl(corpus_file)
    paths = []
    for system in ("SFT_Augmented", "ZS_GPT_class", "ZS_Vicuna_class"):
        path = tmp_path / f"{system}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for doc in corpus.documents:
                fh.write(json.dumps({"id": doc.id, "system": system,
                                     "summary": f"{system} summary of {doc.id}"}) + "\n")
        paths.append(str(path))

    items_path = tmp_path / "items.jsonl"
    code, summary = _run(capsys, ["humaneval", "export",
                                  "--corpus", str(corpus_file),
                                  "--summaries", *paths,
                                  "--n", "10", "--seed", "3",
                                  "--out", str(items_path)])
    assert code == 0
    assert summary["items"] == 10
    assert summary["summaries_under_evaluation"] == 40

    # record one annotation directly, then build the report
    from laybench.humaneval import Annotation, AnnotationStore, load_items_jsonl
    items = load_items_jsonl(items_path)
    store_path = tmp_path / "store.jsonl"
    store = AnnotationStore(store_path, items)
    first = sorted(items)[0]
    store.record(Annotation(
        assessor_id="a1", item_id=first,
        scores={lbl: {"layness": 2, "fluency": 2, "relevance": 2}
                for lbl in "ABCD"},
        ranking=("A", "B", "C", "D")))

    code, summary = _run(capsys, ["humaneval", "report",
                                  "--items", str(items_path),
                                  "--store", str(store_path),
                                  "--out-prefix", str(tmp_path / "fig3")])
    assert code == 0
    assert summary["annotations"] == 1
    assert (tmp_path / "fig3.csv").exists()


def test_config_file_supplies_defaults(tmp_path, corpus_file, capsys) -> None:
    config = tmp_path / "run.conf"
    config.write_text("backend = mock\nseed = 5\nout_dir = {}\n".format(
        tmp_path / "cfg-out"))
    code, summary = _run(capsys, ["explain", "--corpus", str(corpus_file),
                                  "--config", str(config)])
    assert code == 0
    assert (tmp_path / "cfg-out" / "explain.jsonl").exists()


def test_flags_override_config_file(tmp_path, corpus_file, capsys) -> None:
    config = tmp_path / "run.conf"
    config.write_text(f"out_dir = {tmp_path / 'from-config'}\n")
    code, _ = _run(capsys, ["explain", "--corpus", str(corpus_file),
                            "--config", str(config),
                            "--out-dir", str(tmp_path / "from-flag")])
    assert code == 0
    assert (tmp_path / "from-flag").exists()
    assert not (tmp_path / "from-config").exists()


def test_synthetic_corpus_is_bundled() -> None:
    path = synthetic_corpus_path()
    assert path.exists()
    corpus = load_jsonl(path)
    assert len(corpus) == 10
