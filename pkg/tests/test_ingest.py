import json

import pytest

from numen.schemas.evaluation import Qrels
from numen.schemas.ingest import DocumentRecord, QueryRecord
from numen.schemas.retrieval import SearchResult
from numen.services.ingest import (
    DatasetFormatError,
    load_corpus,
    load_dataset,
    load_qrels,
    load_queries,
    load_run,
    write_corpus,
    write_qrels,
    write_queries,
    write_run,
)


def _jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def test_load_corpus_streams_in_file_order(tmp_path) -> None:
    path = _jsonl(
        tmp_path / "corpus.jsonl",
        [
            {"_id": "b", "title": "Kites", "text": "Mara likes kites"},
            {"_id": "a", "text": "Olek likes chess"},
            {"_id": 7, "title": "", "text": ""},
        ],
    )
    records = list(load_corpus(path))
    assert [r.doc_id for r in records] == ["b", "a", "7"]
    assert records[0].encoded_text == "Kites Mara likes kites"
    assert records[1].title is None
    assert records[2].encoded_text == ""


def test_blank_lines_are_skipped(tmp_path) -> None:
    path = tmp_path / "queries.jsonl"
    path.write_text('\n{"_id": "q1", "text": "who"}\n\n', encoding="utf-8")
    assert list(load_queries(path)) == [QueryRecord(query_id="q1", text="who")]


@pytest.mark.parametrize(
    "line, reason",
    [
        ("{not json", "invalid JSON"),
        ('["a", "b"]', "JSON object"),
        ('{"text": "no id"}', "'_id'"),
        ('{"_id": "x"}', "'text'"),
        ('{"_id": true, "text": "t"}', "string or an integer"),
        ('{"_id": "x", "text": ["t"]}', "string or an integer"),
        ('{"_id": "x", "text": "t", "title": 3}', "'title'"),
    ],
)
def test_corpus_errors_name_file_and_line(tmp_path, line: str, reason: str) -> None:
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"_id": "ok", "text": "fine"}\n' + line + "\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError) as excinfo:
        list(load_corpus(path))
    assert excinfo.value.line == 2
    assert excinfo.value.path == path
    assert reason in str(excinfo.value)
    assert str(excinfo.value).startswith(f"{path}:2:")


def test_duplicate_ids_are_rejected(tmp_path) -> None:
    corpus = _jsonl(tmp_path / "corpus.jsonl", [{"_id": "a", "text": "x"}, {"_id": "a", "text": "y"}])
    queries = _jsonl(tmp_path / "queries.jsonl", [{"_id": "q", "text": "x"}] * 2)
    with pytest.raises(DatasetFormatError, match="duplicate"):
        list(load_corpus(corpus))
    with pytest.raises(DatasetFormatError, match="duplicate"):
        list(load_queries(queries))


def test_load_qrels_with_and_without_header(tmp_path) -> None:
    with_header = tmp_path / "a.tsv"
    with_header.write_text("query-id\tcorpus-id\tscore\nq1\td1\t1\nq1\td2\t0\nq2\td3\t2\n")
    without_header = tmp_path / "b.tsv"
    without_header.write_text("q1\td1\t1\nq1\td2\t0\nq2\td3\t2\n")
    for path in (with_header, without_header):
        qrels = load_qrels(path)
        assert qrels.judgments == {"q1": {"d1": 1, "d2": 0}, "q2": {"d3": 2}}
        assert qrels.relevant("q1") == {"d1"}
        assert "q2" in qrels and len(qrels) == 2


def test_header_only_qrels_is_empty(tmp_path) -> None:
    path = tmp_path / "qrels.tsv"
    path.write_text("query-id\tcorpus-id\tscore\n")
    qrels = load_qrels(path)
    assert len(qrels) == 0
    assert qrels.unjudged == set()


def test_repeated_judgment_keeps_last_grade(tmp_path, caplog) -> None:
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td1\t0\nq1\td1\t1\n")
    with caplog.at_level("WARNING"):
        qrels = load_qrels(path)
    assert qrels.judgments == {"q1": {"d1": 1}}
    assert "repeated judgment" in caplog.text


def test_queries_without_relevant_docs_are_dropped(tmp_path, caplog) -> None:
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td1\t1\nq2\td2\t0\n")
    with caplog.at_level("WARNING"):
        qrels = load_qrels(path)
    assert qrels.query_ids == ["q1"]
    assert qrels.unjudged == {"q2"}
    assert "q2" in caplog.text


@pytest.mark.parametrize(
    "content, reason",
    [
        ("q1\td1\n", "3 tab-separated columns"),
        ("q1\td1\thigh\n", "integer"),
        ("q1\td1\t-1\n", ">= 0"),
    ],
)
def test_qrels_errors(tmp_path, content: str, reason: str) -> None:
    path = tmp_path / "qrels.tsv"
    path.write_text("q0\td0\t1\n" + content)
    with pytest.raises(DatasetFormatError) as excinfo:
        load_qrels(path)
    assert excinfo.value.line == 2
    assert reason in excinfo.value.reason


def test_write_then_load_dataset(tmp_path) -> None:
    corpus = [
        DocumentRecord(doc_id="d0", title="Ünïcode", text="Mara likes kites"),
        DocumentRecord(doc_id="d1", text="Olek likes chess"),
    ]
    queries = [QueryRecord(query_id="q0", text="who likes kites?")]
    qrels = Qrels(judgments={"q0": {"d0": 1, "d1": 0}})
    write_corpus(corpus, tmp_path / "corpus.jsonl")
    write_queries(queries, tmp_path / "queries.jsonl")
    write_qrels(qrels, tmp_path / "qrels.tsv")

    assert (tmp_path / "qrels.tsv").read_text().splitlines()[0] == "query-id\tcorpus-id\tscore"
    loaded_corpus, loaded_queries, loaded_qrels = load_dataset(tmp_path)
    assert loaded_corpus == corpus
    assert loaded_queries == queries
    assert loaded_qrels.judgments == qrels.judgments


def test_load_dataset_accepts_beir_qrels_location(tmp_path) -> None:
    _jsonl(tmp_path / "corpus.jsonl", [{"_id": "d0", "text": "x"}])
    _jsonl(tmp_path / "queries.jsonl", [{"_id": "q0", "text": "x"}])
    (tmp_path / "qrels").mkdir()
    (tmp_path / "qrels" / "test.tsv").write_text("query-id\tcorpus-id\tscore\nq0\td0\t1\n")
    _, _, qrels = load_dataset(tmp_path)
    assert qrels.relevant("q0") == {"d0"}


def test_run_file_layout(tmp_path) -> None:
    results = {
        "q0": [
            SearchResult(doc_id="d3", score=0.75, rank=1),
            SearchResult(doc_id="d1", score=0.5, rank=2),
        ],
        "q1": [SearchResult(doc_id="d0", score=0.125, rank=1)],
    }
    path = tmp_path / "run.tsv"
    write_run(results, path)
    assert path.read_text().splitlines() == [
        "q0\td3\t1\t0.750000",
        "q0\td1\t2\t0.500000",
        "q1\td0\t1\t0.125000",
    ]
    assert load_run(path) == results


def test_run_file_errors(tmp_path) -> None:
    path = tmp_path / "run.tsv"
    path.write_text("q0\td3\t1\n")
    with pytest.raises(DatasetFormatError, match="4 tab-separated"):
        load_run(path)
    path.write_text("q0\td3\tfirst\t0.5\n")
    with pytest.raises(DatasetFormatError):
        load_run(path)
