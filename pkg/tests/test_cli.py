import json

import pytest

from riq import __version__
from riq.cli import EXIT_ERROR, EXIT_OK, EXIT_SYNTAX, main
from riq.datagen import GenParams, vocabulary

GEN_ARGS = ["--graphs", "12", "--triples", "8", "--vocabularies", "3", "--predicates", "4", "--entities", "10", "--seed", "3"]


def events(stderr: str):
    return [json.loads(line) for line in stderr.splitlines() if line.startswith("{")]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("RIQ_SEED", "RIQ_WORKERS", "RIQ_EPSILON"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def built(tmp_path, capsys):
    data = tmp_path / "data.nq"
    index = tmp_path / "index"
    assert main(["gen", "-o", str(data)] + GEN_ARGS) == EXIT_OK
    assert main(["index", "-i", str(data), "-o", str(index), "--workers", "1"]) == EXIT_OK
    capsys.readouterr()
    return data, index


def query_text():
    pred = vocabulary(0, GenParams(predicates=4, entities=10)).predicates[0]
    return f"SELECT ?s WHERE {{ GRAPH ?g {{ ?s {pred.n3()} ?o }} }}"


def test_version(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["--version"])
    assert exit_info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_gen_writes_data_and_truth(tmp_path, capsys):
    data = tmp_path / "data.nq"
    assert main(["gen", "-o", str(data)] + GEN_ARGS) == EXIT_OK
    captured = capsys.readouterr()
    assert len(data.read_text(encoding="utf-8").splitlines()) == 96
    truth = json.loads((tmp_path / "data.truth.json").read_text(encoding="utf-8"))
    assert truth["vocabularies"]["0"] == [0, 3, 6, 9]
    (event,) = events(captured.err)
    assert event["event"] == "gen" and event["quads"] == 96


def test_index_reports_and_emits_event(tmp_path, capsys):
    data = tmp_path / "data.nq"
    main(["gen", "-o", str(data)] + GEN_ARGS)
    capsys.readouterr()
    assert main(["index", "-i", str(data), "-o", str(tmp_path / "index"), "--workers", "1", "--keep-pvs"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out.startswith("indexed 12 graphs (96 quads)")
    (event,) = events(captured.err)
    assert event["event"] == "index"
    assert event["graphs"] == 12 and event["quads"] == 96 and event["malformed"] == 0
    assert (tmp_path / "index" / "pvs").is_dir()


def test_index_skips_malformed_lines(tmp_path, capsys):
    data = tmp_path / "data.nq"
    data.write_text(
        "<http://a> <http://p> <http://b> <http://g> .\nnot a quad\n<http://a> <http://p> \"x\" <http://g> .\n",
        encoding="utf-8",
    )
    assert main(["index", "-i", str(data), "-o", str(tmp_path / "index"), "--workers", "1"]) == EXIT_OK
    (event,) = events(capsys.readouterr().err)
    assert event["quads"] == 2 and event["malformed"] == 1
    assert main(["index", "-i", str(data), "-o", str(tmp_path / "strict"), "--strict"]) == EXIT_ERROR


def test_query_prints_tsv(built, capsys):
    _, index = built
    assert main(["query", "-x", str(index), "-e", query_text(), "--workers", "1"]) == EXIT_OK
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "?s\t?g"
    assert len(lines) > 1
    (event,) = events(captured.err)
    assert event["event"] == "query"
    assert event["rows"] == len(lines) - 1
    assert event["candidates"] <= event["groups"]


def test_query_from_file_as_json(built, tmp_path, capsys):
    _, index = built
    path = tmp_path / "q.rq"
    path.write_text(query_text(), encoding="utf-8")
    assert main(["query", "-x", str(index), "-q", str(path), "--format", "json", "--limit-print", "2"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["columns"] == ["s", "g"]
    assert len(data["rows"]) <= 2


def test_candidates_only(built, capsys):
    _, index = built
    assert main(["query", "-x", str(index), "-e", query_text(), "--candidates-only"]) == EXIT_OK
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert set(report) == {"candidates", "stats", "queries"}
    assert sorted(report["queries"]) == sorted(str(c) for c in report["candidates"])
    (event,) = events(captured.err)
    assert event["event"] == "candidates"


def test_syntax_error_exits_2(built, capsys):
    _, index = built
    assert main(["query", "-x", str(index), "-e", "SELECT ?s WHERE { GRAPH ?g { ?s"]) == EXIT_SYNTAX
    err = capsys.readouterr().err
    assert "^" in err and "expected" in err


def test_missing_index_exits_1(tmp_path, capsys):
    assert main(["query", "-x", str(tmp_path / "nowhere"), "-e", query_text()]) == EXIT_ERROR
    assert "corrupt index" in capsys.readouterr().err


def test_missing_query_file_exits_1(built, tmp_path, capsys):
    _, index = built
    assert main(["query", "-x", str(index), "-q", str(tmp_path / "none.rq")]) == EXIT_ERROR
    assert "no such query file" in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    assert main(["index", "-i", str(tmp_path / "none.nq"), "-o", str(tmp_path / "index")]) == EXIT_ERROR
    assert "no such file" in capsys.readouterr().err


def test_bad_epsilon_exits_1(built, tmp_path, capsys):
    data, _ = built
    assert main(["index", "-i", str(data), "-o", str(tmp_path / "other"), "--epsilon", "1.5"]) == EXIT_ERROR
    assert "epsilon" in capsys.readouterr().err


def test_stats(built, tmp_path, capsys):
    _, index = built
    assert main(["stats", "-x", str(index)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "graphs\t12" in out.splitlines()

    html = tmp_path / "report.html"
    assert main(["stats", "-x", str(index), "--json", "--html", str(html)]) == EXIT_OK
    stats = json.loads(capsys.readouterr().out)
    assert stats["graphs"] == 12 and stats["quads"] == 96
    assert len(stats["per_group"]) == stats["groups"]
    assert "Graphs per Group" in html.read_text(encoding="utf-8")
