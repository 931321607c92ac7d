import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

import factweave as fw
from factweave.cli import main

from conftest import TOY_CSV


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "toy.csv").write_text(TOY_CSV, encoding="utf-8")
    fs = fw.DataFact(fw.FactType.DISTRIBUTION, breakdown="Country",
                     measure=fw.Measure("Gold", fw.Aggregation.SUM))
    ft = fw.DataFact(
        fw.FactType.EXTREME, subspace=fw.Subspace((fw.Filter("Sex", "Female"),)),
        breakdown="Country", measure=fw.Measure("Gold", fw.Aggregation.SUM),
        focus=("Norway",), meta=fw.Meta(extra="maximum"),
    )
    (tmp_path / "keyframes.json").write_text(
        json.dumps([fw.fact_to_spec(fs), fw.fact_to_spec(ft)]), encoding="utf-8"
    )
    (tmp_path / "fact.json").write_text(
        json.dumps(fw.fact_to_spec(fs)), encoding="utf-8"
    )
    bad = fw.DataFact(fw.FactType.RANK, breakdown="Missing",
                      measure=fw.Measure("Gold", fw.Aggregation.SUM))
    (tmp_path / "bad-fact.json").write_text(
        json.dumps(fw.fact_to_spec(bad)), encoding="utf-8"
    )
    return tmp_path


def test_ingest(runner, workdir):
    result = runner.invoke(main, ["ingest", str(workdir / "toy.csv")])
    assert result.exit_code == 0, result.output
    body = json.loads(result.stdout)
    assert body["rowCount"] == 10
    assert len(body["schema"]) == 4


def test_ingest_missing_file(runner, workdir):
    result = runner.invoke(main, ["ingest", str(workdir / "nope.csv")])
    assert result.exit_code == 2


def test_validate_ok(runner, workdir):
    result = runner.invoke(
        main, ["validate", str(workdir / "toy.csv"), str(workdir / "fact.json")]
    )
    assert result.exit_code == 0
    assert json.loads(result.stdout)["valid"]


def test_validate_unknown_field_exit_2(runner, workdir):
    result = runner.invoke(
        main, ["validate", str(workdir / "toy.csv"), str(workdir / "bad-fact.json")]
    )
    assert result.exit_code == 2
    assert "SchemaError" in result.stderr
    assert not json.loads(result.stdout)["valid"]


def test_interpolate_story_document_shape(runner, workdir):
    result = runner.invoke(
        main,
        ["interpolate", str(workdir / "toy.csv"), str(workdir / "keyframes.json"),
         "--n", "3", "--seed", "5"],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.stdout)
    provenances = [p["provenance"] for p in doc["pieces"]]
    assert provenances[0] == "keyframe" and provenances[-1] == "keyframe"
    middle = provenances[1:-1]
    assert middle and all(p == "interpolated" for p in middle)
    assert len(middle) <= 3
    for piece in doc["pieces"]:
        assert piece["caption"] and piece["view"]["groups"]


def test_interpolate_deterministic_bytes(workdir):
    cmd = [sys.executable, "-m", "factweave.cli", "interpolate",
           str(workdir / "toy.csv"), str(workdir / "keyframes.json"),
           "--n", "3", "--seed", "11"]
    outputs = {subprocess.run(cmd, capture_output=True, check=True).stdout
               for _ in range(3)}
    assert len(outputs) == 1


def test_recommend(runner, workdir):
    result = runner.invoke(main, ["recommend", str(workdir / "toy.csv"), "--k", "4"])
    assert result.exit_code == 0
    recs = json.loads(result.stdout)["recommendations"]
    assert 0 < len(recs) <= 4


def test_oracle_story_document(runner, workdir):
    result = runner.invoke(
        main,
        ["oracle", str(workdir / "toy.csv"), str(workdir / "keyframes.json"), "--n", "2"],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.stdout)
    assert "oracle" in doc
    assert len([p for p in doc["pieces"] if p["provenance"] == "interpolated"]) == 2


def test_oracle_capacity_refusal(runner, workdir):
    config = workdir / "tight.conf"
    config.write_text("data.enumeration_limit = 5\n", encoding="utf-8")
    result = runner.invoke(
        main,
        ["--config", str(config), "oracle", str(workdir / "toy.csv"),
         str(workdir / "keyframes.json")],
    )
    assert result.exit_code == 3
    assert "CapacityError" in result.stderr


def test_embed_writes_table(runner, workdir):
    out = workdir / "table.tsv"
    result = runner.invoke(
        main,
        ["embed", str(workdir / "toy.csv"), str(workdir / "fact.json"),
         "--table", str(out)],
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "dim=128"
    assert len(lines) == 2
    table = fw.import_embedding_table(out.read_text(encoding="utf-8"))
    assert len(table.table) == 1


def test_embed_invalid_fact_exit_2(runner, workdir):
    result = runner.invoke(
        main,
        ["embed", str(workdir / "toy.csv"), str(workdir / "bad-fact.json"),
         "--table", str(workdir / "t.tsv")],
    )
    assert result.exit_code == 2


def test_export_round_trip_and_markdown(runner, workdir):
    interp = runner.invoke(
        main,
        ["interpolate", str(workdir / "toy.csv"), str(workdir / "keyframes.json"),
         "--n", "2", "--seed", "3"],
    )
    doc_path = workdir / "story.json"
    doc_path.write_text(interp.stdout, encoding="utf-8")

    as_json = runner.invoke(main, ["export", str(doc_path), "--form", "factsheet"])
    assert as_json.exit_code == 0
    exported = json.loads(as_json.stdout)
    assert exported["form"] == "factsheet"
    assert exported["pieces"] == json.loads(interp.stdout)["pieces"]

    as_md = runner.invoke(
        main, ["export", str(doc_path), "--format", "markdown"]
    )
    assert as_md.exit_code == 0
    original = json.loads(interp.stdout)
    for piece in original["pieces"]:
        assert piece["caption"] in as_md.stdout
        assert f"[{piece['provenance']}]" in as_md.stdout


def test_bad_config_rejected(runner, workdir):
    config = workdir / "bad.conf"
    config.write_text("nonsense.key = 1\n", encoding="utf-8")
    result = runner.invoke(main, ["--config", str(config), "ingest",
                                  str(workdir / "toy.csv")])
    assert result.exit_code == 2
