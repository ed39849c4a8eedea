import json
import subprocess
import sys
from pathlib import Path

import pytest

CLI = [sys.executable, "-m", "docfields.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, cwd=cwd)


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    proc = run_cli("generate", str(out / "corpus10"), "--seed", "100", "--count", "10")
    assert proc.returncode == 0, proc.stderr
    return out / "corpus10"


def test_generate_layout_and_determinism(fixture_dir, tmp_path):
    assert (fixture_dir / "corpus.json").exists()
    assert (fixture_dir / "manifest.json").exists()
    assert (fixture_dir / "transcript.jsonl").exists()
    docs = sorted((fixture_dir / "docs").glob("*.txt"))
    assert len(docs) == 10
    proc = run_cli("generate", str(tmp_path / "again"), "--seed", "100", "--count", "10")
    assert proc.returncode == 0
    assert (tmp_path / "again" / "corpus.json").read_text() == (fixture_dir / "corpus.json").read_text()


def test_generate_refuses_non_empty(fixture_dir):
    proc = run_cli("generate", str(fixture_dir), "--seed", "1", "--count", "1")
    assert proc.returncode == 6
    err = json.loads(proc.stderr)
    assert err["error"]["code"] == "refused"


def test_generate_force_overwrites(fixture_dir):
    proc = run_cli("generate", str(fixture_dir), "--seed", "100", "--count", "10", "--force")
    assert proc.returncode == 0


def test_generate_usage_errors():
    assert run_cli("generate", "/tmp/nowhere-xyz").returncode == 64
    proc = run_cli("generate", "/tmp/nowhere-xyz", "--seed", "1", "--count", "0")
    assert proc.returncode == 64


def test_extract_plain_text(fixture_dir):
    doc = next((fixture_dir / "docs").glob("*.txt"))
    proc = run_cli("extract", str(doc))
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["language"] == "nl"
    assert "ocr" not in payload["stages_applied"]
    assert payload["text"] == doc.read_text()
    assert proc.stderr == ""


def test_extract_missing_file():
    proc = run_cli("extract", "/no/such/file.txt")
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"]["code"] == "input"


def test_extract_unsupported_format(tmp_path):
    bad = tmp_path / "report.docx"
    bad.write_bytes(b"PK\x03\x04notazip")
    proc = run_cli("extract", str(bad))
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"]["code"] == "unsupported"


def test_retrieve_email_field(fixture_dir):
    corpus = json.loads((fixture_dir / "corpus.json").read_text())
    entry = corpus["documents"][0]
    doc_path = fixture_dir / "docs" / f"{entry['doc_id']}.txt"
    proc = run_cli("retrieve", str(doc_path), "--field", "e-mail")
    assert proc.returncode == 0, proc.stderr
    results = json.loads(proc.stdout)
    assert len(results) == 1
    assert results[0]["stage_fired"] == "fuzzy_regex"
    assert results[0]["matches"][0]["value"] == entry["truth"]["e-mail"]


def test_retrieve_education_via_transcript(fixture_dir):
    corpus = json.loads((fixture_dir / "corpus.json").read_text())
    entry = corpus["documents"][0]
    doc_path = fixture_dir / "docs" / f"{entry['doc_id']}.txt"
    proc = run_cli(
        "retrieve", str(doc_path), "--field", "education",
        "--transcript", str(fixture_dir / "transcript.jsonl"),
    )
    assert proc.returncode == 0, proc.stderr
    results = json.loads(proc.stdout)
    assert results[0]["stage_fired"] == "llm"
    assert results[0]["matches"][0]["value"] == entry["truth"]["education"]


def test_retrieve_requires_field():
    proc = run_cli("retrieve", "whatever.txt")
    assert proc.returncode == 64


def test_retrieve_strict_gateway_error(fixture_dir, tmp_path):
    doc = next((fixture_dir / "docs").glob("*.txt"))
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    proc = run_cli("retrieve", str(doc), "--field", "education", "--transcript", str(empty), "--strict")
    assert proc.returncode == 4
    results = json.loads(proc.stdout)
    assert results[0]["errors"]


def test_retrieve_empty_match_is_exit_zero(fixture_dir, tmp_path):
    text = tmp_path / "plain.txt"
    text.write_text("niets te vinden hier")
    proc = run_cli("retrieve", str(text), "--field", "IBAN", "--transcript", str(tmp_path / "e.jsonl"))
    # fuzzy misses, llm errors (empty transcript); absence of matches is data
    assert proc.returncode == 0
    assert json.loads(proc.stdout)[0]["matches"] == []


def test_evaluate_with_asserts(fixture_dir, tmp_path):
    report_path = tmp_path / "report.json"
    proc = run_cli(
        "evaluate", str(fixture_dir / "corpus.json"),
        "--transcript", str(fixture_dir / "transcript.jsonl"),
        "--report-out", str(report_path),
        "--assert", "jaccard_mean>=0.99",
        "--assert", "e-mail.accuracy>=1.0",
        "--assert", "address.precision>=1.0",
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    assert "jaccard_mean" in proc.stdout
    report = json.loads(report_path.read_text())
    assert report["per_field"]["e-mail"]["accuracy"] == 1.0
    assert report["per_field"]["phone number"]["technique"] == "fuzzy_regex"


def test_evaluate_assert_failure(fixture_dir):
    proc = run_cli(
        "evaluate", str(fixture_dir / "corpus.json"),
        "--transcript", str(fixture_dir / "transcript.jsonl"),
        "--assert", "e-mail.accuracy>=1.01",
    )
    assert proc.returncode == 5
    assert json.loads(proc.stderr)["error"]["code"] == "assert"


def test_evaluate_schema_violation(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"documents": [{"doc_id": "x"}]}')
    proc = run_cli("evaluate", str(bad))
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"]["code"] == "schema"


def test_evaluate_unknown_document_key_is_schema_violation(tmp_path):
    bad = tmp_path / "bad2.json"
    bad.write_text(
        json.dumps(
            {
                "documents": [
                    {
                        "doc_id": "x",
                        "source": {"kind": "text", "value": "tekst"},
                        "truth": {"e-mail": None},
                        "sources": "typo key",
                    }
                ]
            }
        )
    )
    proc = run_cli("evaluate", str(bad))
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"]["code"] == "schema"


def test_reports_validate_against_schema(fixture_dir, tmp_path):
    import jsonschema
    from importlib import resources

    report_path = tmp_path / "r.json"
    proc = run_cli(
        "evaluate", str(fixture_dir / "corpus.json"),
        "--transcript", str(fixture_dir / "transcript.jsonl"),
        "--report-out", str(report_path),
    )
    assert proc.returncode == 0
    schema = json.loads(resources.files("docfields.schemas").joinpath("report.schema.json").read_text())
    jsonschema.validate(json.loads(report_path.read_text()), schema)


def test_retrieval_output_validates_against_schema(fixture_dir):
    import jsonschema
    from importlib import resources

    doc = next((fixture_dir / "docs").glob("*.txt"))
    proc = run_cli("retrieve", str(doc), "--field", "e-mail", "--field", "phone number")
    schema = json.loads(resources.files("docfields.schemas").joinpath("retrieval.schema.json").read_text())
    jsonschema.validate(json.loads(proc.stdout), schema)


def test_extract_output_validates_against_schema(fixture_dir):
    import jsonschema
    from importlib import resources

    doc = next((fixture_dir / "docs").glob("*.txt"))
    proc = run_cli("extract", str(doc))
    schema = json.loads(resources.files("docfields.schemas").joinpath("extracted_text.schema.json").read_text())
    jsonschema.validate(json.loads(proc.stdout), schema)


def test_raster_png_roundtrip_through_cli(tmp_path):
    proc = run_cli("generate", str(tmp_path / "rasters"), "--seed", "5", "--count", "1", "--raster")
    assert proc.returncode == 0, proc.stderr
    png = next((tmp_path / "rasters" / "docs").glob("*.png"))
    txt = next((tmp_path / "rasters" / "docs").glob("*.txt"))
    proc = run_cli("extract", str(png))
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["text"] == txt.read_text()
