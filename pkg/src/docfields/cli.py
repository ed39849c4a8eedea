"""Operator CLI: extract, retrieve, evaluate, generate, serve.

Exit codes are stable: 0 success, 2 input/schema problems, 3 adapter or IO
failure, 4 gateway errors under --strict, 5 failed --assert thresholds,
6 refusal to overwrite a non-empty output directory, 64 usage errors.
Machine-readable errors go to stderr as {"error": {"code", "message"}}.
"""

from __future__ import annotations

import json
import re
import sys
from importlib import resources
from pathlib import Path

import click
import jsonschema

from . import __version__
from . import datasetgen as dg
from . import evaluation as ev
from . import gateway as gwmod
from . import imaging
from . import textextract as tx
from .config import ConfigError, RunConfig, Wiring

EXIT_INPUT = 2
EXIT_ADAPTER = 3
EXIT_STRICT = 4
EXIT_ASSERT = 5
EXIT_REFUSED = 6
EXIT_USAGE = 64


def _fail(code: str, message: str, exit_code: int):
    click.echo(json.dumps({"error": {"code": code, "message": message}}), err=True)
    sys.exit(exit_code)


def _load_config(path: str | None, gateway_mode: str | None, transcript: str | None) -> RunConfig:
    try:
        config = RunConfig.from_file(path) if path else RunConfig()
    except ConfigError as exc:
        _fail("config", str(exc), EXIT_INPUT)
    if gateway_mode:
        config.gateway.mode = gateway_mode
    if transcript:
        config.gateway.transcript_path = transcript
    return config


def _wiring(config: RunConfig) -> Wiring:
    try:
        return Wiring.from_config(config)
    except ConfigError as exc:
        _fail("config", str(exc), EXIT_INPUT)


def _read_input(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        _fail("input", f"cannot read {path}: {exc}", EXIT_INPUT)


def _schema(name: str) -> dict:
    return json.loads(resources.files("docfields.schemas").joinpath(name).read_text(encoding="utf-8"))


_CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(), default=None, help="JSON run-config file."),
    click.option("--gateway-mode", type=click.Choice(["replay", "live"]), default=None, help="Override gateway mode."),
    click.option("--transcript", type=click.Path(), default=None, help="Override gateway transcript path."),
]


def _with_config_options(fn):
    for deco in reversed(_CONFIG_OPTIONS):
        fn = deco(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="docfields")
def cli():
    """Field extraction for unstructured documents."""


@cli.command("extract")
@click.argument("input_path", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Write JSON here instead of stdout.")
@_with_config_options
def cmd_extract(input_path, out, config_path, gateway_mode, transcript):
    """Run the text-extraction pipeline over one document."""
    config = _load_config(config_path, gateway_mode, transcript)
    wiring = _wiring(config)
    data = _read_input(input_path)
    try:
        document = wiring.load(data, input_path)
        extracted = wiring.extract(document)
    except (imaging.UnsupportedFormat, imaging.DecodeError) as exc:
        _fail("unsupported", str(exc), EXIT_INPUT)
    except (imaging.AdapterUnavailable, imaging.RasterizeError, tx.EngineError) as exc:
        _fail("adapter", str(exc), EXIT_ADAPTER)
    except gwmod.GatewayError as exc:
        _fail("gateway", str(exc), EXIT_ADAPTER)
    payload = {
        "text": extracted.text,
        "language": extracted.language,
        "stages_applied": extracted.stages_applied,
        "warnings": extracted.warnings,
    }
    blob = json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    if out:
        Path(out).write_text(blob, encoding="utf-8")
    else:
        click.echo(blob, nl=False)


@cli.command("retrieve")
@click.argument("input_path", type=click.Path())
@click.option("--field", "fields", multiple=True, help="Field to retrieve; repeatable.")
@click.option("--strict", is_flag=True, help="Exit 4 when any per-field stage errored.")
@click.option("--out", type=click.Path(), default=None)
@_with_config_options
def cmd_retrieve(input_path, fields, strict, out, config_path, gateway_mode, transcript):
    """Retrieve one or more fields from a document."""
    if not fields:
        raise click.UsageError("at least one --field is required")
    config = _load_config(config_path, gateway_mode, transcript)
    wiring = _wiring(config)
    data = _read_input(input_path)
    try:
        document = wiring.load(data, input_path)
        extracted = wiring.extract(document)
        results = wiring.retrieve(extracted.text, list(fields), language=extracted.language)
    except (imaging.UnsupportedFormat, imaging.DecodeError) as exc:
        _fail("unsupported", str(exc), EXIT_INPUT)
    except (imaging.AdapterUnavailable, imaging.RasterizeError, tx.EngineError) as exc:
        _fail("adapter", str(exc), EXIT_ADAPTER)
    blob = json.dumps(results, ensure_ascii=False, indent=2) + "\n"
    if out:
        Path(out).write_text(blob, encoding="utf-8")
    else:
        click.echo(blob, nl=False)
    if strict and any(r["errors"] for r in results):
        sys.exit(EXIT_STRICT)


_ASSERT_RE = re.compile(r"^(?P<metric>.+?)(?P<op>>=|<=|==|>|<)(?P<value>[0-9.]+)$")


def _lookup_metric(report: ev.CorpusReport, metric: str):
    if metric == "jaccard_mean":
        return report.jaccard_mean
    if "." in metric:
        field_name, _, key = metric.rpartition(".")
        entry = report.per_field.get(field_name)
        if entry and key in entry:
            return entry[key]
    return None


def _format_ratio(value) -> str:
    return "undefined" if value is None else f"{value:.2f}"


@cli.command("evaluate")
@click.argument("corpus_path", type=click.Path())
@click.option("--report-out", type=click.Path(), default=None)
@click.option("--assert", "assertions", multiple=True,
              help="Threshold like jaccard_mean>=0.99 or 'e-mail.accuracy>=1.0'; repeatable.")
@_with_config_options
def cmd_evaluate(corpus_path, report_out, assertions, config_path, gateway_mode, transcript):
    """Evaluate a ground-truth corpus and print the per-field summary."""
    config = _load_config(config_path, gateway_mode, transcript)
    wiring = _wiring(config)
    try:
        corpus_payload = json.loads(Path(corpus_path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        _fail("input", f"cannot read corpus: {exc}", EXIT_INPUT)
    try:
        jsonschema.validate(corpus_payload, _schema("corpus.schema.json"))
    except jsonschema.ValidationError as exc:
        _fail("schema", f"corpus does not match schema: {exc.message}", EXIT_INPUT)
    corpus = ev.load_corpus(corpus_payload)
    try:
        report = ev.evaluate_corpus(
            corpus,
            stages=config.stages,
            preprocess_config=config.preprocessing,
            ocr_adapter=wiring.ocr_adapter,
            gateway=wiring.gateway,
            catalog=wiring.catalog,
            ner_backend=wiring.ner_backend,
            routes=wiring.routes_table(),
            synonyms=config.synonyms or None,
            options=config.evaluation,
            run_config_digest=config.digest(),
            rasterizer_cmd=config.rasterizer_cmd,
        )
    except ev.ZeroDocuments as exc:
        _fail("input", str(exc), EXIT_INPUT)
    if report_out:
        Path(report_out).write_text(report.to_json(), encoding="utf-8")
    width = max([len(f) for f in report.per_field] + [5])
    click.echo(f"{'field'.ljust(width)}  {'technique':<12} {'accuracy':>9} {'precision':>10} {'recall':>7}")
    for field_name, entry in report.per_field.items():
        click.echo(
            f"{field_name.ljust(width)}  {str(entry['technique'] or '-'):<12}"
            f" {_format_ratio(entry['accuracy']):>9} {_format_ratio(entry['precision']):>10}"
            f" {_format_ratio(entry['recall']):>7}"
        )
    click.echo(f"jaccard_mean: {report.jaccard_mean if report.jaccard_mean is not None else 'undefined'}")
    failed = []
    for expr in assertions:
        m = _ASSERT_RE.match(expr.strip())
        if not m:
            raise click.UsageError(f"cannot parse --assert {expr!r}")
        actual = _lookup_metric(report, m.group("metric").strip())
        threshold = float(m.group("value"))
        op = m.group("op")
        ok = actual is not None and {
            ">=": actual >= threshold,
            "<=": actual <= threshold,
            ">": actual > threshold,
            "<": actual < threshold,
            "==": actual == threshold,
        }[op]
        if not ok:
            failed.append(f"{expr} (actual: {actual})")
    if failed:
        _fail("assert", "; ".join(failed), EXIT_ASSERT)


@cli.command("generate")
@click.argument("out_dir", type=click.Path())
@click.option("--seed", type=int, required=False, default=None, help="Base seed.")
@click.option("--count", "-n", type=int, required=False, default=None, help="Number of documents.")
@click.option("--force", is_flag=True, help="Write into a non-empty directory.")
@click.option("--raster/--no-raster", default=False, help="Also render block-cell PNG pages.")
def cmd_generate(out_dir, seed, count, force, raster):
    """Generate a synthetic resume corpus with ground truth and a replay transcript."""
    if seed is None or count is None:
        raise click.UsageError("--seed and --count are required")
    if count < 1:
        raise click.UsageError("--count must be >= 1")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        _fail("refused", f"{out} exists and is not empty (use --force)", EXIT_REFUSED)
    docs_dir = out / "docs"
    docs_dir.mkdir(parents=True, exist_ok=True)
    pools = dg.default_pools()
    corpus = dg.generate_corpus(seed, count, pools)
    try:
        (out / "corpus.json").write_text(
            json.dumps(corpus, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        files = []
        for entry in corpus["documents"]:
            name = f"{entry['doc_id']}.txt"
            (docs_dir / name).write_text(entry["source"]["value"], encoding="utf-8")
            files.append(name)
            if raster:
                truth, doc = dg.generate_resume(int(entry["doc_id"].split("-")[1]), pools)
                png = imaging.encode_png(dg.render_raster(doc))
                (docs_dir / f"{entry['doc_id']}.png").write_bytes(png)
        transcript_path = out / "transcript.jsonl"
        transcript_path.unlink(missing_ok=True)
        dg.build_replay_transcript(corpus, transcript_path)
        manifest = {
            "base_seed": seed,
            "count": count,
            "pool_digest": pools.digest,
            "documents": files,
            "transcript": "transcript.jsonl",
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        _fail("io", str(exc), EXIT_ADAPTER)
    click.echo(f"wrote {count} documents to {out}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8600)
@_with_config_options
def cmd_serve(host, port, config_path, gateway_mode, transcript):
    """Run the JSON-over-HTTP service."""
    import logging

    import uvicorn

    from .service import create_app

    # Structured request log: one JSON object per line on stdout.
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    service_log = logging.getLogger("docfields.service")
    service_log.addHandler(handler)
    service_log.setLevel(logging.INFO)

    config = _load_config(config_path, gateway_mode, transcript)
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)


if __name__ == "__main__":
    main()
