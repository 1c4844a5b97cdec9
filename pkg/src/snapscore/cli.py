"""Command-line surface: thin compositions of the library modules.

Exit codes: 0 = primary artifact produced, 1 = pipeline could not process
the input (e.g. unusable photo), 2 = malformed input file or bad usage.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import bootleg, evaluate, imgio
from .align import AlignmentError, align as run_align
from .bootleg import BootlegFormatError, midi_bootleg
from .config import Config, ConfigError
from .midi import MidiParseError, cluster_onsets, parse_midi
from .sheet import PipelineError, process_image

EXIT_PIPELINE = 1
EXIT_BAD_INPUT = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="JSON config file.")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override a single config key (repeatable).")(fn)
    return fn


def _load_config(config_path, overrides) -> Config:
    try:
        cfg = Config.load_json(Path(config_path).read_text()) \
            if config_path else Config()
        if overrides:
            parsed = {}
            for item in overrides:
                if "=" not in item:
                    raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
                key, value = item.split("=", 1)
                parsed[key] = json.loads(value)
            cfg = cfg.replace(**parsed)
        return cfg
    except (ConfigError, json.JSONDecodeError) as exc:
        _fail(EXIT_BAD_INPUT, str(exc))


@click.group()
def main():
    """Find where a photographed page of piano sheet music occurs in a MIDI
    file, via bootleg-score alignment."""


@main.command("midi-bootleg")
@click.argument("midi_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--debug-json", type=click.Path(), default=None,
              help="Also write a human-readable per-column dump.")
@_config_options
def cmd_midi_bootleg(midi_path, out_path, debug_json, config_path, overrides):
    """Convert a Standard MIDI File into a serialized bootleg score."""
    cfg = _load_config(config_path, overrides)
    try:
        onsets = parse_midi(Path(midi_path).read_bytes())
        events = cluster_onsets(onsets, cfg.onset_cluster_tol)
        score = midi_bootleg(events)
    except (MidiParseError, ValueError) as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    Path(out_path).write_bytes(bootleg.serialize(score))
    if debug_json:
        Path(debug_json).write_text(score.to_debug_json())
    click.echo(json.dumps({
        "input": str(midi_path),
        "output": str(out_path),
        "numOnsets": len(onsets),
        "numEvents": len(events),
        "numColumns": score.num_columns,
        "configHash": cfg.config_hash,
    }, indent=2))


@main.command("image-bootleg")
@click.argument("image_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--overlay", "overlay_dir", type=click.Path(), default=None,
              help="Directory for annotated overlay images.")
@click.option("--layers", default=",".join(imgio.OVERLAY_LAYERS),
              show_default=True, help="Comma-separated overlay layers.")
@_config_options
def cmd_image_bootleg(image_path, out_path, overlay_dir, layers,
                      config_path, overrides):
    """Convert a sheet-music photo into a serialized bootleg score."""
    cfg = _load_config(config_path, overrides)
    try:
        raster = imgio.load_image(image_path)
    except OSError as exc:
        _fail(EXIT_BAD_INPUT, f"cannot decode image: {exc}")
    try:
        result = process_image(raster, cfg)
    except PipelineError as exc:
        _fail(EXIT_PIPELINE, str(exc))
    Path(out_path).write_bytes(bootleg.serialize(result.score))
    if overlay_dir:
        layer_list = tuple(s.strip() for s in layers.split(",") if s.strip())
        try:
            imgio.write_overlays(result, overlay_dir, Path(image_path).stem,
                                 layer_list)
        except ValueError as exc:
            _fail(EXIT_BAD_INPUT, str(exc))
    click.echo(json.dumps({
        "input": str(image_path),
        "output": str(out_path),
        "numDetections": len(result.detections),
        "numDiscarded": result.num_discarded,
        "numMusicLines": len(result.lines),
        "numEvents": len(result.events),
        "numColumns": result.score.num_columns,
        "stageTimings": result.timings,
        "configHash": cfg.config_hash,
    }, indent=2))


@main.command("align")
@click.argument("query_btlg", type=click.Path(exists=True))
@click.argument("ref_btlg", type=click.Path(exists=True))
@click.argument("midi_path", type=click.Path(exists=True))
@_config_options
def cmd_align(query_btlg, ref_btlg, midi_path, config_path, overrides):
    """Align a query bootleg against a reference and print the MIDI interval."""
    cfg = _load_config(config_path, overrides)
    t0 = time.perf_counter()
    try:
        query = bootleg.deserialize(Path(query_btlg).read_bytes())
        reference = bootleg.deserialize(Path(ref_btlg).read_bytes())
        events = cluster_onsets(parse_midi(Path(midi_path).read_bytes()),
                                cfg.onset_cluster_tol)
    except (BootlegFormatError, MidiParseError) as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    load_time = time.perf_counter() - t0
    try:
        result = run_align(query, reference, events, cfg)
    except (AlignmentError, ValueError) as exc:
        _fail(EXIT_PIPELINE, str(exc))
    payload = result.to_json_dict()
    payload["stageTimings"] = {"load": load_time, **payload["stageTimings"]}
    payload["configHash"] = cfg.config_hash
    click.echo(json.dumps(payload, indent=2))


@main.command("evaluate")
@click.argument("annotations", type=click.Path(exists=True))
@click.option("--midi-dir", required=True, type=click.Path(exists=True))
@click.option("--image-dir", required=True, type=click.Path(exists=True))
@click.option("--baseline", "baseline", flag_value="random", default=None,
              help="Also score a baseline ('random' is the only kind).")
@click.option("--workers", type=int, default=None,
              help=f"Parallel workers (default ${evaluate.WORKERS_ENV_VAR} or 1).")
@click.option("--split", default=None,
              help="Only evaluate queries tagged with this split "
                   "(e.g. train or test).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the full JSON report here.")
@_config_options
def cmd_evaluate(annotations, midi_dir, image_dir, baseline, workers,
                 split, out_path, config_path, overrides):
    """Evaluate the pipeline on an annotated photo dataset."""
    cfg = _load_config(config_path, overrides)
    try:
        report = evaluate.evaluate_dataset(
            annotations, midi_dir, image_dir, cfg,
            baseline=baseline == "random", workers=workers, split=split)
    except (ValueError, OSError) as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    if out_path:
        Path(out_path).write_text(json.dumps(report, indent=2) + "\n")
    click.echo(_format_report_table(report))


def _format_report_table(report: dict) -> str:
    lines = [f"config {report['configHash'][:12]}  "
             f"queries {report['numQueries']}  "
             f"failures {len(report['failures'])}"]
    header = f"{'System':<10}{'Agg':<7}{'P':>7}{'R':>7}{'F':>7}"
    lines.append(header)
    lines.append("-" * len(header))

    def rows(name, agg):
        for kind in ("micro", "macro"):
            m = agg[kind]
            yield (f"{name:<10}{kind:<7}{m['precision']:>7.3f}"
                   f"{m['recall']:>7.3f}{m['fMeasure']:>7.3f}")

    lines.extend(rows("pipeline", report["aggregate"]))
    if "baseline" in report:
        lines.extend(rows("random", report["baseline"]["aggregate"]))
    return "\n".join(lines)


@main.command("dump-config")
@click.option("--out", "out_path", type=click.Path(), default=None)
@_config_options
def cmd_dump_config(out_path, config_path, overrides):
    """Print (or write) the effective configuration as canonical JSON."""
    cfg = _load_config(config_path, overrides)
    text = cfg.dump_json()
    if out_path:
        Path(out_path).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command("overlay")
@click.argument("image_path", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
@click.option("--layers", default=",".join(imgio.OVERLAY_LAYERS),
              show_default=True, help="Comma-separated overlay layers.")
@_config_options
def cmd_overlay(image_path, out_dir, layers, config_path, overrides):
    """Run the photo pipeline and write annotated overlay images."""
    cfg = _load_config(config_path, overrides)
    try:
        raster = imgio.load_image(image_path)
    except OSError as exc:
        _fail(EXIT_BAD_INPUT, f"cannot decode image: {exc}")
    try:
        result = process_image(raster, cfg)
    except PipelineError as exc:
        _fail(EXIT_PIPELINE, str(exc))
    layer_list = tuple(s.strip() for s in layers.split(",") if s.strip())
    try:
        written = imgio.write_overlays(result, out_dir, Path(image_path).stem,
                                       layer_list)
    except ValueError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
