"""`forge` command line: run pipeline stages or serve the review UI backend.

Exit codes: 0 success, 2 configuration error, 3 missing prerequisite,
4 completed with partial failures (see the stage report).
"""

from __future__ import annotations

import json
import sys

import click

from .errors import ConfigError, ForgeError, MissingPrerequisiteError
from .pipeline import (
    EXIT_CONFIG,
    EXIT_PARTIAL,
    EXIT_PREREQUISITE,
    Artifacts,
    load_config,
    run_stage,
)

_CONFIG_OPTIONS = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=False), help="Pipeline config file."),
    click.option("--task", "tasks", multiple=True, help="Restrict to these task ids."),
    click.option("--resume", is_flag=True, default=False,
                 help="Skip stages whose inputs are unchanged."),
    click.option("--mock-endpoint", "mock_endpoint", default=None,
                 help="Use a scripted mock endpoint (path to script JSON, or empty)."),
]


def _with_config_options(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


def _load(config_path, tasks, resume, mock_endpoint):
    descriptor = None
    if mock_endpoint is not None:
        descriptor = f"mock:{mock_endpoint}" if mock_endpoint else "mock:"
    return load_config(config_path, resume=resume, mock_endpoint=descriptor,
                       tasks=list(tasks) or None)


def _run(stage: str, config_path, tasks, resume, mock_endpoint) -> None:
    try:
        cfg = _load(config_path, tasks, resume, mock_endpoint)
        report = run_stage(stage, cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except MissingPrerequisiteError as exc:
        click.echo(f"prerequisite error: {exc}", err=True)
        sys.exit(EXIT_PREREQUISITE)
    except ForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PARTIAL)
    click.echo(json.dumps(report.to_obj(), indent=2, sort_keys=True))
    if report.failures:
        sys.exit(EXIT_PARTIAL)


@click.group()
def main():
    """Synthesize in-context instruction-tuning datasets from visual annotations."""


def _stage_command(stage: str, help_text: str):
    @main.command(name=stage, help=help_text)
    @_with_config_options
    def command(config_path, tasks, resume, mock_endpoint, _stage=stage):
        _run(_stage, config_path, tasks, resume, mock_endpoint)

    return command


_stage_command("ingest", "Validate raw annotations into bundle artifacts.")
_stage_command("generate", "Query the annotator and parse/filter pairs.")
_stage_command("pack", "Build records and select in-context links.")
_stage_command("translate", "Expand records into the configured languages.")
_stage_command("export", "Write the final per-task dataset files.")
_stage_command("stats", "Compute dataset statistics and figure data.")


@main.group()
def coldstart():
    """Cold-start curation commands."""


@coldstart.command("serve")
@_with_config_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8710, show_default=True, type=int)
def coldstart_serve(config_path, tasks, resume, mock_endpoint, host, port):
    """Serve the review API for the browser frontend (loopback by default)."""
    try:
        cfg = _load(config_path, tasks, resume, mock_endpoint)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    from .coldstart import ColdStartStore
    from .review_service import serve

    art = Artifacts(cfg)
    store = ColdStartStore(art.events_log(), min_entries=cfg.pool_min_entries)
    click.echo(f"review service on http://{host}:{port}")
    serve(store, host=host, port=port, registry_path=art.ingest_registry(),
          reports_dir=art.reports)


if __name__ == "__main__":
    main()
