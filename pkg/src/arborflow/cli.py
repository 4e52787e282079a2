"""Command-line front end: file-to-file transformations plus `serve`.

Exit codes: 0 success, 1 validation/domain failure, 2 I/O or parse trouble.
With --json, errors go to stderr as one machine-readable JSON object.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Optional

import click

from .enumeration import DEFAULT_TARGET_CAP, ensure_axiom_visibility, generate_targets
from .errors import (
    ArborflowError,
    ExplosionLimitError,
    RecursiveGrammarError,
    SpecValidationError,
    UnknownActorError,
)
from .expansion import GuidePolicy, expand
from .model import ProcessSpec, ValidationReport, validate_spec
from .projection import project_artifact_rooted, project_grammar
from .serialize import (
    FormatError,
    MixedAnnotationError,
    artifact_loads,
    artifact_to_dict,
    canonical_dumps,
    production_to_dict,
    spec_loads,
    spec_to_dict,
    to_compact,
)
from .simulate import script_from_dict, simulate


def _emit_error(as_json: bool, code: str, message: str, extra: Optional[dict] = None) -> None:
    if as_json:
        doc = {"error": code, "message": message}
        if extra:
            doc.update(extra)
        click.echo(canonical_dumps(doc), err=True)
    else:
        click.echo(f"error: {message}", err=True)


def guarded(fn):
    """Translate exceptions into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        as_json = kwargs.get("as_json", False)
        try:
            return fn(*args, **kwargs)
        except FormatError as exc:
            _emit_error(as_json, "bad-format", str(exc))
            sys.exit(2)
        except OSError as exc:
            _emit_error(as_json, "io-error", str(exc))
            sys.exit(2)
        except json.JSONDecodeError as exc:
            _emit_error(as_json, "bad-json", str(exc))
            sys.exit(2)
        except SpecValidationError as exc:
            _emit_error(as_json, exc.code, str(exc), exc.payload())
            sys.exit(1)
        except ArborflowError as exc:
            _emit_error(as_json, exc.code, str(exc), exc.payload())
            sys.exit(1)

    return wrapper


def _load_spec(path: str) -> ProcessSpec:
    return spec_loads(Path(path).read_text(encoding="utf-8"))


def _load_valid_spec(path: str) -> ProcessSpec:
    spec = _load_spec(path)
    report = validate_spec(spec)
    if not report.ok:
        raise SpecValidationError(report)
    return spec


def _view(spec: ProcessSpec, actor: str) -> frozenset[str]:
    try:
        return spec.view_of(actor)
    except KeyError:
        raise UnknownActorError(f"actor {actor!r} is not part of the process") from None


def _parse_guide_policy(text: str) -> tuple[GuidePolicy, Optional[int], Optional[int]]:
    if text == "first":
        return GuidePolicy.DETERMINISTIC_FIRST, None, None
    if text.startswith("seed="):
        return GuidePolicy.SEEDED_RANDOM, int(text[5:]), None
    if text.startswith("index="):
        return GuidePolicy.EXTERNAL, None, int(text[6:])
    raise FormatError(
        f"bad guide policy {text!r}: expected first, seed=<n> or index=<k>"
    )


@click.group()
def main() -> None:
    """Grammar-driven workflow artifacts: validate, project, expand, run."""


@main.command()
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@guarded
def validate(spec_file: str, as_json: bool) -> None:
    """Check a process spec; exit 1 when it has errors."""
    try:
        spec = _load_spec(spec_file)
        report = validate_spec(spec)
    except MixedAnnotationError as exc:
        # semantically a broken spec, not a broken file: report it like one
        report = ValidationReport()
        report.error("mixed-annotation", str(exc))
    if as_json:
        click.echo(canonical_dumps(report.to_dict()))
    else:
        for issue in report.errors:
            click.echo(f"error [{issue.code}]: {issue.message}")
        for issue in report.warnings:
            click.echo(f"warning [{issue.code}]: {issue.message}")
        if report.ok:
            click.echo("ok")
    if not report.ok:
        sys.exit(1)


@main.command()
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.option("--cap", type=int, default=DEFAULT_TARGET_CAP, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@guarded
def enumerate(spec_file: str, cap: int, as_json: bool) -> None:
    """List every complete execution scenario of the spec's grammar."""
    spec = _load_valid_spec(spec_file)
    targets = generate_targets(spec.grammar, cap)
    if as_json:
        click.echo(canonical_dumps([artifact_to_dict(t) for t in targets]))
    else:
        for t in targets:
            click.echo(to_compact(t))


@main.command("project-grammar")
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.option("--actor", required=True)
@click.option("--cap", type=int, default=DEFAULT_TARGET_CAP, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@guarded
def project_grammar_cmd(spec_file: str, actor: str, cap: int, as_json: bool) -> None:
    """Compute the actor's local grammar."""
    spec = ensure_axiom_visibility(_load_valid_spec(spec_file))
    local = project_grammar(spec.grammar, _view(spec, actor), cap)
    if as_json:
        click.echo(
            canonical_dumps(
                {
                    "actor": actor,
                    "sorts": [{"name": s.name} for s in local.grammar.sorts],
                    "axioms": list(local.grammar.axioms),
                    "productions": [
                        production_to_dict(p) for p in local.grammar.productions
                    ],
                    "localTargets": [
                        artifact_to_dict(t) for t in local.local_targets
                    ],
                }
            )
        )
    else:
        for p in local.grammar.productions:
            click.echo(str(p))


@main.command("project-artifact")
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.argument("artifact_file", type=click.Path(dir_okay=False))
@click.option("--actor", required=True)
@click.option("--json", "as_json", is_flag=True)
@guarded
def project_artifact_cmd(
    spec_file: str, artifact_file: str, actor: str, as_json: bool
) -> None:
    """Project a global artifact onto the actor's view."""
    spec = ensure_axiom_visibility(_load_valid_spec(spec_file))
    artifact = artifact_loads(Path(artifact_file).read_text(encoding="utf-8"))
    view = _view(spec, actor)
    try:
        ctx = project_grammar(spec.grammar, view).context()
    except (RecursiveGrammarError, ExplosionLimitError):
        click.echo(
            "warning: local grammar unavailable, structuring names are fresh",
            err=True,
        )
        ctx = None
    projected = project_artifact_rooted(artifact, view, ctx)
    if as_json:
        click.echo(canonical_dumps(artifact_to_dict(projected)))
    else:
        click.echo(to_compact(projected))


@main.command("expand")
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.argument("global_file", type=click.Path(dir_okay=False))
@click.argument("replica_file", type=click.Path(dir_okay=False))
@click.option("--actor", required=True)
@click.option("--guide-policy", "policy_text", default="first", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@guarded
def expand_cmd(
    spec_file: str,
    global_file: str,
    replica_file: str,
    actor: str,
    policy_text: str,
    as_json: bool,
) -> None:
    """Merge an edited replica back into the global artifact."""
    spec = ensure_axiom_visibility(_load_valid_spec(spec_file))
    policy, seed, index = _parse_guide_policy(policy_text)
    t = artifact_loads(Path(global_file).read_text(encoding="utf-8"))
    t_maj = artifact_loads(Path(replica_file).read_text(encoding="utf-8"))
    result = expand(
        t,
        t_maj,
        spec.grammar,
        _view(spec, actor),
        policy=policy,
        seed=seed,
        index=index,
    )
    if as_json:
        click.echo(canonical_dumps(artifact_to_dict(result)))
    else:
        click.echo(to_compact(result))


@main.command("simulate")
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.argument("script_file", type=click.Path(dir_okay=False))
@click.option("--trace", "trace_file", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
@guarded
def simulate_cmd(
    spec_file: str, script_file: str, trace_file: Optional[str], as_json: bool
) -> None:
    """Replay a scenario script across all peers."""
    spec = _load_valid_spec(spec_file)
    script = script_from_dict(
        json.loads(Path(script_file).read_text(encoding="utf-8"))
    )
    trace = simulate(spec, script)
    text = trace.dumps()
    if trace_file:
        Path(trace_file).write_text(text + "\n", encoding="utf-8")
    if as_json:
        click.echo(text)
    elif not trace_file:
        for case_id, status in sorted(trace.status.items()):
            final = trace.final.get(case_id)
            suffix = f" {to_compact(final)}" if final is not None else ""
            click.echo(f"{case_id}: {status}{suffix}")
        click.echo(f"{len(trace.events)} events")


@main.command("serve")
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--state", "state_dir", type=click.Path(file_okay=False), default=None)
@click.option("--static", "static_dir", type=click.Path(file_okay=False), default=None)
@guarded
def serve_cmd(
    spec_file: str,
    host: str,
    port: int,
    state_dir: Optional[str],
    static_dir: Optional[str],
) -> None:
    """Run the HTTP workbench for this spec."""
    import uvicorn

    from .service import create_app

    spec = _load_valid_spec(spec_file)
    if static_dir is None:
        candidate = Path("frontend") / "dist"
        if candidate.is_dir():
            static_dir = str(candidate)
    app = create_app(spec, state_dir=state_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
