"""
Command-line client. Commands run against the local data directory by default and
against a running service with `--url`; `--json` switches every command to
machine-readable output. Any failure exits nonzero.
"""

import functools
import json
import os
import sys
import tempfile
from typing import Dict, List, Optional, Tuple

import click
from pydantic import ValidationError

from rollguard import __version__
from rollguard._exceptions import RollguardException
from rollguard._monitor import ReferenceMonitor
from rollguard.bench import BenchPlan, fit_k_log_n, fit_log_curve, plot_bench, run_bench
from rollguard.config import MonitorConfig, load_config
from rollguard.constants import AUDIT_LOG, CATALOG, CONFIG_ENV, PAD_NAMES, REGISTRY
from rollguard.logger_conf import configure_logging
from rollguard.models.leaves import PruneReason
from rollguard.models.requests import RollbackMode, Target
from rollguard.service import HttpClient, LocalClient, ServiceError, create_app, error_response
from rollguard.service.schemas import (
    ChangeBody,
    ErrorResponse,
    PruneBody,
    RollbackBody,
    SnapshotBody,
    StateUpdateBody,
    TakeSnapshotBody,
)

FAILURE_EXIT_CODE = 1


class CliContext:
    """Options shared by every command; the client is built on first use."""

    def __init__(
        self,
        config_path: Optional[str],
        data_dir: Optional[str],
        url: Optional[str],
        token: Optional[str],
        as_json: bool,
    ):
        self.config_path = config_path
        self.data_dir = data_dir
        self.url = url
        self.token = token
        self.as_json = as_json
        self._monitor: Optional[ReferenceMonitor] = None

    def config(self) -> MonitorConfig:
        if self.data_dir:
            return MonitorConfig.for_directory(self.data_dir)
        if self.config_path or os.getenv(CONFIG_ENV):
            return load_config(self.config_path)
        raise click.UsageError(f"Give --config, --data-dir or set {CONFIG_ENV}.")

    def monitor(self, auto_recover: bool = True) -> ReferenceMonitor:
        if self._monitor is None:
            config = self.config()
            configure_logging(config.log_level, config.log_file)
            self._monitor = ReferenceMonitor(config, auto_recover=auto_recover)
        return self._monitor

    def client(self):
        if self.url:
            return HttpClient(self.url, token=self.token)
        return LocalClient(self.monitor(), token=self.token)

    def emit(self, payload, text: str) -> None:
        if self.as_json:
            if hasattr(payload, "model_dump_json"):
                click.echo(payload.model_dump_json())
            else:
                click.echo(json.dumps(payload, sort_keys=True))
        else:
            click.echo(text)


def _fail(ctx: CliContext, status: int, error: ErrorResponse) -> None:
    if ctx.as_json:
        click.echo(json.dumps({"status": status, **error.model_dump()}, sort_keys=True))
    else:
        click.echo(f"Error [{status} {error.reason}]: {error.message}", err=True)
    sys.exit(FAILURE_EXIT_CODE)


def reports_errors(fn):
    """Turn monitor and service failures into a message and a nonzero exit."""

    @functools.wraps(fn)
    def wrapper(ctx: CliContext, *args, **kwargs):
        try:
            return fn(ctx, *args, **kwargs)
        except ServiceError as e:
            _fail(ctx, e.status, e.error)
        except (RollguardException, ValidationError) as e:
            _fail(ctx, *error_response(e))
        except OSError as e:
            _fail(ctx, 500, ErrorResponse(error=type(e).__name__, reason="io-error", message=str(e)))
        return None

    return wrapper


def _outcome_text(outcome) -> str:
    replayed = " (replayed)" if outcome.replayed else ""
    return (
        f"{outcome.op.value} committed{replayed}: txid={outcome.txid} "
        f"counter={outcome.counter} root={outcome.root}"
    )


def _parse_pairs(values: Tuple[str, ...], sep: str, label: str) -> List[Tuple[str, str]]:
    pairs = []
    for value in values:
        # objects may contain "@" and inline content may contain "="
        left, found, right = value.rpartition(sep) if sep == "@" else value.partition(sep)
        if not found or not left or not right:
            raise click.BadParameter(f"Expected {label}, got '{value}'.")
        pairs.append((left, right))
    return pairs


def _targets(values: Tuple[str, ...]) -> Optional[List[Target]]:
    if not values:
        return None
    targets = []
    for obj, version in _parse_pairs(values, "@", "OBJECT@VERSION"):
        if not version.isdigit():
            raise click.BadParameter(f"Version in '{obj}@{version}' is not a number.")
        targets.append(Target(object=obj, version=int(version)))
    return targets


def _selection(tag: Optional[str], targets: Tuple[str, ...]) -> Dict:
    if (tag is None) == (not targets):
        raise click.UsageError("Give either --tag or at least one --target.")
    if tag is not None:
        return {"mode": RollbackMode.SNAPSHOT, "tag": tag}
    return {"mode": RollbackMode.SELECTIVE, "targets": _targets(targets)}


actor_option = click.option(
    "--actor", envvar="ROLLGUARD_ACTOR", default=None, help="Acting principal."
)
justification_option = click.option("--justification", "-m", default="")
txid_option = click.option("--txid", default=None, help="Explicit transaction id for retries.")
key_option = click.option(
    "--idempotency-key", default=None, help="Retry key, mapped to a transaction id."
)


@click.group()
@click.version_option(__version__, prog_name="rollguard")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help=f"JSON config file (default ${CONFIG_ENV}).",
)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.option("--url", default=None, help="Base URL of a running rollguard service.")
@click.option("--token", envvar="ROLLGUARD_TOKEN", default=None, help="Bearer token.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def cli(ctx, config_path, data_dir, url, token, as_json):
    """Rollback-aware state continuity monitor."""
    ctx.obj = CliContext(config_path, data_dir, url, token, as_json)


# =============================================================================
# State changes
# =============================================================================


@cli.command()
@click.argument("changes", nargs=-1, required=True)
@click.option("--literal", is_flag=True, help="Treat values as inline UTF-8 content.")
@click.option("--snapshot", "snapshot_tag", default=None, help="Also bind the changes to TAG.")
@actor_option
@justification_option
@txid_option
@key_option
@click.pass_obj
@reports_errors
def update(ctx, changes, literal, snapshot_tag, actor, justification, txid, idempotency_key):
    """Write new versions: OBJECT=PATH pairs (OBJECT=TEXT with --literal)."""
    bodies = []
    for obj, value in _parse_pairs(changes, "=", "OBJECT=PATH"):
        if literal:
            data = value.encode("utf-8")
        else:
            with open(value, "rb") as file:
                data = file.read()
        bodies.append(ChangeBody.from_bytes(obj, data))

    body = StateUpdateBody(
        changes=bodies,
        snapshot=SnapshotBody(tag=snapshot_tag) if snapshot_tag else None,
        actor=actor,
        justification=justification,
        txid=txid,
    )
    outcome = ctx.client().state_update(body, idempotency_key)
    ctx.emit(outcome, _outcome_text(outcome))


@cli.command()
@click.argument("tag")
@click.argument("members", nargs=-1, required=True)
@actor_option
@justification_option
@txid_option
@key_option
@click.pass_obj
@reports_errors
def snapshot(ctx, tag, members, actor, justification, txid, idempotency_key):
    """Bind the current heads of MEMBERS to TAG."""
    body = TakeSnapshotBody(
        tag=tag, members=list(members), actor=actor, justification=justification, txid=txid
    )
    outcome = ctx.client().take_snapshot(body, idempotency_key)
    ctx.emit(outcome, _outcome_text(outcome))


@cli.command()
@click.option("--tag", default=None, help="Restore every member of a snapshot.")
@click.option("--target", "targets", multiple=True, help="OBJECT@VERSION, repeatable.")
@actor_option
@justification_option
@txid_option
@key_option
@click.pass_obj
@reports_errors
def rollback(ctx, tag, targets, actor, justification, txid, idempotency_key):
    """Restore earlier versions as new heads."""
    body = RollbackBody(
        **_selection(tag, targets), actor=actor, justification=justification, txid=txid
    )
    outcome = ctx.client().rollback(body, idempotency_key)
    ctx.emit(outcome, _outcome_text(outcome))


@cli.command()
@click.option("--tag", default=None, help="Prune every member of a snapshot.")
@click.option("--target", "targets", multiple=True, help="OBJECT@VERSION, repeatable.")
@click.option(
    "--reason",
    type=click.Choice([reason.value for reason in PruneReason]),
    default=PruneReason.OTHER.value,
    show_default=True,
)
@click.option("--detail", "reason_detail", default="")
@actor_option
@justification_option
@txid_option
@key_option
@click.pass_obj
@reports_errors
def prune(ctx, tag, targets, reason, reason_detail, actor, justification, txid, idempotency_key):
    """Tombstone versions so they can never be restored."""
    body = PruneBody(
        **_selection(tag, targets),
        reason=PruneReason(reason),
        reason_detail=reason_detail,
        actor=actor,
        justification=justification,
        txid=txid,
    )
    outcome = ctx.client().prune(body, idempotency_key)
    ctx.emit(outcome, _outcome_text(outcome))


# =============================================================================
# Queries
# =============================================================================


@cli.command()
@click.pass_obj
@reports_errors
def snapshots(ctx):
    """List snapshots with their members and pruned members."""
    response = ctx.client().snapshots()
    lines = []
    for listing in response.snapshots:
        pruned = {(m.object, m.version) for m in listing.pruned_members}
        members = ", ".join(
            f"{m.object}@{m.version}{' (pruned)' if (m.object, m.version) in pruned else ''}"
            for m in listing.members
        )
        lines.append(f"{listing.tag}\t{listing.txid}\t{members}")
    ctx.emit(response, "\n".join(lines) if lines else "No snapshots.")


@cli.command()
@click.argument("object_id", metavar="OBJECT")
@click.pass_obj
@reports_errors
def lineage(ctx, object_id):
    """Verified version history of OBJECT."""
    client = ctx.client()
    if ctx.as_json:
        ctx.emit(client.lineage(object_id), "")
    else:
        click.echo(client.lineage_text(object_id), nl=False)


@cli.command()
@click.argument("object_id", metavar="OBJECT")
@click.argument("version", type=click.IntRange(min=0))
@click.option("--tag", default=None, help="Also require membership in this snapshot.")
@click.pass_obj
@reports_errors
def eligibility(ctx, object_id, version, tag):
    """Whether OBJECT@VERSION may be restored; exits nonzero when it may not."""
    response = ctx.client().eligibility(object_id, version, tag)
    report = response.report
    text = (
        f"{object_id}@{version}: {'eligible' if response.eligible else 'not eligible'} "
        f"(in_catalog={report.in_catalog}, tombstoned={report.tombstoned}, "
        f"in_snapshot={report.in_snapshot})"
    )
    ctx.emit(response, text)
    if not response.eligible:
        sys.exit(FAILURE_EXIT_CODE)


def _verify_local(monitor: ReferenceMonitor) -> Dict:
    """Seal check plus a verified scan of every committed leaf and live payload."""
    if monitor.needs_recovery:
        return {
            "verified": False,
            "reason": monitor.pending.kind.value,
            "detail": monitor.pending.detail,
        }
    at = monitor.checkpoint
    if not monitor.auditor.verify_checkpoint(at):
        return {"verified": False, "reason": "seal-mismatch", "counter": at.counter}

    scanned = {name: sum(1 for _ in monitor.state.scan_verified(name, at)) for name in PAD_NAMES}
    objects = monitor.state.index.objects(at.catalog_size)
    payloads = 0
    for obj in objects:
        if monitor.read_object(obj) is not None:
            payloads += 1
    return {
        "verified": True,
        "counter": at.counter,
        "root": at.root,
        "leaves": scanned,
        "objects": len(objects),
        "payloads": payloads,
    }


@cli.command()
@click.pass_obj
@reports_errors
def verify(ctx):
    """Check the sealed checkpoint and every committed leaf; exits nonzero on failure."""
    if ctx.url:
        checkpoint = ctx.client().checkpoint()
        report = {"verified": checkpoint.verified, "counter": checkpoint.counter, "root": checkpoint.root}
    else:
        report = _verify_local(ctx.monitor(auto_recover=False))

    if report["verified"]:
        text = f"verified: counter={report['counter']} root={report['root']}"
        if "leaves" in report:
            leaves = report["leaves"]
            text += (
                f" catalog={leaves[CATALOG]} registry={leaves[REGISTRY]} "
                f"log={leaves[AUDIT_LOG]} payloads={report['payloads']}"
            )
    else:
        text = f"NOT verified: {report.get('reason', 'seal-mismatch')}"
    ctx.emit(report, text)
    if not report["verified"]:
        sys.exit(FAILURE_EXIT_CODE)


# =============================================================================
# Operations
# =============================================================================


@cli.command()
@click.option(
    "--op",
    "operation",
    type=click.Choice(["update", "snapshot", "rollback", "prune", "query", "lineage"]),
    default="query",
    show_default=True,
)
@click.option("--objects", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--until-leaves", type=click.IntRange(min=1), default=2700, show_default=True)
@click.option("--scales", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--payload-bytes", type=click.IntRange(min=1), default=256, show_default=True)
@click.option("--retention", type=click.IntRange(min=1), default=None)
@click.option("--head-tracking", type=click.Choice(["leaf", "inline"]), default="leaf")
@click.option("--workdir", type=click.Path(file_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default="bench.csv", show_default=True)
@click.option("--plot", type=click.Path(dir_okay=False), default=None)
@click.option("--progress/--no-progress", default=False)
@click.pass_obj
@reports_errors
def bench(
    ctx,
    operation,
    objects,
    until_leaves,
    scales,
    samples,
    payload_bytes,
    retention,
    head_tracking,
    workdir,
    out,
    plot,
    progress,
):
    """Grow a scratch history and record per-scale latency, hash work and storage."""
    plan = BenchPlan(
        operation=operation,
        objects=objects,
        until_leaves=until_leaves,
        scales=scales,
        samples=samples,
        payload_bytes=payload_bytes,
        retention=retention,
    )
    with tempfile.TemporaryDirectory(prefix="rollguard-bench-") as scratch:
        monitor = ReferenceMonitor(
            MonitorConfig.for_directory(
                workdir or scratch, head_tracking=head_tracking, clock="counter"
            )
        )
        df = run_bench(monitor, plan, progress=progress)

    df.to_csv(out, index=False)
    if plot:
        plot_bench(df, plot)

    fits = {}
    if len(df) >= 2:
        if operation == "lineage":
            fit = fit_k_log_n(df["lineage_events"], df["pad_leaves"], df["latency_mean_ms"])
        else:
            fit = fit_log_curve(df["pad_leaves"], df["latency_mean_ms"])
        fits["latency"] = fit.model_dump()
        if operation == "query":
            fits["verify"] = fit_log_curve(df["pad_leaves"], df["verify_latency_us"]).model_dump()

    if ctx.as_json:
        for record in df.to_dict(orient="records"):
            click.echo(json.dumps(record, sort_keys=True))
        if fits:
            click.echo(json.dumps({"fits": fits}, sort_keys=True))
    else:
        click.echo(df.to_string(index=False))
        if fits:
            latency = fits["latency"]
            click.echo(
                f"latency fit: intercept={latency['intercept']:.4f} "
                f"slope={latency['slope']:.4f} r2={latency['r2']:.3f}"
            )
        if "verify" in fits:
            verify = fits["verify"]
            click.echo(
                f"verify fit: intercept={verify['intercept']:.4f} "
                f"slope={verify['slope']:.4f} r2={verify['r2']:.3f}"
            )
        click.echo(f"wrote {out}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.pass_obj
@reports_errors
def serve(ctx, host, port):
    """Run the HTTP/JSON service over the configured data directory."""
    # pylint: disable=import-outside-toplevel
    import uvicorn

    if ctx.url:
        raise click.UsageError("serve runs against a local data directory, not --url.")
    uvicorn.run(create_app(ctx.monitor()), host=host, port=port)


def main() -> None:
    cli()  # pylint: disable=no-value-for-parameter


if __name__ == "__main__":
    main()
