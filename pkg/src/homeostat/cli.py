"""Operator command line: serve, gate, simulate, lint, status.

Exit codes are uniform across subcommands: 0 success, 1 domain findings
or failures (lint findings, startup failure, unreachable service), 2
usage errors (bad flags, invalid numerics).

Every flag can also be set from a JSON config file (--config PATH or
HOMEOSTAT_CONFIG), laid out as one object per subcommand:

    {"gate": {"degradation": 0.02}, "serve": {"store": "m.hsm"}}

Explicit flags win over the config file, which wins over defaults.
"""

from __future__ import annotations

import json
import shlex
import sys

import click

from . import memfile
from .api import ApiError, serve as api_serve
from .budget import BudgetError, GateConfig, ModelProfile, gate_report
from .compressors import ExternalCompressor, IdentityCompressor, TruncatingCompressor
from .engine import EngineConfig
from .memory import MemoryStoreError
from .simulator import (
    AppendOnly,
    ConstantGrowth,
    Homeostatic,
    RetrievalFragment,
    SeededRandomGrowth,
    SimulationError,
    SimulationSpec,
    Workload,
    export_series,
    fig2_preset,
    render_series,
)

STRATEGY_NAMES = ("append_only", "homeostatic", "retrieval")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise click.UsageError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise click.UsageError("config file must hold a JSON object")
    return data


def _apply_config(ctx: click.Context, section: str) -> None:
    """Fill parameters left at their defaults from the config file."""
    config = ctx.obj.get(section, {}) if ctx.obj else {}
    if not isinstance(config, dict):
        raise click.UsageError(f"config section {section!r} must be an object")
    for name, value in config.items():
        key = name.replace("-", "_")
        if key not in ctx.params:
            raise click.UsageError(f"unknown config key {section}.{name}")
        source = ctx.get_parameter_source(key)
        if source is not None and source.name in ("DEFAULT", "DEFAULT_MAP"):
            ctx.params[key] = value


@click.group()
@click.version_option(package_name="homeostat")
@click.option(
    "--config",
    "config_path",
    envvar="HOMEOSTAT_CONFIG",
    default=None,
    help="JSON config file with one object per subcommand.",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Persistence engine and simulator for bounded, lossy context channels."""
    ctx.obj = _load_config(config_path)


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------

@main.command()
@click.option("-d", "--degradation", type=float, default=None,
              help="Fidelity loss per 100K tokens, e.g. 0.02. [required]")
@click.option("-f", "--fidelity-target", type=float, default=None,
              help="Acceptable fidelity at compression time, in (0,1). [required]")
@click.option("-t", "--trigger-fraction", type=float, default=0.5, show_default=True,
              help="Effective trigger as a fraction of the gate.")
@click.option("-w", "--window", type=int, default=None,
              help="Window size; adds a reachability check.")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text")
@click.option("--plot", "plot_path", default=None,
              help="Also render the degradation curve to this file.")
@click.pass_context
def gate(ctx, degradation, fidelity_target, trigger_fraction, window, fmt,
         plot_path):
    """Print the gate position and effective trigger for a channel."""
    _apply_config(ctx, "gate")
    p = ctx.params
    # Required after the config merge so the config file can supply them.
    for name in ("degradation", "fidelity_target"):
        if p[name] is None:
            raise click.UsageError(f"missing --{name.replace('_', '-')}")
    try:
        profile = ModelProfile(
            name="cli",
            window_size=p["window"] if p["window"] is not None else 10**12,
            degradation_rate=p["degradation"],
        )
        gate_config = GateConfig(
            fidelity_target=p["fidelity_target"],
            trigger_fraction=p["trigger_fraction"],
        )
    except BudgetError as exc:
        raise click.UsageError(str(exc))
    report = gate_report(profile, gate_config)
    unreachable = p["window"] is not None and report.gate_unreachable

    if p["fmt"] == "csv":
        window_text = "" if p["window"] is None else str(p["window"])
        unreachable_text = "" if p["window"] is None else str(unreachable).lower()
        click.echo(
            "degradation,fidelity_target,trigger_fraction,window,"
            "gate_position,effective_trigger,gate_unreachable"
        )
        click.echo(
            f"{p['degradation']},{p['fidelity_target']},{p['trigger_fraction']},"
            f"{window_text},{report.gate_position},{report.effective_trigger},"
            f"{unreachable_text}"
        )
    else:
        click.echo(f"gate_position      {report.gate_position}")
        click.echo(f"effective_trigger  {report.effective_trigger}")
        if unreachable:
            click.echo(
                f"warning: gate {report.gate_position} >= window {p['window']}"
                " (gate unreachable; the window fills before fidelity"
                " reaches the target)"
            )
    if p["plot_path"]:
        from .plots import plot_fidelity_curve

        plot_fidelity_curve(profile, gate_config, p["plot_path"])
        click.echo(f"curve written to {p['plot_path']}", err=True)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@main.command()
@click.option("--preset", type=click.Choice(["fig2"]), default=None,
              help="Use a bundled parameter set.")
@click.option("--sessions", type=int, default=30, show_default=True)
@click.option("--growth", type=int, default=None,
              help="Constant tokens per session.")
@click.option("--growth-mean", type=float, default=None,
              help="Seeded-random growth mean.")
@click.option("--growth-spread", type=float, default=0.0)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strategies", default="append_only,homeostatic", show_default=True,
              help=f"Comma-separated subset of {', '.join(STRATEGY_NAMES)}.")
@click.option("--cadence", type=int, default=5, show_default=True,
              help="Homeostatic absorption cadence in sessions.")
@click.option("--ratio", type=float, default=0.2, show_default=True,
              help="Homeostatic compression ratio (output/input).")
@click.option("--base", type=int, default=1000, show_default=True,
              help="Fixed deep-memory tokens per rewrite.")
@click.option("--trigger-policy", type=click.Choice(["effective", "at-gate", "none"]),
              default="effective", show_default=True)
@click.option("--fragments", type=int, default=4, show_default=True,
              help="Retrieval fragments per query.")
@click.option("--fragment-tokens", type=int, default=400, show_default=True)
@click.option("-d", "--degradation", type=float, default=0.02, show_default=True)
@click.option("-f", "--fidelity-target", type=float, default=0.975, show_default=True)
@click.option("-t", "--trigger-fraction", type=float, default=0.5, show_default=True)
@click.option("-w", "--window", type=int, default=200_000, show_default=True)
@click.option("--boundary", type=int, default=14_000, show_default=True)
@click.option("--out", "out_path", default=None,
              help="CSV destination; stdout when omitted.")
@click.option("--plot", "plot_path", default=None,
              help="Also render the divergence chart to this file.")
@click.pass_context
def simulate(ctx, **_: object) -> None:
    """Run a divergence simulation and export the series as CSV."""
    _apply_config(ctx, "simulate")
    p = ctx.params
    try:
        if p["preset"] == "fig2":
            spec = fig2_preset()
        else:
            spec = _build_spec(p)
        series = spec.run()
    except (SimulationError, BudgetError) as exc:
        raise click.UsageError(str(exc))

    if p["out_path"]:
        export_series(series, p["out_path"])
        click.echo(f"series written to {p['out_path']}", err=True)
    else:
        sys.stdout.write(render_series(series).decode("utf-8"))
    if p["plot_path"]:
        from .plots import plot_divergence

        plot_divergence(series, p["plot_path"], boundary=spec.boundary)
        click.echo(f"chart written to {p['plot_path']}", err=True)


def _build_spec(p: dict) -> SimulationSpec:
    if p["growth"] is not None:
        growth = ConstantGrowth(p["growth"])
    elif p["growth_mean"] is not None:
        growth = SeededRandomGrowth(p["growth_mean"], p["growth_spread"], p["seed"])
    else:
        growth = ConstantGrowth(270)
    strategies = []
    for name in str(p["strategies"]).split(","):
        name = name.strip()
        if name == "append_only":
            strategies.append(AppendOnly())
        elif name == "homeostatic":
            strategies.append(
                Homeostatic(
                    absorption_cadence=p["cadence"],
                    compression_ratio=p["ratio"],
                    base_tokens=p["base"],
                    trigger_policy=(
                        None if p["trigger_policy"] == "none" else p["trigger_policy"]
                    ),
                )
            )
        elif name == "retrieval":
            strategies.append(
                RetrievalFragment(
                    fragments_per_query=p["fragments"],
                    fragment_tokens=p["fragment_tokens"],
                )
            )
        else:
            raise SimulationError(f"unknown strategy {name!r}")
    return SimulationSpec(
        workload=Workload(p["sessions"], growth),
        strategies=tuple(strategies),
        profile=ModelProfile(name="cli", window_size=p["window"],
                             degradation_rate=p["degradation"]),
        gate=GateConfig(fidelity_target=p["fidelity_target"],
                        trigger_fraction=p["trigger_fraction"]),
        boundary=p["boundary"],
    )


# ---------------------------------------------------------------------------
# lint
# ---------------------------------------------------------------------------

@main.command()
@click.argument("path")
@click.pass_context
def lint(ctx, path):
    """Check a memory file for corruption; exit 1 when findings exist."""
    _apply_config(ctx, "lint")
    try:
        with open(ctx.params["path"], "rb") as fh:
            data = fh.read()
    except OSError as exc:
        click.echo(f"cannot read {ctx.params['path']}: {exc}", err=True)
        sys.exit(2)
    report = memfile.lint(data)
    for finding in report.findings:
        click.echo(
            f"{finding.severity} {finding.code} {finding.location} {finding.message}"
        )
    if not report.clean:
        sys.exit(1)
    click.echo("clean")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

@main.command()
@click.option("--store", envvar="HOMEOSTAT_STORE", required=True,
              help="Memory store path (env: HOMEOSTAT_STORE).")
@click.option("--bind", default="127.0.0.1:8764", show_default=True)
@click.option("--create", is_flag=True, default=False,
              help="Create an empty store when the path does not exist.")
@click.option("-d", "--degradation", type=float, default=0.02, show_default=True)
@click.option("-f", "--fidelity-target", type=float, default=0.975, show_default=True)
@click.option("-t", "--trigger-fraction", type=float, default=0.5, show_default=True)
@click.option("-w", "--window", type=int, default=200_000, show_default=True)
@click.option("--profile-name", default="default", show_default=True)
@click.option("--deep-cap", type=int, default=8_000, show_default=True)
@click.option("--recent-soft-cap", type=int, default=8_000, show_default=True)
@click.option("--hidden-margin", type=float, default=0.10, show_default=True,
              help="Position estimate inflation for unobservable tokens.")
@click.option("--compressor", type=click.Choice(["truncate", "identity", "external"]),
              default="truncate", show_default=True)
@click.option("--compressor-cmd", default=None,
              help="Command line for the external compressor.")
@click.pass_context
def serve(ctx, **_: object) -> None:
    """Run the HTTP service (endpoints under /v1) until interrupted."""
    _apply_config(ctx, "serve")
    p = ctx.params
    try:
        config = EngineConfig(
            profile=ModelProfile(name=p["profile_name"], window_size=p["window"],
                                 degradation_rate=p["degradation"]),
            gate=GateConfig(fidelity_target=p["fidelity_target"],
                            trigger_fraction=p["trigger_fraction"]),
            deep_cap=p["deep_cap"],
            recent_soft_cap=p["recent_soft_cap"],
            hidden_token_margin=p["hidden_margin"],
        )
    except BudgetError as exc:
        raise click.UsageError(str(exc))

    if p["compressor"] == "identity":
        compressor = IdentityCompressor()
    elif p["compressor"] == "external":
        if not p["compressor_cmd"]:
            raise click.UsageError("--compressor external requires --compressor-cmd")
        compressor = ExternalCompressor(
            command=shlex.split(p["compressor_cmd"]), token_budget=p["deep_cap"]
        )
    else:
        compressor = TruncatingCompressor(target_tokens=p["deep_cap"] // 2)

    try:
        api_serve(
            config,
            p["store"],
            bind=p["bind"],
            compressor=compressor,
            create=p["create"],
            announce=click.echo,
        )
    except (ApiError, MemoryStoreError, OSError) as exc:
        click.echo(f"startup failed: {exc}", err=True)
        sys.exit(1)
    except KeyboardInterrupt:
        # uvicorn re-delivers the signal after its graceful shutdown has
        # already persisted the store; that is a clean exit.
        pass


# ---------------------------------------------------------------------------
# status
# ---------------------------------------------------------------------------

@main.command()
@click.option("--url", envvar="HOMEOSTAT_URL", default="http://127.0.0.1:8764",
              show_default=True, help="Base URL of a running service.")
@click.pass_context
def status(ctx, url):
    """Query a running service's /v1/status and print the report."""
    _apply_config(ctx, "status")
    import httpx

    try:
        response = httpx.get(ctx.params["url"].rstrip("/") + "/v1/status",
                             timeout=10.0)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        click.echo(f"cannot reach service: {exc}", err=True)
        sys.exit(1)
    report = response.json()
    for key in (
        "phase", "footprint", "position_estimate", "fidelity", "gate_position",
        "effective_trigger", "quality_budget", "deep_revision", "recent_records",
    ):
        click.echo(f"{key:22}{report.get(key)}")
    pending = report.get("pending_proposal")
    if pending:
        click.echo(f"{'pending_proposal':22}{pending.get('proposal_id')}")


if __name__ == "__main__":
    main()
