"""twinbed command line: serve the twin, run experiments, replay archives.

The CLI stays thin: `run` calls the same experiment service the HTTP endpoint
uses (or posts to a running server with --server), `serve` and `replay` start
the FastAPI app.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from twinbed.archive import latency_report, read_archive, verify_archive, write_archive
from twinbed.config import TwinConfig, load_config
from twinbed.errors import TwinbedError


def _load(config_path: str | None) -> TwinConfig:
    if config_path is None:
        return TwinConfig.default()
    return load_config(config_path)


@click.group()
def main() -> None:
    """Software twin of the sand-table multi-vehicle testbed."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file; defaults to built-in parameters.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--tcp-port", type=int, default=None,
              help="Also serve the length-prefixed JSON protocol on this TCP port.")
@click.option("--time-scale", type=float, default=1.0, show_default=True,
              help="Virtual seconds per wall second.")
@click.option("--platoon/--no-platoon", default=True, show_default=True,
              help="Run the platoon scenario; otherwise vehicles idle awaiting modes.")
def serve(config_path, seed, host, port, tcp_port, time_scale, platoon) -> None:
    """Serve a live twin over REST + websocket (and optionally TCP)."""
    import uvicorn

    from twinbed.service.app import create_app

    config = _load(config_path)
    if seed is not None:
        config.scenario.seed = seed
    app = create_app(
        config,
        time_scale=time_scale,
        platoon=platoon,
        tcp=(host, tcp_port) if tcp_port is not None else None,
    )
    click.echo(f"serving live twin on http://{host}:{port} (ws at /ws)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Archive directory for run outputs.")
@click.option("--duration", type=float, default=None, help="Override duration [s].")
@click.option("--server", default=None,
              help="POST the run to a running twinbed server instead of running locally.")
def run(config_path, seed, out_dir, duration, server) -> None:
    """Run the platoon experiment and write the archive."""
    config = _load(config_path)
    if seed is not None:
        config.scenario.seed = seed
    if duration is not None:
        config.scenario.duration_s = duration

    if server is not None:
        import httpx

        body = {"config": config.to_dict(), "out_dir": str(Path(out_dir).resolve())}
        response = httpx.post(f"{server}/experiments", json=body, timeout=600.0)
        response.raise_for_status()
        payload = response.json()
        click.echo(json.dumps(payload["metrics"], indent=2, sort_keys=True))
        click.echo(f"archive: {payload['archive_dir']}")
        return

    from twinbed.scenario import run_experiment

    try:
        result = run_experiment(config)
    except TwinbedError as exc:
        raise click.ClickException(str(exc)) from exc
    write_archive(result, out_dir)
    click.echo(json.dumps(result.metrics, indent=2, sort_keys=True))
    click.echo(f"archive: {Path(out_dir).resolve()}")


@main.command()
@click.option("--archive", "archive_dir", type=click.Path(exists=True), required=True)
@click.option("--speed", type=float, default=1.0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--loop/--no-loop", default=False, show_default=True)
def replay(archive_dir, speed, host, port, loop) -> None:
    """Re-serve a recorded snapshot stream on the live websocket endpoint."""
    import uvicorn

    from twinbed.service.app import create_app

    archive = read_archive(archive_dir)
    mismatched = verify_archive(archive)
    if mismatched:
        raise click.ClickException(f"archive failed verification: {mismatched}")
    app = create_app(replay_archive=archive_dir, replay_speed=speed, replay_loop=loop)
    click.echo(f"replaying {archive_dir} at {speed}x on ws://{host}:{port}/ws")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--archive", "archive_dir", type=click.Path(exists=True), required=True)
def report(archive_dir) -> None:
    """Print the per-stage delay statistics table from an archive."""
    archive = read_archive(archive_dir)
    rep = latency_report(archive.load_delays())
    header = f"{'stage':>5} {'n':>7} {'mean':>8} {'max':>8} {'min':>8} {'p99':>8}"
    click.echo(header)
    for stage, stats in sorted(rep["stages"].items()):
        click.echo(
            f"{stage:>5} {stats['sample_size']:>7} {stats['mean_ms']:>8.2f} "
            f"{stats['max_ms']:>8.2f} {stats['min_ms']:>8.2f} {stats['p99_ms']:>8.2f}"
        )
    if rep.get("skipped"):
        click.echo(f"skipped stages {rep['skipped']['stages']}: {rep['skipped']['note']}")


if __name__ == "__main__":
    sys.exit(main())
