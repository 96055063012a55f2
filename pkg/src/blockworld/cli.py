"""Command-line entry point: ingestion, statistics, classification, scoring,
replay, serving, offline evaluation runs, and human-eval tallies.

Exit codes: 0 ok, 1 domain failure (score mismatch, unreachable agent),
2 usage/IO/schema errors. Every command takes --json for machine-readable
stdout; report commands also write delimited files and figures to --out.
Options read environment overrides with the BLOCKWORLD_ prefix.
"""
from __future__ import annotations

import asyncio
import json
import signal
import sys
from pathlib import Path

import click

from . import dataset as ds
from . import reports
from .config import ServerConfig, load_config
from .evaluate import AgentUnreachable, EvalRunConfig, run_evaluation
from .metrics import GameOutcome, grid_f1, tally_human_eval
from .tape import ParseError, ReplayDivergence, replay
from .taxonomy import EmptyStructure, classify
from .world import Avatar, BlockGrid, RuleViolation, WorldState, diff, standing_height

CONTEXT = {"auto_envvar_prefix": "BLOCKWORLD", "help_option_names": ["-h", "--help"]}


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        _fail(str(e), 2)
    except json.JSONDecodeError as e:
        _fail(f"{path}: {e}", 2)


def _load_blocks(path: str) -> BlockGrid:
    payload = _load_json(path)
    rows = payload.get("blocks") if isinstance(payload, dict) else payload
    try:
        return BlockGrid.from_blocks(rows)
    except (RuleViolation, ValueError, TypeError) as e:
        _fail(f"{path}: {e}", 2)


def _sniff_role(path: str) -> str:
    payload = _load_json(path)
    entry = payload[0] if isinstance(payload, list) and payload else payload
    return ds.ARCHITECT if isinstance(entry, dict) and "command" in entry else ds.BUILDER


def _load_corpus(paths: tuple[str, ...]) -> list:
    records = []
    for path in paths:
        role = _sniff_role(path)
        try:
            records.extend(ds.load_records(path, role))
        except ds.SchemaError as e:
            _fail(f"{path}: {e}", 2)
        except OSError as e:
            _fail(str(e), 2)
    return records


@click.group(context_settings=CONTEXT)
def main():
    """Voxel building-game platform tools."""


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--out", type=click.Path(), help="directory for kept/rejected record sets")
@click.option("--repetition-threshold", default=ds.REPETITION_THRESHOLD, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def ingest(paths, out, repetition_threshold, as_json):
    """Load and clean record files, writing kept and rejected sets."""
    records = _load_corpus(paths)
    result = ds.clean(records, repetition_threshold=repetition_threshold)
    summary = {
        "loaded": len(records),
        "kept": len(result.kept),
        "rejected": [
            {"reason": r.reason.value, "detail": r.detail,
             "gameId": r.record.game_id, "stepId": r.record.step_id}
            for r in result.rejected
        ],
    }
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "kept.json").write_text(
            json.dumps([r.to_json() for r in result.kept], indent=2)
        )
        (out_dir / "rejected.json").write_text(json.dumps(summary["rejected"], indent=2))
    if as_json:
        click.echo(json.dumps(summary))
    else:
        click.echo(f"kept {summary['kept']} of {summary['loaded']} records")
        for r in summary["rejected"]:
            click.echo(f"  rejected game {r['gameId']} step {r['stepId']}: "
                       f"{r['reason']} ({r['detail']})")


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--out", type=click.Path(), help="directory for the report bundle")
@click.option("--json", "as_json", is_flag=True)
def stats(paths, out, as_json):
    """Corpus statistics over cleaned records (raw totals included)."""
    records = _load_corpus(paths)
    raw = ds.compute_stats(records)
    kept = ds.clean(records).kept
    cleaned = ds.compute_stats(kept)
    if as_json:
        click.echo(json.dumps({"cleaned": cleaned.to_json(), "raw": raw.to_json()}))
    else:
        click.echo(reports.stats_text(cleaned))
        click.echo(f"\n(raw corpus: {raw.instruction_count} instructions before cleaning)")
    if out:
        word_counts = [
            ds.word_count(r.command) for r in kept if isinstance(r, ds.ArchitectRecord)
        ]
        questions = [
            r.clarification_question for r in kept
            if isinstance(r, ds.BuilderRecord) and r.clarification_question
        ]
        categories = ds.category_counts(questions) if questions else None
        written = reports.write_stats_report(
            cleaned, out, instruction_word_counts=word_counts,
            question_categories=categories, raw_stats=raw,
        )
        click.echo(f"wrote {len(written)} report files to {out}", err=True)


@main.command()
@click.option("--initial", "initial_path", required=True, type=click.Path(exists=True))
@click.option("--final", "final_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--no-shift", is_flag=True, help="disable the translation search")
def score(initial_path, final_path, target_path, no_shift):
    """Grid F1 of a final grid against a target, given the shared initial."""
    g0 = _load_blocks(initial_path)
    g = _load_blocks(final_path)
    target = _load_blocks(target_path)
    report = grid_f1(g, g0, diff(g0, target), search_shifts=not no_shift)
    click.echo(json.dumps(report.to_json()))


@main.command(name="replay")
@click.argument("record_path", type=click.Path(exists=True))
@click.option("--initial", "initial_path", type=click.Path(exists=True),
              help="starting grid (blocks JSON); defaults to an empty world")
@click.option("--json", "as_json", is_flag=True)
def replay_record(record_path, initial_path, as_json):
    """Replay a builder record's tape and verify its recorded ending state."""
    try:
        records = ds.load_records(record_path, ds.BUILDER)
    except ds.SchemaError as e:
        _fail(str(e), 2)
    if not records:
        _fail(f"{record_path}: no records", 2)
    grid = _load_blocks(initial_path) if initial_path else BlockGrid()
    start = WorldState(grid=grid, avatar=Avatar(pos=(0.0, standing_height(grid, 0, 0), 0.0)))
    exit_code = 0
    for record in records:
        try:
            final = replay(record.tape, start)
        except (ParseError, ReplayDivergence) as e:
            _fail(str(e), 2)
        matched = final.grid == record.world_ending_state
        diff_cells = sorted(
            {tuple(b) for b in final.grid.to_blocks()}
            ^ {tuple(b) for b in record.world_ending_state.to_blocks()}
        )
        verdict = "VERIFIED" if matched else "MISMATCH"
        if as_json:
            click.echo(json.dumps({
                "gameId": record.game_id,
                "stepId": record.step_id,
                "verdict": verdict,
                "finalBlocks": final.grid.to_blocks(),
                "mismatchedCells": [list(c) for c in diff_cells],
            }))
        else:
            click.echo(f"game {record.game_id} step {record.step_id}: {verdict}")
            click.echo(f"final blocks: {final.grid.to_blocks()}")
            if not matched:
                click.echo(f"mismatched cells: {diff_cells}")
        if not matched:
            exit_code = 1
    sys.exit(exit_code)


@main.command(name="classify")
@click.argument("structures_path", type=click.Path(exists=True))
@click.option("--tall-threshold", default=4, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def classify_cmd(structures_path, tall_threshold, out, as_json):
    """Label target structures: flat/flying/diagonal/tricky/tall."""
    payload = _load_json(structures_path)
    entries = payload.get("structures") if isinstance(payload, dict) else payload
    labeled = []
    counts = {k: 0 for k in ("flat", "flying", "diagonal", "tricky", "tall")}
    for i, entry in enumerate(entries):
        structure_id = entry.get("structureId", f"s{i}")
        try:
            grid = BlockGrid.from_blocks(entry["blocks"])
            labels = classify(grid, tall_threshold=tall_threshold)
        except (EmptyStructure, RuleViolation, ValueError, KeyError) as e:
            _fail(f"structure {structure_id}: {e}", 2)
        names = labels.names()
        labeled.append({"structureId": structure_id, "labels": names})
        for name in names:
            counts[name] += 1
    if as_json:
        click.echo(json.dumps({"structures": labeled, "counts": counts}))
    else:
        for row in labeled:
            click.echo(f"{row['structureId']}: {{{', '.join(row['labels'])}}}")
        click.echo(reports.classify_summary_text(counts))
    if out:
        reports.write_classify_report(labeled, counts, out)


@main.command()
@click.argument("log_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def tally(log_path, out, as_json):
    """Aggregate comparison verdicts into the per-agent win/loss table."""
    path = Path(log_path)
    candidates = [path / "index" / "verdicts.csv", path / "verdicts.csv", path]
    rows = []
    for candidate in candidates:
        if candidate.is_file():
            if candidate.suffix == ".csv":
                import csv as csvmod

                with open(candidate, newline="") as f:
                    rows = list(csvmod.DictReader(f))
            else:
                rows = _load_json(str(candidate))
            break
    outcomes = []
    for row in rows:
        outcomes.append(GameOutcome(
            hit_id=row["hitId"], agent_a=row["agentA"], agent_b=row["agentB"],
            task_id=row["taskId"], winner=row["winner"],
        ))
    tallies = tally_human_eval(outcomes)
    if as_json:
        click.echo(json.dumps({k: t.to_json() for k, t in tallies.items()}))
    elif tallies:
        click.echo(reports.tally_text(tallies))
    else:
        click.echo("no verdicts found")
    if out:
        reports.write_tally_report(tallies, out)


@main.command()
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--server", "server_endpoint", required=True,
              help="game stream endpoint, host:port")
@click.option("--admin", "admin_endpoint", required=True, help="admin API base URL")
@click.option("--agent-id", default="agent", show_default=True)
@click.option("--episodes-per-task", default=2, show_default=True)
@click.option("--budget-minutes", default=60.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--parallel", default=1, show_default=True)
@click.option("--no-shift", is_flag=True)
@click.option("--label", default=None, help="leaderboard row name")
@click.option("--out", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def evaluate(tasks_path, server_endpoint, admin_endpoint, agent_id, episodes_per_task,
             budget_minutes, seed, parallel, no_shift, label, out, as_json):
    """Drive a connected agent over a task set and emit the leaderboard row."""
    config = EvalRunConfig(
        task_set_path=tasks_path,
        agent_endpoint=server_endpoint,
        admin_endpoint=admin_endpoint,
        agent_id=agent_id,
        episodes_per_task=episodes_per_task,
        time_budget_minutes=budget_minutes,
        seed=seed,
        parallel=parallel,
        no_shift=no_shift,
        label=label,
    )
    try:
        row = asyncio.run(run_evaluation(config))
    except AgentUnreachable as e:
        _fail(str(e), 1)
    except OSError as e:
        _fail(str(e), 2)
    if as_json:
        click.echo(json.dumps(row))
    else:
        click.echo(reports.leaderboard_text([row]))
    if out:
        reports.write_leaderboard_report(row, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--host", default=None)
@click.option("--game-port", type=int, default=None)
@click.option("--http-port", type=int, default=None)
@click.option("--storage-root", type=click.Path(), default=None)
@click.option("--step-budget", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--static-dir", type=click.Path(), default=None)
def serve(config_path, host, game_port, http_port, storage_root, step_budget, seed,
          static_dir):
    """Start the game server (stream endpoint + admin HTTP/WS)."""
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as e:
        _fail(str(e), 2)
    overrides = {
        "host": host, "game_port": game_port, "http_port": http_port,
        "storage_root": storage_root, "step_budget": step_budget, "seed": seed,
        "static_dir": static_dir,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    try:
        asyncio.run(_serve(config))
    except OSError as e:
        _fail(f"cannot bind: {e}", 2)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        pass


async def _serve(config: ServerConfig):
    from .server.net import GameServer
    from .server.service import GameService
    from .server.storage import FileStorage

    service = GameService(
        FileStorage(config.storage_root),
        step_budget=config.step_budget,
        session_minutes=config.session_minutes,
        lease_minutes=config.lease_minutes,
        seed=config.seed,
    )
    server = GameServer(
        service,
        host=config.host,
        game_port=config.game_port,
        http_port=config.http_port,
        static_dir=config.static_dir,
        heartbeat_seconds=config.heartbeat_seconds,
        sweep_seconds=config.sweep_seconds,
    )
    await server.start()
    endpoints = server.endpoints
    click.echo("blockworld server listening")
    click.echo(f"  game stream : {endpoints['game']}")
    click.echo(f"  admin http  : {endpoints['http']}")
    click.echo(f"  websocket   : {endpoints['ws']}")
    click.echo(f"  storage     : {config.storage_root}")
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, stop.set)
    await stop.wait()
    click.echo("draining: sealing live sessions", err=True)
    await server.stop()


if __name__ == "__main__":
    main()
