"""Report rendering: aligned text tables, delimited files, and figures.

Every CLI report path writes the same content three ways into --out:
machine JSON, CSV, and a plain-text table, plus PNG figures rendered with
matplotlib's Agg backend.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .dataset import DatasetStats
from .metrics import AgentTally


def _two_column(rows: list[tuple[str, object]]) -> str:
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


def stats_text(stats: DatasetStats) -> str:
    rows = [
        ("Target Structures", stats.target_structures),
        ("Completed Games", stats.completed_games),
        ("Median Dur of Completed Games", f"{stats.median_game_duration_minutes:.0f} mins"),
        ("Avg. Turns of Completed Games", f"{stats.avg_turns_per_game:.1f}"),
        ("No. Instructions", stats.instruction_count),
        ("Avg. Len of Instructions", f"{stats.avg_instruction_words:.2f} words"),
        ("No. Clarifying Questions", stats.clarifying_question_count),
        ("Avg. Clarifying Questions per Game", f"{stats.avg_questions_per_game:.2f}"),
        ("Clear Instructions", stats.clear_count),
        ("Ambiguous Instructions", stats.ambiguous_count),
        ("Avg. Len of Clarifying Questions", f"{stats.avg_question_words:.2f} words"),
    ]
    for name, bucket in sorted(stats.split.items()):
        rows.append((f"Instructions ({name})",
                     f"{bucket.instructions} ({bucket.clear} clear / {bucket.ambiguous} ambiguous)"))
    return _two_column(rows)


LEADERBOARD_COLUMNS = ("Approach", "F1", "Precision", "Recall", "Ep. Length")


def leaderboard_text(rows: list[dict]) -> str:
    table = [LEADERBOARD_COLUMNS]
    for row in rows:
        table.append((
            str(row["agent"]),
            f"{row['f1']:.3f}",
            f"{row['precision']:.3f}",
            f"{row['recall']:.3f}",
            f"{row['episodeLength']:.0f}",
        ))
    widths = [max(len(r[i]) for r in table) for i in range(len(LEADERBOARD_COLUMNS))]
    lines = ["  ".join(f"{cell:<{w}}" for cell, w in zip(r, widths)).rstrip() for r in table]
    return "\n".join(lines)


def tally_text(tallies: dict[str, AgentTally]) -> str:
    lines = ["Agent  Total Games  Total Wins  Total Losses  Wins Against  Losses Against"]
    for agent, tally in tallies.items():
        t = tally.to_json()
        wins_against = "; ".join(
            f"{opp}: {cell['count']} ({cell['pct']}%)" for opp, cell in t["winsAgainst"].items()
        )
        losses_against = "; ".join(
            f"{opp}: {cell['count']} ({cell['pct']}%)" for opp, cell in t["lossesAgainst"].items()
        )
        lines.append(
            f"{agent}  {t['totalGames']}  {t['totalWins']} ({t['winPct']}%)  "
            f"{t['totalLosses']} ({t['lossPct']}%)  {wins_against}  {losses_against}"
        )
    return "\n".join(lines)


def classify_summary_text(counts: dict[str, int]) -> str:
    order = ("flat", "flying", "diagonal", "tricky", "tall")
    return " ".join(f"{label} [{counts.get(label, 0)}]" for label in order)


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})


def _save_fig(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def write_stats_report(
    stats: DatasetStats,
    out_dir: str | Path,
    instruction_word_counts: list[int] | None = None,
    question_categories: dict[str, int] | None = None,
    raw_stats: DatasetStats | None = None,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = {"cleaned": stats.to_json()}
    if raw_stats is not None:
        payload["raw"] = raw_stats.to_json()
    path = out / "stats.json"
    path.write_text(json.dumps(payload, indent=2))
    written.append(path)

    path = out / "stats.txt"
    path.write_text(stats_text(stats) + "\n")
    written.append(path)

    flat = stats.to_json()
    split = flat.pop("split")
    for name, bucket in split.items():
        for key, value in bucket.items():
            flat[f"split_{name}_{key}"] = value
    path = out / "stats.csv"
    _write_csv(path, [flat], list(flat.keys()))
    written.append(path)

    if instruction_word_counts:
        fig, ax = plt.subplots(figsize=(6, 4))
        top = max(instruction_word_counts)
        ax.hist(instruction_word_counts, bins=range(0, top + 2), color="#4878a8",
                edgecolor="white")
        ax.set_xlabel("instruction length (words)")
        ax.set_ylabel("instructions")
        path = out / "instruction_lengths.png"
        _save_fig(fig, path)
        written.append(path)

    if question_categories:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = list(question_categories.keys())
        ax.bar(labels, [question_categories[k] for k in labels], color="#6aa36a")
        ax.set_ylabel("clarifying questions")
        ax.tick_params(axis="x", rotation=30)
        path = out / "question_categories.png"
        _save_fig(fig, path)
        written.append(path)
    return written


def write_leaderboard_report(row: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "leaderboard.json"
    path.write_text(json.dumps(row, indent=2))
    written.append(path)

    path = out / "leaderboard.txt"
    path.write_text(leaderboard_text([row]) + "\n")
    written.append(path)

    episodes = row.get("episodes", [])
    columns = ["taskId", "episode", "targetSize", "ran", "f1", "precision", "recall",
               "intersection", "episodeLength", "note"]
    path = out / "episodes.csv"
    _write_csv(path, episodes, columns)
    written.append(path)

    if episodes:
        fig, ax = plt.subplots(figsize=(7, 4))
        labels = [f"{e['taskId']}#{e['episode']}" for e in episodes]
        ax.bar(labels, [e["f1"] for e in episodes], color="#4878a8")
        ax.set_ylabel("episode F1")
        ax.set_ylim(0, 1.05)
        ax.tick_params(axis="x", rotation=60, labelsize=7)
        path = out / "episode_f1.png"
        _save_fig(fig, path)
        written.append(path)
    return written


def write_tally_report(tallies: dict[str, AgentTally], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "tally.json"
    path.write_text(json.dumps({k: t.to_json() for k, t in tallies.items()}, indent=2))
    written.append(path)

    path = out / "tally.txt"
    path.write_text(tally_text(tallies) + "\n")
    written.append(path)

    rows = []
    for tally in tallies.values():
        t = tally.to_json()
        rows.append({
            "agent": t["agent"], "totalGames": t["totalGames"],
            "totalWins": t["totalWins"], "totalLosses": t["totalLosses"],
            "winPct": t["winPct"], "lossPct": t["lossPct"],
        })
    path = out / "tally.csv"
    _write_csv(path, rows, ["agent", "totalGames", "totalWins", "totalLosses",
                            "winPct", "lossPct"])
    written.append(path)

    if tallies:
        fig, ax = plt.subplots(figsize=(6, 4))
        agents = list(tallies.keys())
        wins = [tallies[a].wins for a in agents]
        losses = [tallies[a].losses for a in agents]
        ax.bar(agents, wins, label="wins", color="#6aa36a")
        ax.bar(agents, losses, bottom=wins, label="losses", color="#b35959")
        ax.set_ylabel("games")
        ax.legend()
        path = out / "tally.png"
        _save_fig(fig, path)
        written.append(path)
    return written


def write_classify_report(labels: list[dict], counts: dict[str, int],
                          out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "labels.json"
    path.write_text(json.dumps({"structures": labels, "counts": counts}, indent=2))
    written.append(path)
    path = out / "labels.csv"
    _write_csv(path, labels, ["structureId", "labels"])
    written.append(path)
    if counts:
        fig, ax = plt.subplots(figsize=(6, 4))
        keys = ["flat", "flying", "diagonal", "tricky", "tall"]
        ax.bar(keys, [counts.get(k, 0) for k in keys], color="#8a7ab8")
        ax.set_ylabel("structures")
        path = out / "label_counts.png"
        _save_fig(fig, path)
        written.append(path)
    return written
