"""Campaign and project data model, CSV/JSON ingestion, and the run store.

A campaign lives on disk as a directory with two files:

* ``projects.csv`` — one row per consolidated project with columns
  ``id, title, description, category, cost, district[, votes]``.
  Costs are integers in minor currency units (cents, grosze).
* ``meta.json`` — campaign header: city, year, currency, budget, voters,
  total_votes, max_approvals, language.

Prediction runs are stored append-only as line-delimited JSON, one file
per (campaign, model, timestamp).
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence


class DataError(Exception):
    """Base class for data-layer failures."""


class SchemaError(DataError):
    """A required column or metadata field is missing or malformed."""


class RowError(DataError):
    """A specific CSV row failed to parse; carries the 1-based row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class CampaignError(DataError):
    """Campaign-level invariant violated hard enough to refuse loading."""


class RunStoreError(DataError):
    """A persisted prediction run is unreadable or corrupt."""


REQUIRED_COLUMNS = ("id", "title", "description", "category", "cost", "district")
VOTES_COLUMN = "votes"


@dataclass(frozen=True)
class Project:
    """One consolidated PB proposal. ``votes`` is None for drafts."""

    id: str
    title: str
    description: str
    category: str
    cost: int
    district: str
    votes: Optional[int] = None


@dataclass(frozen=True)
class Campaign:
    """A city-year PB election with its consolidated project list.

    ``language`` tags the text of titles/descriptions and drives prompt
    language; ``variant`` distinguishes translated re-releases of the same
    election (empty for the original) and feeds into the campaign key.
    """

    city: str
    year: int
    currency: str
    budget: int
    voters: int
    total_votes: int
    max_approvals: int
    language: str
    projects: tuple[Project, ...]
    variant: str = ""

    def __post_init__(self):
        if not self.projects:
            raise CampaignError("campaign has no projects")

    @property
    def key(self) -> str:
        """Stable identifier, e.g. ``toulouse-2024`` or ``toulouse-2024-en``."""
        slug = re.sub(r"[^a-z0-9]+", "-", self.city.lower()).strip("-")
        base = f"{slug}-{self.year}"
        return f"{base}-{self.variant}" if self.variant else base

    def project(self, project_id: str) -> Project:
        for p in self.projects:
            if p.id == project_id:
                return p
        raise KeyError(project_id)

    def vote_counts(self) -> list[int]:
        """Ground-truth votes in project order; raises if any are absent."""
        counts = []
        for p in self.projects:
            if p.votes is None:
                raise CampaignError(f"project {p.id} has no recorded votes")
            counts.append(p.votes)
        return counts


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    project_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class PredictionRecord:
    """Per-project prediction; ``predicted_votes`` is None for parse gaps."""

    project_id: str
    predicted_votes: Optional[float]
    prompt: Optional[str] = None
    response: Optional[str] = None

    def __post_init__(self):
        if self.predicted_votes is not None and self.predicted_votes < 0:
            raise ValueError(f"negative prediction for {self.project_id}")


@dataclass(frozen=True)
class PredictionRun:
    """All per-project predictions from one model over one campaign."""

    campaign_key: str
    campaign_city: str
    campaign_year: int
    language: str
    model: str
    records: tuple[PredictionRecord, ...]
    config: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def gap_count(self) -> int:
        return sum(1 for r in self.records if r.predicted_votes is None)

    @property
    def gap_fraction(self) -> float:
        return self.gap_count / len(self.records) if self.records else 0.0

    def predictions_for(self, campaign: Campaign) -> list[Optional[float]]:
        """Predicted votes aligned to campaign project order.

        Raises CampaignError unless the run covers exactly the campaign's
        projects, one record each.
        """
        by_id = {}
        for r in self.records:
            if r.project_id in by_id:
                raise CampaignError(f"duplicate record for project {r.project_id}")
            by_id[r.project_id] = r.predicted_votes
        missing = [p.id for p in campaign.projects if p.id not in by_id]
        extra = set(by_id) - {p.id for p in campaign.projects}
        if missing or extra:
            raise CampaignError(
                f"run does not match campaign (missing={missing[:5]}, extra={sorted(extra)[:5]})"
            )
        return [by_id[p.id] for p in campaign.projects]


def _clean_cell(value: Optional[str]) -> str:
    return (value or "").strip()


def _parse_int(raw: str, what: str, row: int) -> int:
    text = raw.replace(" ", "").replace(" ", "").replace(",", "")
    try:
        return int(text)
    except ValueError:
        raise RowError(row, f"unparseable {what}: {raw!r}") from None


def load_campaign(path: Path | str, meta: dict) -> Campaign:
    """Load and validate a campaign from a project CSV plus a header dict.

    Column order is insensitive and cell whitespace is trimmed.  Raises
    SchemaError for missing columns, RowError (with the 1-based data row
    index) for unparseable numbers, CampaignError for duplicate ids or an
    empty table.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header row")
        fields = [f.strip() for f in reader.fieldnames]
        for col in REQUIRED_COLUMNS:
            if col not in fields:
                raise SchemaError(f"{path}: missing required column {col!r}")
        has_votes = VOTES_COLUMN in fields
        projects = []
        seen: dict[str, int] = {}
        for i, raw_row in enumerate(reader, start=1):
            row = {(k or "").strip(): _clean_cell(v) for k, v in raw_row.items()}
            pid = row["id"]
            if not pid:
                raise RowError(i, "empty project id")
            if pid in seen:
                raise CampaignError(
                    f"duplicate project id {pid!r} (rows {seen[pid]} and {i})"
                )
            seen[pid] = i
            cost = _parse_int(row["cost"], "cost", i)
            votes: Optional[int] = None
            if has_votes and row.get(VOTES_COLUMN, "") != "":
                votes = _parse_int(row[VOTES_COLUMN], "votes", i)
            projects.append(
                Project(
                    id=pid,
                    title=row["title"],
                    description=row["description"],
                    category=row["category"],
                    cost=cost,
                    district=row["district"],
                    votes=votes,
                )
            )
    if not projects:
        raise CampaignError(f"{path}: no project rows")
    try:
        header = {
            "city": str(meta["city"]),
            "year": int(meta["year"]),
            "currency": str(meta["currency"]),
            "budget": int(meta["budget"]),
            "voters": int(meta["voters"]),
            "total_votes": int(meta["total_votes"]),
            "max_approvals": int(meta["max_approvals"]),
            "language": str(meta.get("language", "")),
            "variant": str(meta.get("variant", "")),
        }
    except KeyError as exc:
        raise SchemaError(f"campaign metadata missing field {exc.args[0]!r}") from None
    return Campaign(projects=tuple(projects), **header)


def load_campaign_dir(directory: Path | str) -> Campaign:
    """Load ``projects.csv`` + ``meta.json`` from a campaign directory."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise SchemaError(f"{directory}: missing meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return load_campaign(directory / "projects.csv", meta)


def write_campaign(campaign: Campaign, directory: Path | str) -> Path:
    """Persist a campaign as projects.csv + meta.json (load round-trips)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "city": campaign.city,
        "year": campaign.year,
        "currency": campaign.currency,
        "budget": campaign.budget,
        "voters": campaign.voters,
        "total_votes": campaign.total_votes,
        "max_approvals": campaign.max_approvals,
        "language": campaign.language,
    }
    if campaign.variant:
        meta["variant"] = campaign.variant
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    columns = list(REQUIRED_COLUMNS) + [VOTES_COLUMN]
    with (directory / "projects.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for p in campaign.projects:
            writer.writerow(
                [
                    p.id,
                    p.title,
                    p.description,
                    p.category,
                    p.cost,
                    p.district,
                    "" if p.votes is None else p.votes,
                ]
            )
    return directory


def validate_campaign(campaign: Campaign) -> ValidationReport:
    """Check every campaign/project invariant; returns a report, never raises.

    Draft projects (votes absent) are skipped by the vote checks.
    """
    violations: list[Violation] = []
    id_counts = Counter(p.id for p in campaign.projects)
    for pid, n in sorted(id_counts.items()):
        if n > 1:
            violations.append(
                Violation("duplicate-id", f"project id {pid!r} appears {n} times", (pid,))
            )
    for p in campaign.projects:
        if p.cost <= 0:
            violations.append(
                Violation("nonpositive-cost", f"project {p.id} has cost {p.cost}", (p.id,))
            )
        if p.votes is not None:
            if p.votes < 0:
                violations.append(
                    Violation("negative-votes", f"project {p.id} has votes {p.votes}", (p.id,))
                )
            elif p.votes > campaign.voters:
                violations.append(
                    Violation(
                        "votes-exceed-voters",
                        f"project {p.id} has {p.votes} votes > {campaign.voters} voters",
                        (p.id,),
                    )
                )
    if campaign.total_votes > campaign.voters * campaign.max_approvals:
        violations.append(
            Violation(
                "total-votes-exceed-ballot-capacity",
                f"total_votes {campaign.total_votes} > voters x max_approvals "
                f"{campaign.voters * campaign.max_approvals}",
            )
        )
    with_votes = [p for p in campaign.projects if p.votes is not None]
    if len(with_votes) == len(campaign.projects):
        total = sum(p.votes for p in with_votes)
        if total != campaign.total_votes:
            violations.append(
                Violation(
                    "vote-sum-mismatch",
                    f"per-project votes sum to {total}, metadata says {campaign.total_votes}",
                )
            )
    return ValidationReport(tuple(violations))


# --- Pabulib import -------------------------------------------------------

def load_pabulib(path: Path | str, overrides: Optional[dict] = None) -> Campaign:
    """Load a Pabulib ``.pb`` file, aggregating approval ballots per project.

    Only aggregate counts are kept; individual ballots are discarded after
    counting.  ``overrides`` may replace any metadata field (e.g. language).
    """
    path = Path(path)
    sections: dict[str, list[list[str]]] = {}
    current: Optional[str] = None
    for line in path.read_text(encoding="utf-8").splitlines():
        stripped = line.strip("﻿").rstrip("\n")
        if not stripped.strip():
            continue
        if stripped.strip().upper() in ("META", "PROJECTS", "VOTES"):
            current = stripped.strip().upper()
            sections[current] = []
            continue
        if current is None:
            raise SchemaError(f"{path}: content before any section header")
        sections[current].append(stripped.split(";"))
    for needed in ("META", "PROJECTS", "VOTES"):
        if needed not in sections or not sections[needed]:
            raise SchemaError(f"{path}: missing {needed} section")

    meta_rows = sections["META"]
    if [c.lower() for c in meta_rows[0][:2]] == ["key", "value"]:
        meta_rows = meta_rows[1:]
    meta = {row[0].strip(): row[1].strip() for row in meta_rows if len(row) >= 2}

    proj_header = [c.strip().lower() for c in sections["PROJECTS"][0]]
    if "project_id" not in proj_header or "cost" not in proj_header:
        raise SchemaError(f"{path}: PROJECTS needs project_id and cost columns")

    def cell(row: list[str], col: str) -> str:
        if col in proj_header and proj_header.index(col) < len(row):
            return row[proj_header.index(col)].strip()
        return ""

    vote_header = [c.strip().lower() for c in sections["VOTES"][0]]
    if "vote" not in vote_header:
        raise SchemaError(f"{path}: VOTES needs a vote column")
    vote_idx = vote_header.index("vote")
    approvals: Counter[str] = Counter()
    n_ballots = 0
    for i, row in enumerate(sections["VOTES"][1:], start=1):
        if vote_idx >= len(row):
            raise RowError(i, "vote row too short")
        n_ballots += 1
        for pid in row[vote_idx].split(","):
            pid = pid.strip()
            if pid:
                approvals[pid] += 1

    projects = []
    for i, row in enumerate(sections["PROJECTS"][1:], start=1):
        pid = cell(row, "project_id")
        if not pid:
            raise RowError(i, "empty project_id")
        cost_raw = cell(row, "cost")
        try:
            cost_minor = int(round(float(cost_raw.replace(",", ".")) * 100))
        except ValueError:
            raise RowError(i, f"unparseable cost: {cost_raw!r}") from None
        projects.append(
            Project(
                id=pid,
                title=cell(row, "name") or cell(row, "title") or pid,
                description=cell(row, "description"),
                category=cell(row, "category") or "other",
                cost=cost_minor,
                district=cell(row, "district") or cell(row, "target") or "citywide",
                votes=approvals.get(pid, 0),
            )
        )
    if not projects:
        raise CampaignError(f"{path}: no projects")

    header = {
        "city": meta.get("unit", meta.get("country", "unknown")),
        "year": int(meta.get("instance", meta.get("date_begin", "0")[:4] or 0)),
        "currency": meta.get("currency", "PLN"),
        "budget": int(round(float(meta.get("budget", "0").replace(",", ".")) * 100)),
        "voters": n_ballots,
        "total_votes": sum(approvals.values()),
        "max_approvals": int(meta.get("max_length", 3)),
        "language": meta.get("language", "pl"),
    }
    if overrides:
        header.update(overrides)
    return Campaign(projects=tuple(projects), **header)


# --- Run store ------------------------------------------------------------

def _canon_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def run_to_lines(run: PredictionRun) -> list[str]:
    """Serialize a run to its line-delimited JSON form (header + records)."""
    header = {
        "kind": "pbcast-run",
        "campaign": {
            "key": run.campaign_key,
            "city": run.campaign_city,
            "year": run.campaign_year,
            "language": run.language,
        },
        "model": run.model,
        "config": run.config,
        "timestamp": run.timestamp,
    }
    lines = [_canon_json(header)]
    for r in run.records:
        rec = {"project_id": r.project_id, "predicted_votes": r.predicted_votes}
        if r.prompt is not None:
            rec["prompt"] = r.prompt
        if r.response is not None:
            rec["response"] = r.response
        lines.append(_canon_json(rec))
    return lines


def run_from_lines(lines: Sequence[str], source: str = "<memory>") -> PredictionRun:
    if not lines:
        raise RunStoreError(f"{source}: empty run file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise RunStoreError(f"{source}: bad header line: {exc}") from None
    if not isinstance(header, dict) or header.get("kind") != "pbcast-run":
        raise RunStoreError(f"{source}: not a run file (missing pbcast-run header)")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RunStoreError(f"{source}: line {i}: {exc}") from None
        try:
            records.append(
                PredictionRecord(
                    project_id=rec["project_id"],
                    predicted_votes=rec["predicted_votes"],
                    prompt=rec.get("prompt"),
                    response=rec.get("response"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RunStoreError(f"{source}: line {i}: bad record ({exc})") from None
    try:
        campaign = header["campaign"]
        return PredictionRun(
            campaign_key=campaign["key"],
            campaign_city=campaign["city"],
            campaign_year=int(campaign["year"]),
            language=campaign.get("language", ""),
            model=header["model"],
            records=tuple(records),
            config=header.get("config", {}),
            timestamp=header.get("timestamp", ""),
        )
    except (KeyError, TypeError) as exc:
        raise RunStoreError(f"{source}: bad header ({exc})") from None


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S.%fZ")


class RunStore:
    """Append-only store of prediction runs under one directory.

    Files are keyed ``<campaign>/<model>-<timestamp>[.N].jsonl``; saving
    never overwrites, so repeated saves of the same model yield distinct
    entries.  Writers must be serialized externally; concurrent readers
    are safe.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def save(self, run: PredictionRun) -> Path:
        if not run.timestamp:
            run = replace(run, timestamp=utc_timestamp())
        folder = self.root / run.campaign_key
        folder.mkdir(parents=True, exist_ok=True)
        stem = f"{run.model.lower()}-{run.timestamp.replace(':', '')}"
        path = folder / f"{stem}.jsonl"
        bump = 0
        while path.exists():
            bump += 1
            path = folder / f"{stem}.{bump}.jsonl"
        tmp = path.with_suffix(".tmp")
        tmp.write_text("\n".join(run_to_lines(run)) + "\n", encoding="utf-8")
        tmp.rename(path)
        return path

    def load(self, path: Path | str) -> PredictionRun:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if text and not text.endswith("\n"):
            raise RunStoreError(f"{path}: truncated file (no trailing newline)")
        lines = text.splitlines()
        return run_from_lines(lines, source=str(path))

    def list_runs(self, campaign_key: Optional[str] = None) -> list[Path]:
        base = self.root / campaign_key if campaign_key else self.root
        if not base.exists():
            return []
        return sorted(base.rglob("*.jsonl"))

    def latest(self, campaign_key: str, model: str) -> Optional[PredictionRun]:
        candidates = [
            p
            for p in self.list_runs(campaign_key)
            if p.name.startswith(f"{model.lower()}-")
        ]
        if not candidates:
            return None
        return self.load(sorted(candidates)[-1])


def discover_campaigns(root: Path | str) -> dict[str, Campaign]:
    """Load every campaign directory under ``root``, keyed by campaign key."""
    campaigns = {}
    for child in sorted(Path(root).iterdir()):
        if child.is_dir() and (child / "meta.json").exists():
            campaign = load_campaign_dir(child)
            campaigns[campaign.key] = campaign
    return campaigns
