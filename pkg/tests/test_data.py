"""Data model, CSV/metadata ingestion, validation, pabulib, run store."""

import json
from dataclasses import replace

import pytest

from pbcast.data import (
    Campaign,
    CampaignError,
    PredictionRecord,
    PredictionRun,
    Project,
    RowError,
    RunStore,
    RunStoreError,
    SchemaError,
    load_campaign,
    load_campaign_dir,
    load_pabulib,
    run_from_lines,
    run_to_lines,
    validate_campaign,
    write_campaign,
)

from conftest import make_campaign, make_project

META = {
    "city": "Testville",
    "year": 2030,
    "currency": "EUR",
    "budget": 50000,
    "voters": 1000,
    "total_votes": 90,
    "max_approvals": 3,
    "language": "en",
}


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoadCampaign:
    def test_basic_load_and_trimming(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district", "votes"],
            [["a", "  Title A ", "desc a", " parks", "1200", "north ", " 60"],
             ["b", "Title B", "desc b", "roads", "800", "south", "30"]],
        )
        campaign = load_campaign(path, META)
        assert [p.id for p in campaign.projects] == ["a", "b"]
        assert campaign.projects[0].title == "Title A"
        assert campaign.projects[0].category == "parks"
        assert campaign.projects[0].district == "north"
        assert campaign.projects[0].votes == 60
        assert campaign.projects[0].cost == 1200

    def test_column_order_insensitive(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["votes", "district", "cost", "category", "description", "title", "id"],
            [["5", "north", "100", "parks", "d", "t", "x"]],
        )
        campaign = load_campaign(path, META)
        assert campaign.projects[0].id == "x"
        assert campaign.projects[0].votes == 5

    def test_missing_column_names_it(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "district"],
            [["a", "t", "d", "c", "n"]],
        )
        with pytest.raises(SchemaError, match="cost"):
            load_campaign(path, META)

    def test_unparseable_cost_carries_row_index(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district"],
            [["a", "t", "d", "c", "100", "n"], ["b", "t", "d", "c", "12x0", "n"]],
        )
        with pytest.raises(RowError, match="row 2") as err:
            load_campaign(path, META)
        assert err.value.row == 2

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district"],
            [["a", "t", "d", "c", "100", "n"], ["a", "t2", "d2", "c", "200", "n"]],
        )
        with pytest.raises(CampaignError, match="duplicate project id"):
            load_campaign(path, META)

    def test_empty_table_is_an_error_not_empty_campaign(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district"],
            [],
        )
        with pytest.raises(CampaignError, match="no project rows"):
            load_campaign(path, META)

    def test_missing_votes_cell_means_draft(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district", "votes"],
            [["a", "t", "d", "c", "100", "n", ""]],
        )
        campaign = load_campaign(path, META)
        assert campaign.projects[0].votes is None

    def test_missing_meta_field(self, tmp_path):
        path = write_csv(
            tmp_path / "projects.csv",
            ["id", "title", "description", "category", "cost", "district"],
            [["a", "t", "d", "c", "100", "n"]],
        )
        broken = {k: v for k, v in META.items() if k != "voters"}
        with pytest.raises(SchemaError, match="voters"):
            load_campaign(path, broken)


class TestRoundTrip:
    def test_write_then_load_is_identity(self, tmp_path):
        campaign = make_campaign([30, 20, 10], voters=100, total_votes=60)
        write_campaign(campaign, tmp_path / "c")
        again = load_campaign_dir(tmp_path / "c")
        assert again == campaign

    def test_bundled_campaign_round_trips(self, tmp_path, campaigns):
        original = campaigns["wroclaw-2016"]
        write_campaign(original, tmp_path / "w")
        assert load_campaign_dir(tmp_path / "w") == original


class TestValidate:
    def test_clean_bundled_campaigns(self, campaigns):
        for key, campaign in campaigns.items():
            report = validate_campaign(campaign)
            assert report.clean, (key, report)

    def test_votes_exceeding_voters_flagged(self):
        campaign = make_campaign([101, 5], voters=100, total_votes=106)
        report = validate_campaign(campaign)
        assert "votes-exceed-voters" in report.codes()

    def test_duplicate_ids_flagged(self):
        p = make_project(0, votes=5)
        campaign = make_campaign([5, 5])
        campaign = replace(campaign, projects=(p, p), total_votes=10, voters=100)
        report = validate_campaign(campaign)
        assert "duplicate-id" in report.codes()
        dup = [v for v in report.violations if v.code == "duplicate-id"][0]
        assert dup.project_ids == (p.id,)

    def test_vote_sum_mismatch(self):
        campaign = make_campaign([10, 10], total_votes=25, voters=100)
        assert "vote-sum-mismatch" in validate_campaign(campaign).codes()

    def test_draft_projects_skip_vote_checks(self):
        campaign = make_campaign([10, None], total_votes=10, voters=100)
        assert validate_campaign(campaign).clean

    def test_nonpositive_cost_flagged(self):
        bad = make_project(0, votes=5, cost=0)
        campaign = make_campaign([5])
        campaign = replace(campaign, projects=(bad,), total_votes=5, voters=10)
        assert "nonpositive-cost" in validate_campaign(campaign).codes()

    def test_ballot_capacity(self):
        campaign = make_campaign([40, 40], voters=20, total_votes=80, max_approvals=3)
        assert "total-votes-exceed-ballot-capacity" in validate_campaign(campaign).codes()

    def test_pure_same_input_same_report(self):
        campaign = make_campaign([101, 5], voters=100, total_votes=106)
        assert validate_campaign(campaign) == validate_campaign(campaign)

    def test_empty_campaign_impossible(self):
        with pytest.raises(CampaignError):
            make_campaign([])


def make_run(campaign, values, model="KNN", **kwargs):
    records = tuple(
        PredictionRecord(project_id=p.id, predicted_votes=v)
        for p, v in zip(campaign.projects, values)
    )
    return PredictionRun(
        campaign_key=campaign.key,
        campaign_city=campaign.city,
        campaign_year=campaign.year,
        language=campaign.language,
        model=model,
        records=records,
        config={"k": 5},
        **kwargs,
    )


class TestRunStore:
    def test_save_load_round_trip(self, tmp_path):
        campaign = make_campaign([30, 20, 10])
        run = make_run(campaign, [28.5, 22.0, 9.0])
        run = replace(
            run,
            records=run.records[:1]
            + (replace(run.records[1], prompt="ask", response="say\nPREDICTION: 22"),)
            + run.records[2:],
        )
        store = RunStore(tmp_path)
        path = store.save(run)
        loaded = store.load(path)
        assert loaded.records == run.records
        assert loaded.model == run.model
        assert loaded.config == run.config
        assert loaded.campaign_key == campaign.key

    def test_negative_prediction_rejected(self):
        with pytest.raises(ValueError):
            PredictionRecord(project_id="x", predicted_votes=-1.0)

    def test_truncated_file_is_a_parse_error(self, tmp_path):
        campaign = make_campaign([30, 20])
        store = RunStore(tmp_path)
        path = store.save(make_run(campaign, [1.0, 2.0]))
        blob = path.read_text()
        path.write_text(blob[: len(blob) // 2])
        with pytest.raises(RunStoreError):
            store.load(path)

    def test_corrupt_json_line(self, tmp_path):
        campaign = make_campaign([30, 20])
        store = RunStore(tmp_path)
        path = store.save(make_run(campaign, [1.0, 2.0]))
        lines = path.read_text().splitlines()
        lines[1] = "{not json"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(RunStoreError, match="line 2"):
            store.load(path)

    def test_two_saves_yield_distinct_entries(self, tmp_path):
        campaign = make_campaign([30, 20])
        run = make_run(campaign, [1.0, 2.0], timestamp="20300101T000000.000000Z")
        store = RunStore(tmp_path)
        p1 = store.save(run)
        p2 = store.save(run)
        assert p1 != p2
        assert p1.read_text() == p2.read_text()

    def test_latest_picks_newest(self, tmp_path):
        campaign = make_campaign([30, 20])
        store = RunStore(tmp_path)
        store.save(make_run(campaign, [1.0, 1.0], timestamp="20300101T000000.000000Z"))
        store.save(make_run(campaign, [2.0, 2.0], timestamp="20300102T000000.000000Z"))
        latest = store.latest(campaign.key, "KNN")
        assert latest.records[0].predicted_votes == 2.0

    def test_predictions_for_requires_exact_cover(self):
        campaign = make_campaign([30, 20, 10])
        run = make_run(campaign, [1.0, 2.0, 3.0])
        assert run.predictions_for(campaign) == [1.0, 2.0, 3.0]
        short = replace(run, records=run.records[:2])
        with pytest.raises(CampaignError):
            short.predictions_for(campaign)

    def test_round_trip_via_lines_preserves_unicode(self):
        campaign = make_campaign([3])
        run = make_run(campaign, [1.0])
        run = replace(
            run,
            records=(replace(run.records[0], prompt="prédire ça", response="voilà"),),
        )
        assert run_from_lines(run_to_lines(run)) == run


PB_TEXT = """META
key;value
description;District PB
country;Poland
unit;Wroclaw
instance;2016
num_projects;3
budget;1000000
max_length;3
PROJECTS
project_id;cost;name;category;target
p1;50000;Playground at the park;Sport;Krzyki
p2;20000;Street trees;Greenery;Fabryczna
p3;30000;Bike racks;Transport;Krzyki
VOTES
voter_id;age;vote
v1;33;p1,p2
v2;41;p1
v3;28;p2,p3,p1
v4;55;p3
"""


class TestPabulib:
    def test_aggregates_ballots(self, tmp_path):
        path = tmp_path / "wroclaw.pb"
        path.write_text(PB_TEXT, encoding="utf-8")
        campaign = load_pabulib(path)
        by_id = {p.id: p for p in campaign.projects}
        assert by_id["p1"].votes == 3
        assert by_id["p2"].votes == 2
        assert by_id["p3"].votes == 2
        assert campaign.voters == 4
        assert campaign.total_votes == 7
        assert campaign.city == "Wroclaw"
        assert campaign.year == 2016
        assert campaign.budget == 1000000 * 100
        assert by_id["p1"].cost == 50000 * 100
        assert by_id["p1"].district == "Krzyki"

    def test_missing_section(self, tmp_path):
        path = tmp_path / "bad.pb"
        path.write_text("META\nkey;value\nunit;X\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="PROJECTS"):
            load_pabulib(path)

    def test_overrides(self, tmp_path):
        path = tmp_path / "wroclaw.pb"
        path.write_text(PB_TEXT, encoding="utf-8")
        campaign = load_pabulib(path, overrides={"language": "en", "currency": "PLN"})
        assert campaign.language == "en"
        assert campaign.currency == "PLN"
