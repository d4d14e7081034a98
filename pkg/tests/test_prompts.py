"""Prompt assembly, retrieval, summary text and response parsing."""

import re

import numpy as np
import pytest

from pbcast.embeddings import HashingEmbedder
from pbcast.llm.client import estimate_tokens
from pbcast.llm.prompts import (
    PredictionParseError,
    PromptVariant,
    build_prompt,
    build_step_back_prompt,
    parse_prediction,
    retrieve_similar,
    summarize_past_election,
)

from conftest import make_campaign, make_project

EMB = HashingEmbedder(dim=64)


class TestVariant:
    def test_defaults(self):
        v = PromptVariant()
        assert v.kind == "RAG"
        assert v.reasoning == "chain_of_thought"

    def test_invalid_kind(self):
        with pytest.raises(ValueError, match="kind"):
            PromptVariant(kind="XL")

    def test_invalid_reasoning(self):
        with pytest.raises(ValueError, match="reasoning"):
            PromptVariant(reasoning="vibes")


class TestSummary:
    def test_bundled_wroclaw_summary_mentions_counts(self, campaigns):
        text = summarize_past_election(campaigns["wroclaw-2016"])
        assert "52" in text
        assert "67103" in text
        assert "119194" in text

    def test_single_project_campaign(self):
        campaign = make_campaign([30], voters=100, total_votes=30)
        text = summarize_past_election(campaign)
        assert text.count("outdoor") == 1  # one category row

    def test_deterministic(self, campaigns):
        past = campaigns["wroclaw-2016"]
        assert summarize_past_election(past) == summarize_past_election(past)


class TestRetrieval:
    def test_identical_description_ranks_first(self):
        past = make_campaign([10, 20, 30])
        query = past.projects[2]
        results = retrieve_similar(query, past, 2, EMB)
        assert results[0][0].id == query.id
        assert results[0][1] == pytest.approx(1.0, abs=1e-9)

    def test_zero_m_returns_empty(self):
        past = make_campaign([10, 20])
        assert retrieve_similar(past.projects[0], past, 0, EMB) == []

    def test_oversized_m_returns_all(self):
        past = make_campaign([10, 20, 30])
        results = retrieve_similar(past.projects[0], past, 99, EMB)
        assert len(results) == 3

    def test_similarity_ties_fall_back_to_index_order(self):
        class OrthogonalEmbedder:
            dim = 4
            provider_id = "orthogonal"

            def embed(self, text):
                # query hits a fixed axis; all past texts share another:
                # every candidate ties at similarity zero
                if "query" in text:
                    return np.array([1.0, 0.0, 0.0, 0.0])
                return np.array([0.0, 1.0, 0.0, 0.0])

        past = make_campaign([10, 20, 30])
        query = make_project(9, description="query text")
        results = retrieve_similar(query, past, 3, OrthogonalEmbedder())
        assert [p.id for p, _ in results] == [p.id for p in past.projects]

    def test_negative_m_rejected(self):
        past = make_campaign([10])
        with pytest.raises(ValueError):
            retrieve_similar(past.projects[0], past, -1, EMB)


class TestBuildPrompt:
    def setup_method(self):
        self.past = make_campaign([40, 30, 20, 10], year=2020)
        self.target = make_campaign([None] * 3, year=2021, total_votes=0, offset=50)
        self.project = self.target.projects[0]

    def variant(self, kind):
        return PromptVariant(kind=kind, language="en")

    def test_nc_contains_no_past_votes(self):
        prompt = build_prompt(self.variant("NC"), self.project, self.target)
        for p in self.past.projects:
            assert f"votes: {p.votes}" not in prompt
        assert "Summary" not in prompt

    def test_ic_contains_every_past_vote_figure_without_descriptions(self):
        prompt = build_prompt(
            self.variant("IC"), self.project, self.target, past=self.past
        )
        assert len(re.findall(r"votes: \d+", prompt)) == len(self.past.projects)
        for p in self.past.projects:
            assert f"votes: {p.votes}" in prompt
            assert p.description not in prompt

    def test_rag_includes_summary_and_retrieval(self):
        retrieval = retrieve_similar(self.project, self.past, 2, EMB)
        prompt = build_prompt(
            self.variant("RAG"), self.project, self.target,
            past=self.past, retrieval=retrieval,
        )
        assert "Summary of the 2020" in prompt
        assert len(re.findall(r"votes: \d+", prompt)) == 2

    def test_rag_sb_injects_insight(self):
        retrieval = retrieve_similar(self.project, self.past, 1, EMB)
        prompt = build_prompt(
            self.variant("RAG_SB"), self.project, self.target,
            past=self.past, retrieval=retrieval,
            step_back_insight="Cheap green projects win.",
        )
        assert "Cheap green projects win." in prompt

    def test_missing_context_names_variant(self):
        with pytest.raises(ValueError, match="RAG"):
            build_prompt(self.variant("RAG"), self.project, self.target)
        with pytest.raises(ValueError, match="IC"):
            build_prompt(self.variant("IC"), self.project, self.target)
        retrieval = retrieve_similar(self.project, self.past, 1, EMB)
        with pytest.raises(ValueError, match="RAG_SB"):
            build_prompt(self.variant("RAG_SB"), self.project, self.target,
                         past=self.past, retrieval=retrieval)

    def test_deterministic_bytes(self):
        a = build_prompt(self.variant("NC"), self.project, self.target)
        b = build_prompt(self.variant("NC"), self.project, self.target)
        assert a == b

    def test_output_contract_and_cot_present(self):
        prompt = build_prompt(self.variant("NC"), self.project, self.target)
        assert "PREDICTION: <integer>" in prompt
        assert "step by step" in prompt.lower()
        silent = PromptVariant(kind="NC", reasoning="none", language="en")
        no_cot = build_prompt(silent, self.project, self.target)
        assert "step by step" not in no_cot.lower()

    def test_french_prompts_for_french_campaigns(self, campaigns):
        target = campaigns["toulouse-2024"]
        variant = PromptVariant(kind="NC", language="fr")
        prompt = build_prompt(variant, target.projects[0], target)
        assert "Projet à évaluer" in prompt
        assert "PREDICTION: <entier>" in prompt

    def test_token_size_bands_on_bundled_data(self, campaigns):
        past = campaigns["toulouse-2022"]
        target = campaigns["toulouse-2024"]
        variant_nc = PromptVariant(kind="NC", language="fr")
        variant_ic = PromptVariant(kind="IC", language="fr")
        nc = build_prompt(variant_nc, target.projects[0], target)
        ic = build_prompt(variant_ic, target.projects[0], target, past=past)
        assert 100 <= estimate_tokens(nc) <= 1500
        assert estimate_tokens(ic) > 2500
        assert estimate_tokens(ic) > 3 * estimate_tokens(nc)

    def test_step_back_prompt_mentions_city_and_past(self, campaigns):
        past = campaigns["wroclaw-2016"]
        prompt = build_step_back_prompt(past, PromptVariant(kind="RAG_SB", language="en"))
        assert "Wroclaw" in prompt
        assert "general principles" in prompt


class TestParsePrediction:
    def test_plain(self):
        assert parse_prediction("reasoning...\nPREDICTION: 1250") == 1250

    def test_thousands_separators(self):
        assert parse_prediction("PREDICTION: 1,250") == 1250
        assert parse_prediction("PREDICTION: 1 250") == 1250
        assert parse_prediction("PREDICTION: 1.250") == 1250
        assert parse_prediction("PREDICTION: 12'500") == 12500

    def test_decimal_is_rounded(self):
        assert parse_prediction("PREDICTION: 1250.0") == 1250
        assert parse_prediction("PREDICTION: 99.6") == 100

    def test_takes_last_line(self):
        text = "PREDICTION: 5\nsecond thoughts\nPREDICTION: 7"
        assert parse_prediction(text) == 7

    def test_case_insensitive_and_trailing_words(self):
        assert parse_prediction("prediction: 440 votes") == 440

    def test_refusal_is_parse_error_with_response(self):
        with pytest.raises(PredictionParseError) as err:
            parse_prediction("I cannot answer")
        assert err.value.response == "I cannot answer"

    def test_negative_rejected(self):
        with pytest.raises(PredictionParseError, match="negative"):
            parse_prediction("PREDICTION: -5")

    def test_empty(self):
        with pytest.raises(PredictionParseError):
            parse_prediction("")
