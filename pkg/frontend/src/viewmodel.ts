// Pure mapping from service responses to what the screen shows.
//
// Contract: the UI does no prediction math. Every number that reaches a
// view model is copied verbatim from a service response field; the only
// arithmetic anywhere is the revision table's delta columns, each the
// difference of the same field across two stored responses. Chart
// geometry (pixel scaling) lives in charts.ts and never surfaces as a
// displayed number.

import {
  Draft,
  Neighbor,
  ReportDetail,
  RevisionEntry,
  WhatIfResponse,
} from "./types.js";

export interface NeighborView {
  id: string;
  title: string;
  predictedVotes: number | null;
}

export interface ResultPanelModel {
  predictedVotes: number;
  rank: number;
  nProjects: number;
  topK: { label: string; member: boolean }[];
  verdict: "funded" | "not funded" | "never fundable";
  budget: number;
  draftCost: number;
  currency: string;
  above: NeighborView | null;
  below: NeighborView | null;
}

function neighborView(n: Neighbor | null): NeighborView | null {
  if (n === null) return null;
  return { id: n.id, title: n.title, predictedVotes: n.predicted_votes };
}

export function resultPanel(
  response: WhatIfResponse,
  currency: string,
): ResultPanelModel {
  const verdict = response.never_fundable
    ? "never fundable"
    : response.funded
      ? "funded"
      : "not funded";
  return {
    predictedVotes: response.predicted_votes,
    rank: response.rank,
    nProjects: response.n_projects,
    topK: Object.entries(response.top_k).map(([label, member]) => ({
      label,
      member,
    })),
    verdict,
    budget: response.budget,
    draftCost: response.draft_cost,
    currency,
    above: neighborView(response.neighbors.above),
    below: neighborView(response.neighbors.below),
  };
}

export interface ComparisonRow {
  index: number;
  title: string;
  cost: number;
  predictedVotes: number;
  rank: number;
  verdict: string;
  // deltas vs the previous revision; null on the first row
  votesDelta: number | null;
  rankDelta: number | null;
  fundingFlip: boolean;
  topKFlips: string[]; // labels whose membership changed
}

export function comparisonRows(entries: RevisionEntry[]): ComparisonRow[] {
  return entries.map((entry, i) => {
    const prev = i > 0 ? entries[i - 1] : null;
    const cur = entry.response;
    const verdict = cur.never_fundable
      ? "never fundable"
      : cur.funded
        ? "funded"
        : "not funded";
    const topKFlips: string[] = [];
    if (prev) {
      for (const label of Object.keys(cur.top_k)) {
        if (cur.top_k[label] !== prev.response.top_k[label]) {
          topKFlips.push(label);
        }
      }
    }
    return {
      index: i + 1,
      title: entry.draft.title,
      cost: entry.draft.cost,
      predictedVotes: cur.predicted_votes,
      rank: cur.rank,
      verdict,
      votesDelta: prev ? cur.predicted_votes - prev.response.predicted_votes : null,
      rankDelta: prev ? cur.rank - prev.response.rank : null,
      fundingFlip: prev ? prev.response.funded !== cur.funded : false,
      topKFlips,
    };
  });
}

export interface Point {
  x: number;
  y: number;
  label?: string;
}

export interface ExplorerModel {
  model: string;
  jaccard: Point[];
  costReal: Point[];
  costPred: Point[];
  scatter: Point[];
  kendallTau: number | null;
  normalizedRmse: number | null;
  heavyTies: boolean;
  distinctPredictions: number;
}

export function explorerModel(report: ReportDetail): ExplorerModel {
  const scatter: Point[] = [];
  for (const row of report.scatter) {
    if (row.real_votes !== null && row.predicted_votes !== null) {
      scatter.push({ x: row.real_votes, y: row.predicted_votes, label: row.id });
    }
  }
  return {
    model: report.model,
    jaccard: report.series.map((r) => ({ x: r.k, y: r.jaccard })),
    costReal: report.series.map((r) => ({ x: r.k, y: r.cum_cost_real })),
    costPred: report.series.map((r) => ({ x: r.k, y: r.cum_cost_pred })),
    scatter,
    kendallTau: report.kendall_tau,
    normalizedRmse: report.normalized_rmse,
    heavyTies: report.heavy_ties,
    distinctPredictions: report.distinct_predictions,
  };
}

export function draftIsComplete(draft: Draft): string[] {
  const problems: string[] = [];
  if (!draft.title.trim()) problems.push("title");
  if (!draft.description.trim()) problems.push("description");
  if (!draft.category.trim()) problems.push("category");
  if (!draft.district.trim()) problems.push("district");
  if (!Number.isFinite(draft.cost) || draft.cost <= 0) problems.push("cost");
  return problems;
}
