// Shapes of the what-if service JSON bodies this UI consumes.

export interface CampaignSummary {
  key: string;
  city: string;
  year: number;
  language: string;
  currency: string;
  budget: number;
  voters: number;
  total_votes: number;
  max_approvals: number;
  n_projects: number;
}

export interface Neighbor {
  id: string;
  title: string;
  predicted_votes: number | null;
}

export interface WhatIfResponse {
  predicted_votes: number;
  rank: number;
  n_projects: number;
  top_k: Record<string, boolean>;
  funded: boolean;
  never_fundable: boolean;
  budget: number;
  draft_cost: number;
  neighbors: { above: Neighbor | null; below: Neighbor | null };
  provenance: Record<string, unknown>;
}

export interface Draft {
  title: string;
  description: string;
  category: string;
  cost: number;
  district: string;
}

export interface SeriesRow {
  k: number;
  jaccard: number;
  cum_cost_real: number;
  cum_cost_pred: number;
}

export interface ScatterRow {
  id: string;
  real_votes: number | null;
  predicted_votes: number | null;
}

export interface ReportDetail {
  model: string;
  campaign: string;
  n_projects: number;
  gap_count: number;
  normalized_rmse: number | null;
  kendall_tau: number | null;
  budget: number;
  distinct_predictions: number;
  heavy_ties: boolean;
  greedy_funded_real: string[];
  greedy_funded_pred: string[];
  series: SeriesRow[];
  scatter: ScatterRow[];
}

export interface ReportSummary {
  model: string;
  normalized_rmse: number | null;
  kendall_tau: number | null;
  gap_count: number;
  distinct_predictions: number;
  heavy_ties: boolean;
}

export interface RevisionEntry {
  draft: Draft;
  response: WhatIfResponse;
  at: string; // ISO timestamp of the submission
}

export interface DraftSession {
  campaign: string;
  model: string;
  entries: RevisionEntry[];
}
