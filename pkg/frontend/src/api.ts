// Thin fetch client for the what-if service.

import {
  CampaignSummary,
  Draft,
  ReportDetail,
  ReportSummary,
  WhatIfResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    public status: number,
    public detail: unknown = null,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let detail: unknown = null;
  try {
    detail = (await resp.json()).detail;
  } catch {
    // non-JSON body; keep detail null
  }
  const text = Array.isArray(detail) ? detail.join("; ") : String(detail ?? resp.statusText);
  throw new ServiceError(text, resp.status, detail);
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  campaigns(): Promise<CampaignSummary[]> {
    return this.get("/campaigns");
  }

  reports(campaign: string): Promise<{ campaign: string; reports: ReportSummary[] }> {
    return this.get(`/campaigns/${encodeURIComponent(campaign)}/reports`);
  }

  reportDetail(campaign: string, model: string): Promise<ReportDetail> {
    return this.get(
      `/campaigns/${encodeURIComponent(campaign)}/reports/${encodeURIComponent(model)}`,
    );
  }

  async whatIf(campaign: string, draft: Draft, model: string): Promise<WhatIfResponse> {
    const resp = await fetch(
      `${this.baseUrl}/campaigns/${encodeURIComponent(campaign)}/whatif`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ draft, model }),
      },
    );
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as WhatIfResponse;
  }
}
