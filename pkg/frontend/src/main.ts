// DOM wiring for the what-if companion. All displayed numbers come from
// the view models in viewmodel.ts, which copy service response fields.

import { ApiClient, ServiceError } from "./api.js";
import {
  DEFAULT_BOX,
  axisEndLabels,
  diagonalPath,
  linePath,
  multiLinePaths,
  scatterDots,
} from "./charts.js";
import { SessionHistory } from "./history.js";
import { SubmitQueue } from "./queue.js";
import { CampaignSummary, Draft, WhatIfResponse } from "./types.js";
import {
  ComparisonRow,
  ResultPanelModel,
  comparisonRows,
  draftIsComplete,
  explorerModel,
  resultPanel,
} from "./viewmodel.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new ApiClient(
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000",
);

let campaigns: CampaignSummary[] = [];
let history: SessionHistory | null = null;
const queue = new SubmitQueue<WhatIfResponse>((pending, busy) => {
  const status = $("queue-status");
  status.textContent = busy
    ? pending > 0
      ? `predicting… (${pending} queued)`
      : "predicting…"
    : "";
  ($("submit") as HTMLButtonElement).disabled = busy && pending > 2;
});

function banner(message: string | null): void {
  const el = $("banner");
  el.textContent = message ?? "";
  el.style.display = message ? "block" : "none";
}

function currentCampaign(): CampaignSummary {
  const key = ($("campaign") as HTMLSelectElement).value;
  const found = campaigns.find((c) => c.key === key);
  if (!found) throw new Error(`unknown campaign ${key}`);
  return found;
}

function readDraft(): Draft {
  return {
    title: ($("title") as HTMLInputElement).value,
    description: ($("description") as HTMLTextAreaElement).value,
    category: ($("category") as HTMLInputElement).value,
    cost: Number(($("cost") as HTMLInputElement).value),
    district: ($("district") as HTMLInputElement).value,
  };
}

function renderResult(model: ResultPanelModel): void {
  const panel = $("result");
  panel.style.display = "block";
  $("r-votes").textContent = String(model.predictedVotes);
  $("r-rank").textContent = `${model.rank}`;
  $("r-n").textContent = `${model.nProjects}`;
  $("r-verdict").textContent = model.verdict;
  $("r-verdict").className = `verdict ${model.verdict.replace(" ", "-")}`;
  $("r-cost").textContent = `${model.draftCost} (minor units, ${model.currency})`;
  $("r-budget").textContent = `${model.budget} (minor units, ${model.currency})`;
  const badges = $("r-topk");
  badges.innerHTML = "";
  for (const flag of model.topK) {
    const badge = document.createElement("span");
    badge.className = flag.member ? "badge on" : "badge";
    badge.textContent = `top ${flag.label}`;
    badges.appendChild(badge);
  }
  const neighbors = $("r-neighbors");
  neighbors.innerHTML = "";
  for (const [where, n] of [
    ["above", model.above],
    ["below", model.below],
  ] as const) {
    const li = document.createElement("li");
    li.textContent = n
      ? `${where}: ${n.title} (${n.id}) — ${n.predictedVotes ?? "no prediction"}`
      : `${where}: —`;
    neighbors.appendChild(li);
  }
}

function renderComparison(rows: ComparisonRow[]): void {
  const tbody = $("revisions-body");
  tbody.innerHTML = "";
  for (const row of rows) {
    const tr = document.createElement("tr");
    const delta = (v: number | null) =>
      v === null ? "—" : v > 0 ? `+${v}` : `${v}`;
    const flips = [
      row.fundingFlip ? "funding" : "",
      ...row.topKFlips.map((l) => `top ${l}`),
    ]
      .filter(Boolean)
      .join(", ");
    for (const cell of [
      String(row.index),
      row.title,
      String(row.cost),
      String(row.predictedVotes),
      delta(row.votesDelta),
      String(row.rank),
      delta(row.rankDelta),
      row.verdict,
      flips || "—",
    ]) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    if (row.fundingFlip || row.topKFlips.length > 0) tr.className = "flip";
    tbody.appendChild(tr);
  }
}

async function submitDraft(): Promise<void> {
  banner(null);
  const campaign = currentCampaign();
  const draft = readDraft();
  const problems = draftIsComplete(draft);
  if (problems.length > 0) {
    banner(`please fill in: ${problems.join(", ")}`);
    return;
  }
  const model = ($("model") as HTMLSelectElement).value;
  try {
    const response = await queue.submit(() => api.whatIf(campaign.key, draft, model));
    renderResult(resultPanel(response, campaign.currency));
    if (history) {
      history.append(draft, response, new Date().toISOString());
      renderComparison(comparisonRows([...history.entries]));
    }
  } catch (err) {
    if (err instanceof ServiceError) {
      banner(`service error (${err.status}): ${err.message}`);
    } else {
      banner(`service unreachable: ${String(err)}`);
    }
  }
}

function switchCampaign(): void {
  // resets ranking context and history view; draft fields stay as typed
  const campaign = currentCampaign();
  history = new SessionHistory(localStorage, campaign.key, ($("model") as HTMLSelectElement).value);
  $("result").style.display = "none";
  renderComparison(comparisonRows([...history.entries]));
  void loadExplorer();
}

function svgEl(tag: string): SVGElement {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

function drawChart(
  holder: HTMLElement,
  title: string,
  paths: { d: string; cls: string }[],
  dots: { cx: number; cy: number; label: string }[],
  yMax: number,
  xMax: number,
): void {
  holder.innerHTML = "";
  const caption = document.createElement("h4");
  caption.textContent = title;
  holder.appendChild(caption);
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${DEFAULT_BOX.width} ${DEFAULT_BOX.height}`);
  for (const p of paths) {
    if (!p.d) continue;
    const path = svgEl("path");
    path.setAttribute("d", p.d);
    path.setAttribute("class", p.cls);
    svg.appendChild(path);
  }
  for (const dot of dots) {
    const c = svgEl("circle");
    c.setAttribute("cx", dot.cx.toFixed(1));
    c.setAttribute("cy", dot.cy.toFixed(1));
    c.setAttribute("r", "3");
    const label = svgEl("title");
    label.textContent = dot.label;
    c.appendChild(label);
    svg.appendChild(c);
  }
  const corner = svgEl("text");
  corner.setAttribute("x", "4");
  corner.setAttribute("y", "14");
  corner.setAttribute("class", "axis");
  corner.textContent = `max y ${yMax}, max x ${xMax}`;
  svg.appendChild(corner);
  holder.appendChild(svg);
}

async function loadExplorer(): Promise<void> {
  const campaign = currentCampaign();
  const picker = $("report-model") as HTMLSelectElement;
  const empty = $("explorer-empty");
  try {
    const listing = await api.reports(campaign.key);
    picker.innerHTML = "";
    for (const report of listing.reports) {
      const option = document.createElement("option");
      option.value = report.model;
      option.textContent = report.model;
      picker.appendChild(option);
    }
    if (listing.reports.length === 0) {
      empty.textContent = "no evaluation reports for this campaign yet";
      $("charts").innerHTML = "";
      return;
    }
    empty.textContent = "";
    await drawExplorer();
  } catch (err) {
    empty.textContent = `reports unavailable: ${String(err)}`;
  }
}

async function drawExplorer(): Promise<void> {
  const campaign = currentCampaign();
  const picker = $("report-model") as HTMLSelectElement;
  if (!picker.value) return;
  const detail = await api.reportDetail(campaign.key, picker.value);
  const model = explorerModel(detail);
  const charts = $("charts");
  charts.innerHTML = "";

  const scatterHolder = document.createElement("div");
  charts.appendChild(scatterHolder);
  const scatterEnds = axisEndLabels(model.scatter);
  drawChart(
    scatterHolder,
    `real vs predicted votes (${model.model})`,
    [{ d: diagonalPath(model.scatter), cls: "ref" }],
    scatterDots(model.scatter),
    scatterEnds.yMax,
    scatterEnds.xMax,
  );

  const jaccardHolder = document.createElement("div");
  charts.appendChild(jaccardHolder);
  const jEnds = axisEndLabels(model.jaccard);
  drawChart(
    jaccardHolder,
    "top-k overlap (Jaccard)",
    [{ d: linePath(model.jaccard), cls: "line" }],
    [],
    jEnds.yMax,
    jEnds.xMax,
  );

  const costHolder = document.createElement("div");
  charts.appendChild(costHolder);
  const [realPath, predPath] = multiLinePaths([model.costReal, model.costPred]);
  const cEnds = axisEndLabels([...model.costReal, ...model.costPred]);
  drawChart(
    costHolder,
    "cumulative cost of top-k (real vs predicted)",
    [
      { d: realPath, cls: "line" },
      { d: predPath, cls: "line alt" },
    ],
    [],
    cEnds.yMax,
    cEnds.xMax,
  );

  const note = document.createElement("p");
  note.className = "fineprint";
  note.textContent =
    `tau ${model.kendallTau ?? "n/a"} · rmse ${model.normalizedRmse ?? "n/a"} · ` +
    `${model.distinctPredictions} distinct predictions` +
    (model.heavyTies ? " · heavy ties (banded output)" : "");
  charts.appendChild(note);
}

async function boot(): Promise<void> {
  try {
    campaigns = await api.campaigns();
  } catch (err) {
    banner(`cannot reach the service at ${api.baseUrl}: ${String(err)}`);
    return;
  }
  const select = $("campaign") as HTMLSelectElement;
  select.innerHTML = "";
  for (const campaign of campaigns) {
    const option = document.createElement("option");
    option.value = campaign.key;
    option.textContent = `${campaign.city} ${campaign.year} (${campaign.n_projects} projects)`;
    select.appendChild(option);
  }
  select.addEventListener("change", switchCampaign);
  ($("model") as HTMLSelectElement).addEventListener("change", switchCampaign);
  ($("report-model") as HTMLSelectElement).addEventListener("change", () => {
    void drawExplorer();
  });
  $("submit").addEventListener("click", () => void submitDraft());
  $("export").addEventListener("click", () => {
    if (!history) return;
    const blob = new Blob([history.exportJson()], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = `${history.campaign}-session.json`;
    link.click();
  });
  switchCampaign();
}

void boot();
