"""Command-line workflow: validate, embed, select-dim, fit, predict,
evaluate, probe, report, serve.

Configuration precedence is flags > environment (PBCAST_*) > config
file (--config, JSON mapping command name -> option defaults, keys named
like the flags with dashes as underscores).  Failures exit with named
codes: 3 data/schema, 4 missing replay fixture, 5 validation/incomplete
run, 6 unknown campaign or model.
"""

from __future__ import annotations

import json
import os

from pathlib import Path
from typing import Optional

import click

from .data import (
    DataError,
    RunStore,
    discover_campaigns,
    load_pabulib,
    validate_campaign,
)
from .embeddings import CachingEmbedder, EmbeddingCache, HashingEmbedder, HttpEmbeddingClient
from .metrics import IncompleteRunError, evaluate_run, null_predictor
from .llm.client import ChatClient, LlmConfig, ReplayMissError, TranscriptStore
from .llm.contamination import probe_attribute_retrieval, probe_description_completion
from .llm.pipeline import run_campaign_prediction
from .llm.prompts import PromptVariant
from .predictor import ClassicalPredictor, fit_classical_predictor
from .selection import select_pca_dim

EXIT_DATA_ERROR = 3
EXIT_MISSING_FIXTURE = 4
EXIT_VALIDATION = 5
EXIT_UNKNOWN = 6

LLM_MODELS = ("NC", "RAG", "RAG_SB", "IC")
PAIRINGS = {  # default train campaign per evaluation campaign
    "toulouse-2024": "toulouse-2022",
    "wroclaw-2017": "wroclaw-2016",
}


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _load_config(ctx: click.Context, _param, value):
    if value:
        ctx.default_map = json.loads(Path(value).read_text(encoding="utf-8"))
    return value


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    expose_value=False,
    is_eager=True,
    help="JSON file with per-command option defaults.",
)
def cli():
    """Forecast public support for participatory budgeting proposals."""


def data_option(f):
    return click.option(
        "--data",
        type=click.Path(file_okay=False, path_type=Path),
        default=Path("data/campaigns"),
        show_default=True,
        help="Directory of campaign folders (projects.csv + meta.json).",
    )(f)


def _campaigns(data: Path) -> dict:
    try:
        return discover_campaigns(data)
    except DataError as exc:
        raise CliError(str(exc), EXIT_DATA_ERROR) from exc


def _campaign(data: Path, key: str):
    campaigns = _campaigns(data)
    if key not in campaigns:
        raise CliError(
            f"unknown campaign {key!r}; available: {', '.join(sorted(campaigns))}",
            EXIT_UNKNOWN,
        )
    return campaigns[key]


def _embedder(kind: str, dim: int, cache_dir: Optional[Path], endpoint: str, model: str):
    if kind == "hashing":
        provider = HashingEmbedder(dim=dim)
    elif kind == "http":
        provider = HttpEmbeddingClient(
            endpoint=endpoint,
            model=model,
            dim=dim,
            api_key=os.environ.get("PBCAST_EMBEDDING_KEY"),
        )
    else:
        raise CliError(f"unknown embedder {kind!r}", EXIT_UNKNOWN)
    if cache_dir is not None:
        return CachingEmbedder(provider, EmbeddingCache(cache_dir))
    return provider


def embedder_options(f):
    f = click.option("--embedder", default="hashing", show_default=True,
                     type=click.Choice(["hashing", "http"]))(f)
    f = click.option("--embedding-dim", default=256, show_default=True, type=int)(f)
    f = click.option("--embedding-endpoint", default="https://api.openai.com/v1/embeddings",
                     show_default=True)(f)
    f = click.option("--embedding-model", default="text-embedding-3-large",
                     show_default=True)(f)
    f = click.option("--cache", type=click.Path(file_okay=False, path_type=Path),
                     default=None, help="Embedding cache directory.")(f)
    return f


def llm_options(f):
    f = click.option("--mode", default="replay", show_default=True,
                     type=click.Choice(["live", "record", "replay"]))(f)
    f = click.option("--fixtures", type=click.Path(file_okay=False, path_type=Path),
                     default=Path("data/fixtures/transcripts"), show_default=True)(f)
    f = click.option("--llm-model", default="gpt-4-turbo", show_default=True)(f)
    f = click.option("--temperature", default=0.0, show_default=True, type=float)(f)
    f = click.option("--endpoint", default="https://api.openai.com/v1/chat/completions",
                     show_default=True)(f)
    f = click.option("--api-key-env", default="OPENAI_API_KEY", show_default=True,
                     help="Environment variable holding the API key.")(f)
    f = click.option("--max-in-flight", default=4, show_default=True, type=int)(f)
    f = click.option("--requests-per-minute", default=None, type=float)(f)
    return f


def _chat_client(mode, fixtures, llm_model, temperature, endpoint, api_key_env,
                 max_in_flight, requests_per_minute) -> ChatClient:
    config = LlmConfig(
        model=llm_model,
        temperature=temperature,
        mode=mode,
        endpoint=endpoint,
        api_key=os.environ.get(api_key_env),
        max_in_flight=max_in_flight,
        requests_per_minute=requests_per_minute,
    )
    store = TranscriptStore(fixtures) if mode in ("record", "replay") else None
    return ChatClient(config, store=store)


@cli.command()
@data_option
@click.option("--campaign", required=False, help="Campaign key; default: all.")
@click.option("--pabulib", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Validate a Pabulib .pb file instead.")
def validate(data, campaign, pabulib):
    """Check campaign invariants; nonzero exit on violations."""
    if pabulib is not None:
        try:
            targets = {f"pabulib:{pabulib.name}": load_pabulib(pabulib)}
        except DataError as exc:
            raise CliError(str(exc), EXIT_DATA_ERROR) from exc
    elif campaign:
        targets = {campaign: _campaign(data, campaign)}
    else:
        targets = _campaigns(data)
    dirty = False
    for name, item in sorted(targets.items()):
        report = validate_campaign(item)
        if report.clean:
            click.echo(f"{name}: clean ({len(item.projects)} projects)")
        else:
            dirty = True
            click.echo(f"{name}: {len(report.violations)} violation(s)")
            for v in report.violations:
                click.echo(f"  [{v.code}] {v.message}")
    if dirty:
        raise CliError("validation failed", EXIT_VALIDATION)


@cli.command()
@data_option
@embedder_options
@click.option("--campaign", required=True)
def embed(data, campaign, embedder, embedding_dim, embedding_endpoint,
          embedding_model, cache):
    """Warm the embedding cache for every project description."""
    if cache is None:
        raise CliError("embed requires --cache", EXIT_DATA_ERROR)
    item = _campaign(data, campaign)
    provider = _embedder(embedder, embedding_dim, cache,
                         embedding_endpoint, embedding_model)
    texts = [p.description or p.title for p in item.projects]
    provider.embed_many(texts)
    click.echo(f"{campaign}: cached {len(texts)} embeddings under {cache}")


@cli.command(name="select-dim")
@data_option
@embedder_options
@click.option("--model", required=True, type=click.Choice(["pvm", "knn"]))
@click.option("--train", required=True)
@click.option("--eval", required=True)
@click.option("--dims", default="1:30", show_default=True,
              help="Range start:stop[:step] or comma list.")
@click.option("--knn-k", default=5, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="Write the tau-per-dim table as CSV.")
def select_dim(data, model, train, eval, dims, knn_k, out,
               embedder, embedding_dim, embedding_endpoint, embedding_model, cache):
    """Sweep reduction dimensions, maximizing rank correlation."""
    train_campaign = _campaign(data, train)
    eval_campaign = _campaign(data, eval)
    provider = _embedder(embedder, embedding_dim, cache,
                         embedding_endpoint, embedding_model)
    if ":" in dims:
        parts = [int(x) for x in dims.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        dim_list = list(range(start, stop + 1, step))
    else:
        dim_list = [int(x) for x in dims.split(",")]
    selection = select_pca_dim(train_campaign, eval_campaign, model, dim_list,
                               provider, knn_k=knn_k)
    for dim, tau in selection.table:
        click.echo(f"dim {dim:4d}  tau {tau:+.4f}")
    click.echo(f"best dim: {selection.best_dim} (tau {selection.best_tau:+.4f})")
    if out:
        lines = ["dim,tau"] + [f"{d},{t}" for d, t in selection.table]
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")


@cli.command()
@data_option
@embedder_options
@click.option("--model", required=True, type=click.Choice(["pvm", "knn"]))
@click.option("--train", required=True)
@click.option("--pca-dim", default=None, type=int)
@click.option("--knn-k", default=5, show_default=True, type=int)
@click.option("--l2", default=0.0, show_default=True, type=float)
@click.option("--models", type=click.Path(file_okay=False, path_type=Path),
              default=Path("data/models"), show_default=True)
def fit(data, model, train, pca_dim, knn_k, l2, models,
        embedder, embedding_dim, embedding_endpoint, embedding_model, cache):
    """Fit a classical predictor and freeze it to JSON."""
    train_campaign = _campaign(data, train)
    provider = _embedder(embedder, embedding_dim, cache,
                         embedding_endpoint, embedding_model)
    predictor = fit_classical_predictor(
        model, train_campaign, provider, pca_dim=pca_dim, knn_k=knn_k,
        pvm_config={"l2": l2} if model == "pvm" else None,
    )
    path = predictor.save(models / f"{model.lower()}-{train}.json")
    click.echo(f"saved {predictor.model_id} predictor to {path}")


def predictor_run(predictor: ClassicalPredictor, campaign, embedder):
    """Build a PredictionRun from a frozen classical predictor."""
    from .data import PredictionRecord, PredictionRun, utc_timestamp

    votes = predictor.predict_campaign(campaign, embedder)
    records = tuple(
        PredictionRecord(project_id=p.id, predicted_votes=float(v))
        for p, v in zip(campaign.projects, votes)
    )
    pca_dim = None if predictor.pca is None else predictor.pca.n_components
    return PredictionRun(
        campaign_key=campaign.key,
        campaign_city=campaign.city,
        campaign_year=campaign.year,
        language=campaign.language,
        model=predictor.model_id,
        records=records,
        config={
            "train_campaign": predictor.train_campaign,
            "pca_dim": pca_dim,
            "embedding_provider": predictor.schema.provider_id,
        },
        timestamp=utc_timestamp(),
    )


@cli.command()
@data_option
@embedder_options
@llm_options
@click.option("--model", required=True,
              help="pvm, knn, nc, rag, rag_sb or ic.")
@click.option("--train", default=None,
              help="Training/context campaign; defaults to the standard pairing.")
@click.option("--eval", required=True)
@click.option("--pca-dim", default=None, type=int)
@click.option("--knn-k", default=5, show_default=True, type=int)
@click.option("--retrieval-size", default=5, show_default=True, type=int)
@click.option("--runs", type=click.Path(file_okay=False, path_type=Path),
              default=Path("data/runs"), show_default=True)
def predict(data, model, train, eval, pca_dim, knn_k, retrieval_size,
            runs, embedder, embedding_dim, embedding_endpoint,
            embedding_model, cache, mode, fixtures, llm_model, temperature,
            endpoint, api_key_env, max_in_flight, requests_per_minute):
    """Predict every project of a campaign and persist the run."""
    model_id = model.upper()
    eval_campaign = _campaign(data, eval)
    if train is None:
        train = PAIRINGS.get(eval)
        if train is None and model_id != "NC":
            raise CliError(f"no default pairing for {eval}; pass --train",
                           EXIT_UNKNOWN)
    provider = _embedder(embedder, embedding_dim, cache,
                         embedding_endpoint, embedding_model)
    store = RunStore(runs)

    if model_id in ("PVM", "KNN"):
        train_campaign = _campaign(data, train)
        predictor = fit_classical_predictor(
            model_id, train_campaign, provider, pca_dim=pca_dim, knn_k=knn_k
        )
        run = predictor_run(predictor, eval_campaign, provider)
    elif model_id in LLM_MODELS:
        past = _campaign(data, train) if model_id != "NC" else None
        client = _chat_client(mode, fixtures, llm_model, temperature, endpoint,
                              api_key_env, max_in_flight, requests_per_minute)
        variant = PromptVariant(kind=model_id, language=eval_campaign.language)
        try:
            run = run_campaign_prediction(
                variant, eval_campaign, past, client,
                embedder=provider, retrieval_size=retrieval_size,
            )
        except ReplayMissError as exc:
            raise CliError(str(exc), EXIT_MISSING_FIXTURE) from exc
    else:
        raise CliError(f"unknown model {model!r}", EXIT_UNKNOWN)
    path = store.save(run)
    click.echo(f"{model_id} run over {eval}: {len(run.records)} records, "
               f"{run.gap_count} gaps -> {path}")


@cli.command()
@data_option
@click.option("--run", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Run file; alternative to --campaign/--model.")
@click.option("--campaign", default=None)
@click.option("--model", default=None)
@click.option("--runs", type=click.Path(file_okay=False, path_type=Path),
              default=Path("data/runs"), show_default=True)
@click.option("--force", is_flag=True, help="Evaluate runs with many gaps anyway.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--csv", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--null-seed", default=None, type=int,
              help="Also print the seeded shuffling baseline.")
def evaluate(data, run, campaign, model, runs, force, out, csv, null_seed):
    """Score a persisted run against its campaign's ground truth."""
    store = RunStore(runs)
    try:
        if run is not None:
            loaded = store.load(run)
        else:
            if not campaign or not model:
                raise CliError("pass --run or both --campaign and --model",
                               EXIT_UNKNOWN)
            loaded = store.latest(campaign, model.upper())
            if loaded is None:
                raise CliError(f"no persisted {model} run for {campaign}",
                               EXIT_UNKNOWN)
    except DataError as exc:
        raise CliError(str(exc), EXIT_DATA_ERROR) from exc
    target = _campaign(data, loaded.campaign_key)
    try:
        report = evaluate_run(loaded, target, force=force)
    except IncompleteRunError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from exc
    tau = "n/a" if report.kendall_tau is None else f"{report.kendall_tau:+.4f}"
    rmse = "n/a" if report.normalized_rmse is None else f"{report.normalized_rmse:.4%}"
    click.echo(f"{report.model} on {report.campaign_key}: rmse {rmse}, tau {tau}, "
               f"gaps {report.gap_count}, distinct {report.distinct_predictions}")
    if null_seed is not None:
        null = null_predictor(target, shuffles=100, seed=null_seed)
        click.echo(f"null baseline (100 shuffles, seed {null_seed}): "
                   f"tau {null.tau_mean:+.4f}, rmse {null.rmse_mean:.4%}")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json(), encoding="utf-8")
        click.echo(f"report -> {out}")
    if csv:
        csv.parent.mkdir(parents=True, exist_ok=True)
        csv.write_text(report.plot_series_csv(), encoding="utf-8")
        click.echo(f"plot series -> {csv}")


@cli.command()
@data_option
@embedder_options
@llm_options
@click.option("--campaign", required=True)
@click.option("--project", required=True)
@click.option("--probe", "kind", required=True,
              type=click.Choice(["completion", "attributes"]))
@click.option("--completion-mode", default="title_only", show_default=True,
              type=click.Choice(["title_only", "prefix"]))
def probe(data, campaign, project, kind, completion_mode,
          embedder, embedding_dim, embedding_endpoint, embedding_model,
          cache, mode, fixtures, llm_model, temperature, endpoint,
          api_key_env, max_in_flight, requests_per_minute):
    """Run a prior-exposure probe on one project."""
    item = _campaign(data, campaign)
    try:
        target = item.project(project)
    except KeyError:
        raise CliError(f"unknown project {project!r} in {campaign}", EXIT_UNKNOWN)
    client = _chat_client(mode, fixtures, llm_model, temperature, endpoint,
                          api_key_env, max_in_flight, requests_per_minute)
    try:
        if kind == "completion":
            provider = _embedder(embedder, embedding_dim, cache,
                                 embedding_endpoint, embedding_model)
            report = probe_description_completion(target, client, provider,
                                                  mode=completion_mode)
            click.echo(f"{report.probe} on {project}: overlap "
                       f"{report.lexical_overlap:.3f}, cosine "
                       f"{report.semantic_similarity:.3f} -> {report.verdict}")
        else:
            report = probe_attribute_retrieval(target, client)
            err = ("n/a" if report.cost_relative_error is None
                   else f"{report.cost_relative_error:.2%}")
            click.echo(f"{report.probe} on {project}: district match "
                       f"{report.district_match}, cost error {err} -> {report.verdict}")
    except ReplayMissError as exc:
        raise CliError(str(exc), EXIT_MISSING_FIXTURE) from exc


@cli.command()
@data_option
@click.option("--campaign", required=True)
@click.option("--runs", type=click.Path(file_okay=False, path_type=Path),
              default=Path("data/runs"), show_default=True)
@click.option("--plots-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--force", is_flag=True)
def report(data, campaign, runs, plots_dir, force):
    """Summarize the latest run of every model over one campaign."""
    target = _campaign(data, campaign)
    store = RunStore(runs)
    models = ("PVM", "KNN", "NC", "RAG", "RAG_SB", "IC", "NULL")
    rows = []
    for model_id in models:
        loaded = store.latest(campaign, model_id)
        if loaded is None:
            continue
        rep = evaluate_run(loaded, target, force=force)
        rows.append(rep)
        if plots_dir:
            plots_dir = Path(plots_dir)
            plots_dir.mkdir(parents=True, exist_ok=True)
            (plots_dir / f"{campaign}-{model_id.lower()}.csv").write_text(
                rep.plot_series_csv(), encoding="utf-8"
            )
    if not rows:
        raise CliError(f"no persisted runs for {campaign} under {runs}", EXIT_UNKNOWN)
    click.echo(f"{'model':8s} {'rmse':>9s} {'tau':>8s} {'gaps':>5s} {'distinct':>9s}")
    for rep in rows:
        rmse = "n/a" if rep.normalized_rmse is None else f"{rep.normalized_rmse:8.3%}"
        tau = "n/a" if rep.kendall_tau is None else f"{rep.kendall_tau:+8.4f}"
        click.echo(f"{rep.model:8s} {rmse:>9s} {tau:>8s} {rep.gap_count:5d} "
                   f"{rep.distinct_predictions:9d}")


@cli.command()
@click.option("--data-root", type=click.Path(file_okay=False, path_type=Path),
              default=Path("data"), show_default=True,
              help="Root holding campaigns/, runs/, models/, fixtures/.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@llm_options
def serve(data_root, host, port, mode, fixtures, llm_model, temperature,
          endpoint, api_key_env, max_in_flight, requests_per_minute):
    """Start the what-if JSON service."""
    import uvicorn

    from .service import create_app

    llm_config = LlmConfig(
        model=llm_model,
        temperature=temperature,
        mode=mode,
        endpoint=endpoint,
        api_key=os.environ.get(api_key_env),
        max_in_flight=max_in_flight,
        requests_per_minute=requests_per_minute,
    )
    app = create_app(data_root, llm_config=llm_config)
    uvicorn.run(app, host=host, port=port)


def main():
    cli(auto_envvar_prefix="PBCAST")


if __name__ == "__main__":
    main()
