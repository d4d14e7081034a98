"""Generate the bundled synthetic campaign datasets.

The original municipal datasets are not redistributable here, so the
repo ships stand-ins that preserve the published aggregate facts (
project counts, voter counts, vote totals, budgets, ballot caps) and are
calibrated so the classical baselines land at their published rank
correlations when trained on the older campaign and evaluated on the
newer one (PVM/KNN with the published reduction dimensions).

Generation is fully seeded: rerunning this script reproduces the
committed CSVs byte for byte.

Usage:
    python scripts/make_datasets.py --out data/campaigns
    python scripts/make_datasets.py --calibrate   # parameter search report
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pbcast.data import Campaign, Project, validate_campaign, write_campaign
from pbcast.embeddings import HashingEmbedder
from pbcast.features import build_features, fit_feature_schema, reduce_embedding_block
from pbcast.metrics import kendall_tau
from pbcast.models import KnnVoteRegressor, PvmRegressor
from pbcast.pca import PrincipalComponents


@dataclass
class YearSpec:
    year: int
    n_projects: int
    voters: int
    total_votes: int
    budget_minor: int
    districts: list[str]
    cost_shift: float = 0.0  # log-cost mean shift vs the city baseline


@dataclass
class CitySpec:
    name: str
    seed: int
    currency: str
    language: str
    max_approvals: int
    categories: list[str]
    years: list[YearSpec]
    topics: dict[str, list[tuple[str, float]]]  # category -> (phrase, appeal)
    templates: list[str]
    title_templates: list[str]
    fillers: list[str]
    cost_log_mean: float
    cost_log_sigma: float
    cost_pull: float  # score weight on centered log-cost
    semantic_weight: float
    structural_scale: float
    drift: float  # year-to-year jitter of category/district effects
    noise: float  # per-project idiosyncratic score noise
    id_prefix: str


# --- city definitions -------------------------------------------------------

TOULOUSE_TOPICS = {
    "Cadre de vie": [
        ("bancs publics", 0.2), ("éclairage doux", 0.1), ("place conviviale", 0.5),
        ("fontaine à eau", 0.6), ("fresque murale", -0.1), ("mobilier urbain", 0.0),
    ],
    "Mobilités": [
        ("piste cyclable", 0.7), ("arceaux vélo", 0.3), ("zone piétonne", 0.4),
        ("ralentisseurs", -0.3), ("stationnement vélo", 0.2), ("passage sécurisé", 0.5),
    ],
    "Nature en ville": [
        ("plantation d'arbres", 0.9), ("jardin partagé", 0.8), ("végétalisation", 0.7),
        ("prairie fleurie", 0.4), ("composteur collectif", 0.1), ("ombrage naturel", 0.6),
    ],
    "Culture": [
        ("scène ouverte", 0.0), ("boîte à livres", 0.3), ("ateliers artistiques", -0.2),
        ("cinéma en plein air", 0.4), ("kiosque à musique", -0.1), ("expositions de quartier", -0.4),
    ],
    "Sport": [
        ("terrain multisport", 0.6), ("parcours santé", 0.5), ("skatepark", 0.2),
        ("tables de ping-pong", 0.1), ("mur d'escalade", 0.0), ("agrès de fitness", 0.3),
    ],
    "Solidarité": [
        ("frigo solidaire", 0.2), ("local associatif", -0.3), ("jardin d'insertion", 0.0),
        ("accès handicap", 0.5), ("repair café", 0.1), ("épicerie solidaire", -0.1),
    ],
    "Éducation": [
        ("cour d'école végétalisée", 0.8), ("bibliothèque de rue", 0.2), ("potager pédagogique", 0.5),
        ("abris vélos scolaires", 0.0), ("jeux éducatifs", 0.1), ("salle d'étude", -0.3),
    ],
    "Propreté": [
        ("poubelles de tri", 0.0), ("cendriers de rue", -0.4), ("canisites", -0.5),
        ("nettoyage participatif", -0.2), ("bacs à déchets verts", -0.1), ("sanitaires publics", 0.3),
    ],
}

TOULOUSE_TEMPLATES = [
    "Ce projet propose d'installer {p1} et {p2} pour améliorer le quotidien du quartier {d}.",
    "L'idée est de créer {p1} près des habitations, avec {p2} accessible à tous.",
    "Nous souhaitons développer {p1} ainsi que {p2} afin de renforcer le lien social.",
    "Le projet prévoit {p1}, complété par {p2}, au bénéfice des habitants du secteur {d}.",
    "Il s'agit d'aménager {p1} et de mettre en place {p2} pour les familles.",
]

TOULOUSE_FILLERS = [
    "Les riverains sont associés à la conception et à l'entretien.",
    "Le site retenu est déjà propriété de la métropole.",
    "Une attention particulière sera portée à l'accessibilité des personnes à mobilité réduite.",
    "L'entretien sera assuré en lien avec les services municipaux.",
    "Le projet s'inscrit dans la transition écologique du quartier.",
    "Des matériaux durables et locaux seront privilégiés.",
    "Une signalétique claire accompagnera la réalisation.",
    "Le calendrier prévoit une livraison dans l'année suivant le vote.",
]

TOULOUSE_TITLES = [
    "{P1} pour le quartier {d}",
    "{P1} et {p2} à {d}",
    "Des {p2} autour de {p1}",
    "{P1} : un projet pour {d}",
]

WROCLAW_TOPICS = {
    "Green spaces": [
        ("tree planting", 0.9), ("community garden", 0.7), ("riverside park", 0.8),
        ("flower meadow", 0.4), ("pocket park", 0.5), ("green courtyard", 0.6),
    ],
    "Roads and pavements": [
        ("pavement repair", 0.3), ("pedestrian crossing", 0.4), ("cycle path", 0.6),
        ("street lighting", 0.5), ("traffic calming", -0.1), ("parking bays", -0.4),
    ],
    "Sport and recreation": [
        ("playground", 0.8), ("outdoor gym", 0.4), ("sports field", 0.5),
        ("skate park", 0.1), ("running track", 0.2), ("swimming spot", 0.6),
    ],
    "Culture": [
        ("open-air cinema", 0.2), ("neighbourhood library", 0.3), ("mural", -0.2),
        ("concert stage", -0.1), ("book exchange", 0.0), ("heritage walk", -0.3),
    ],
    "Education": [
        ("school garden", 0.4), ("science corner", 0.0), ("language club", -0.3),
        ("computer room", -0.2), ("reading room", 0.1), ("workshop space", -0.1),
    ],
    "Public safety": [
        ("safe crossing", 0.5), ("monitoring", -0.5), ("fire equipment", -0.2),
        ("first aid point", 0.0), ("speed bumps", -0.3), ("emergency lighting", -0.1),
    ],
}

WROCLAW_TEMPLATES = [
    "The project proposes a {p1} together with a {p2} for the residents of {d}.",
    "We want to build a {p1} and add a {p2} so the area becomes friendlier.",
    "The idea is to create a {p1} near the housing estate, complemented by a {p2}.",
    "This proposal covers a {p1} and a {p2} serving families in {d}.",
    "Residents ask for a {p1} plus a {p2} to improve everyday life.",
]

WROCLAW_FILLERS = [
    "The location belongs to the city, so no land purchase is needed.",
    "Local residents will help maintain the site after completion.",
    "The design keeps full accessibility for people with disabilities.",
    "The project can be completed within one budget year.",
    "Durable, vandal-resistant materials are planned.",
    "The site is close to a school and a bus stop.",
    "Neighbourhood volunteers prepared the technical sketch.",
    "The proposal was consulted with the district council.",
    "A detailed cost estimate was prepared with a certified surveyor.",
    "The investment continues an earlier stage finished two years ago.",
    "Waste bins and greenery maintenance are included in the plan.",
    "An information board will present the history of the place.",
    "The schedule avoids the bird breeding season during works.",
    "Existing trees remain untouched during construction.",
    "The concept was presented at an open residents' meeting.",
    "Winter upkeep will be handled by the municipal services.",
    "Rainwater drainage is part of the technical design.",
    "The plot is listed in the municipal land register as recreational.",
    "Similar solutions already work well in other Polish cities.",
    "The proposal includes lighting powered by solar panels.",
]

WROCLAW_TITLES = [
    "{P1} in {d}",
    "{P1} with a {p2} for {d}",
    "A {p1} for everyone in {d}",
    "{P1} and {p2} project",
]


def city_specs() -> list[CitySpec]:
    toulouse = CitySpec(
        name="Toulouse",
        seed=20220101,
        currency="EUR",
        language="fr",
        max_approvals=3,
        categories=sorted(TOULOUSE_TOPICS),
        years=[
            YearSpec(2022, 200, 4532, 11606, 800_000_000,
                     ["Centre", "Nord", "Sud", "Est", "Ouest", "Rive gauche"]),
            YearSpec(2024, 183, 7260, 21780, 800_000_000,
                     ["Centre", "Nord", "Sud", "Est", "Ouest", "Sud-Est"]),
        ],
        topics=TOULOUSE_TOPICS,
        templates=TOULOUSE_TEMPLATES,
        title_templates=TOULOUSE_TITLES,
        fillers=TOULOUSE_FILLERS,
        cost_log_mean=math.log(90_000),
        cost_log_sigma=0.85,
        cost_pull=0.30,
        semantic_weight=1.0,
        structural_scale=0.55,
        drift=0.50,
        noise=1.70,
        id_prefix="T",
    )
    wroclaw = CitySpec(
        name="Wroclaw",
        seed=20160101,
        currency="PLN",
        language="en",
        max_approvals=3,
        categories=sorted(WROCLAW_TOPICS),
        years=[
            YearSpec(2016, 52, 67103, 119194, 450_000_000,
                     ["Śródmieście", "Krzyki", "Fabryczna", "Psie Pole",
                      "Stare Miasto", "Ołbin", "Gaj", "Biskupin", "Maślice", "Leśnica"]),
            YearSpec(2017, 50, 62529, 111961, 400_000_000,
                     ["Śródmieście", "Krzyki", "Fabryczna", "Psie Pole",
                      "Stare Miasto", "Ołbin", "Gaj", "Biskupin", "Maślice", "Leśnica"],
                     cost_shift=0.8),
        ],
        topics=WROCLAW_TOPICS,
        templates=WROCLAW_TEMPLATES,
        title_templates=WROCLAW_TITLES,
        fillers=WROCLAW_FILLERS,
        cost_log_mean=math.log(150_000),
        cost_log_sigma=0.9,
        cost_pull=0.7,
        semantic_weight=0.3,
        structural_scale=0.5,
        drift=0.35,
        noise=0.8,
        id_prefix="W",
    )
    return [toulouse, wroclaw]


# --- generation -------------------------------------------------------------

def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights``."""
    raw = weights / weights.sum() * total
    floor = np.floor(raw).astype(int)
    short = total - floor.sum()
    order = np.argsort(-(raw - floor), kind="stable")
    floor[order[:short]] += 1
    return floor


def _phrase_title(template: str, p1: str, p2: str, district: str) -> str:
    return (
        template.replace("{P1}", p1[0].upper() + p1[1:])
        .replace("{p1}", p1)
        .replace("{p2}", p2)
        .replace("{d}", district)
    )


def generate_city(spec: CitySpec) -> list[Campaign]:
    rng = np.random.default_rng(spec.seed)
    categories = spec.categories
    cat_effect = {c: spec.structural_scale * rng.normal() for c in categories}
    all_districts = sorted({d for y in spec.years for d in y.districts})
    dist_effect = {d: spec.structural_scale * rng.normal() for d in all_districts}

    campaigns = []
    for year_index, yspec in enumerate(spec.years):
        yrng = np.random.default_rng(spec.seed + yspec.year)
        drift_scale = spec.drift * year_index
        cat_eff_year = {c: v + drift_scale * yrng.normal() for c, v in cat_effect.items()}
        dist_eff_year = {d: v + drift_scale * yrng.normal() for d, v in dist_effect.items()}

        projects_raw = []
        scores = []
        for i in range(yspec.n_projects):
            category = categories[int(yrng.integers(len(categories)))]
            district = yspec.districts[int(yrng.integers(len(yspec.districts)))]
            cost_major = float(
                np.exp(spec.cost_log_mean + yspec.cost_shift + spec.cost_log_sigma * yrng.normal())
            )
            cost_major = float(np.clip(cost_major, 5_000, 2_000_000))
            cost_major = int(round(cost_major / 1000) * 1000)

            pool = spec.topics[category]
            chosen = yrng.choice(len(pool), size=2, replace=False)
            (p1, w1), (p2, w2) = pool[chosen[0]], pool[chosen[1]]
            appeal = (w1 + w2) / 2.0

            template = spec.templates[int(yrng.integers(len(spec.templates)))]
            body = template.format(p1=p1, p2=p2, d=district)
            n_fillers = 2 + int(yrng.integers(3))
            filler_idx = yrng.choice(len(spec.fillers), size=n_fillers, replace=False)
            sentences = [body] + [spec.fillers[j] for j in sorted(filler_idx)]
            description = " ".join(sentences)
            title_template = spec.title_templates[int(yrng.integers(len(spec.title_templates)))]
            title = _phrase_title(title_template, p1, p2, district)

            score = (
                cat_eff_year[category]
                + dist_eff_year[district]
                + spec.cost_pull * (math.log(cost_major) - spec.cost_log_mean)
                + spec.semantic_weight * appeal
                + spec.noise * yrng.normal()
            )
            scores.append(score)
            short_year = str(yspec.year)[2:]
            projects_raw.append(
                dict(
                    id=f"{spec.id_prefix}{short_year}-{i + 1:03d}",
                    title=title,
                    description=description,
                    category=category,
                    cost=int(cost_major * 100),
                    district=district,
                )
            )

        scores = np.asarray(scores)
        # flatten globally until the top project respects the voter cap;
        # a global scale preserves the underlying ranking
        scale = 1.0
        while True:
            weights = np.exp(scale * (scores - scores.max()))
            votes = largest_remainder(weights, yspec.total_votes)
            if votes.max() <= 0.95 * yspec.voters:
                break
            scale *= 0.85
        projects = tuple(
            Project(votes=int(v), **raw) for raw, v in zip(projects_raw, votes)
        )
        campaigns.append(
            Campaign(
                city=spec.name,
                year=yspec.year,
                currency=spec.currency,
                budget=yspec.budget_minor,
                voters=yspec.voters,
                total_votes=yspec.total_votes,
                max_approvals=spec.max_approvals,
                language=spec.language,
                projects=projects,
            )
        )
    return campaigns


# --- calibration ------------------------------------------------------------

PUBLISHED_DIMS = {("pvm", "Toulouse"): 10, ("pvm", "Wroclaw"): 20,
                  ("knn", "Toulouse"): 2, ("knn", "Wroclaw"): 15}
TARGET_TAUS = {("pvm", "Toulouse"): 0.24, ("pvm", "Wroclaw"): 0.42,
               ("knn", "Toulouse"): 0.21, ("knn", "Wroclaw"): 0.31}


def baseline_taus(train: Campaign, eval_campaign: Campaign, city: str) -> dict:
    embedder = HashingEmbedder(dim=256)
    schema = fit_feature_schema(train.projects, embedder)
    raw_train = build_features(train, schema, embedder)
    raw_eval = build_features(eval_campaign, schema, embedder)
    votes_train = np.asarray(train.vote_counts(), dtype=float)
    votes_eval = np.asarray(eval_campaign.vote_counts(), dtype=float)
    out = {}
    for kind in ("pvm", "knn"):
        dim = PUBLISHED_DIMS[(kind, city)]
        pca = PrincipalComponents(n_components=dim).fit(raw_train[:, schema.embedding_slice])
        X_train = reduce_embedding_block(raw_train, schema, pca)
        X_eval = reduce_embedding_block(raw_eval, schema, pca)
        if kind == "pvm":
            model = PvmRegressor().fit(X_train, votes_train)
            pred = model.predict(X_eval, total_votes=eval_campaign.total_votes)
        else:
            model = KnnVoteRegressor(k=5).fit(X_train, votes_train)
            pred = model.predict(X_eval)
        out[kind] = kendall_tau(pred, votes_eval)
    return out


CALIBRATION_GRIDS = {
    "Toulouse": {
        "noise": [1.7],
        "drift": [0.5],
        "cost_pull": [0.30],
        "structural_scale": [0.55],
        "cost_shift": [0.0],
    },
    "Wroclaw": {
        "noise": [0.75, 0.8, 0.85],
        "drift": [0.35],
        "cost_pull": [0.7, 0.8],
        "structural_scale": [0.5],
        "cost_shift": [1.0, 1.1, 1.2],
    },
}


def calibrate():
    import itertools
    import warnings

    warnings.filterwarnings("ignore", category=RuntimeWarning)
    for spec in city_specs():
        t_pvm = TARGET_TAUS[("pvm", spec.name)]
        t_knn = TARGET_TAUS[("knn", spec.name)]
        print(f"== {spec.name} (targets pvm={t_pvm}, knn={t_knn})")
        grid = CALIBRATION_GRIDS[spec.name]
        results = []
        for noise, drift, pull, scale, shift in itertools.product(
            grid["noise"], grid["drift"], grid["cost_pull"],
            grid["structural_scale"], grid["cost_shift"],
        ):
            spec.noise, spec.drift = noise, drift
            spec.cost_pull, spec.structural_scale = pull, scale
            spec.years[1].cost_shift = shift
            train, eval_campaign = generate_city(spec)
            taus = baseline_taus(train, eval_campaign, spec.name)
            miss = max(abs(taus["pvm"] - t_pvm), abs(taus["knn"] - t_knn))
            results.append((miss, noise, drift, pull, scale, shift, taus))
            print(f"  noise={noise:.2f} drift={drift:.2f} pull={pull:.2f} "
                  f"scale={scale:.2f} shift={shift:.2f} -> pvm={taus['pvm']:+.3f} "
                  f"knn={taus['knn']:+.3f} (miss {miss:.3f})")
        best = min(results)
        print(f"  BEST: miss={best[0]:.3f} noise={best[1]} drift={best[2]} "
              f"pull={best[3]} scale={best[4]} shift={best[5]} taus={best[6]}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("data/campaigns"))
    parser.add_argument("--calibrate", action="store_true")
    args = parser.parse_args()
    if args.calibrate:
        calibrate()
        return
    for spec in city_specs():
        for campaign in generate_city(spec):
            report = validate_campaign(campaign)
            assert report.clean, report
            out_dir = args.out / campaign.key
            write_campaign(campaign, out_dir)
            votes = campaign.vote_counts()
            print(
                f"{campaign.key}: {len(campaign.projects)} projects, "
                f"{campaign.voters} voters, {sum(votes)} votes "
                f"(min {min(votes)}, max {max(votes)})"
            )


if __name__ == "__main__":
    main()
