"""Simulated-user evaluation: actors, error model, metrics over rounds, grid search.

Each scene is bound to one actor per query strategy. An actor scans the
current ranking from the top, marks the first p unjudged on-scene images
as relevant and the first p*m unjudged off-scene images as non-relevant,
skipping negatives whose cosine to the mean of this round's positives
exceeds the similarity threshold (near-duplicate guard). Judgments then
pass through the error model before reaching the session.

Randomness is drawn from PCG64 generators seeded with
``SeedSequence((seed, strategy_index, scene_index, round_index))``;
round 0 is reserved for session setup (query image choice), rounds
1..R feed the error model. Reports are therefore byte-identical across
runs and independent of any execution order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .formats import ingest_corpus
from .metrics import average_precision_at_k, recall_at_k
from .providers import StubProvider
from .session import Judgment, Query, SessionEngine
from .store import Corpus, RankedList, normalize

STRATEGY_TEXT = "natural-language"
STRATEGY_IMAGE = "image"
STRATEGIES = (STRATEGY_TEXT, STRATEGY_IMAGE)

CENTROID_COSINE_LIMIT = 0.6
CENTROID_MAX_ATTEMPTS = 10_000

DEFAULT_GRID: dict[str, list] = {
    "C": [0.1, 1, 10, 100],
    "positives": [1, 2, 3, 4],
    "negative_multiplier": [1, 2, 3, 4],
    "kernel": ["linear", "rbf", "poly", "sigmoid"],
    "retrieval_limit": [2500, 5000, 7500, 10000],
}


@dataclass(frozen=True)
class ActorConfig:
    scene: str
    strategy: str = STRATEGY_TEXT
    positives_per_round: int = 4
    negative_multiplier: int = 2
    similarity_threshold: float = 0.75
    error_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.positives_per_round < 1:
            raise ValueError("positives_per_round must be >= 1")
        if self.negative_multiplier < 1:
            raise ValueError("negative_multiplier must be >= 1")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0, 1]")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must be in [0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")


@dataclass
class SimulationConfig:
    """Everything run_simulation needs, loadable from JSON or TOML.

    The corpus is referenced either by ``corpus_path`` (+ optional
    ``labels_path``) or by ``synthetic`` generator parameters.
    """

    corpus_path: str | None = None
    labels_path: str | None = None
    synthetic: dict | None = None
    scenes: list[str] | None = None
    strategies: list[str] = field(default_factory=lambda: list(STRATEGIES))
    rounds: int = 10
    retrieval_limit: int = 2500
    svm: dict = field(default_factory=dict)
    positives_per_round: int = 4
    negative_multiplier: int = 2
    similarity_threshold: float = 0.75
    error_rate: float = 0.2
    k_map: int = 50
    k_recall: int = 200
    seed: int = 0
    prefix_enabled: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.k_map < 1 or self.k_recall < 1:
            raise ValueError("metric cutoffs must be >= 1")
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise ValueError(f"unknown strategy {strategy!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulationConfig":
        data = dict(raw)
        corpus = data.pop("corpus", {})
        svm = data.pop("svm", {})
        actor = data.pop("actor", {})
        kwargs = dict(
            corpus_path=corpus.get("path"),
            labels_path=corpus.get("labels"),
            synthetic=corpus.get("synthetic"),
            svm=dict(svm),
            positives_per_round=actor.get("positives", 4),
            negative_multiplier=actor.get("negative_multiplier", 2),
            similarity_threshold=actor.get("similarity_threshold", 0.75),
            error_rate=actor.get("error_rate", 0.2),
        )
        for key in (
            "scenes", "strategies", "rounds", "retrieval_limit",
            "k_map", "k_recall", "seed", "prefix_enabled",
        ):
            if key in data:
                kwargs[key] = data.pop(key)
        data.pop("grid", None)  # grid-search section is not the simulator's concern
        if data:
            raise ValueError(f"unknown config keys: {sorted(data)}")
        return cls(**kwargs)


def generate_synthetic_corpus(
    n_scenes: int,
    per_scene: int,
    dimension: int,
    intra_noise: float,
    seed: int,
) -> Corpus:
    """Labeled clustered corpus standing in for a real scene dataset.

    One unit centroid per scene, rejection-sampled so pairwise centroid
    cosine stays below 0.6; each image is the centroid plus Gaussian
    noise, re-normalized. Fully determined by ``seed``.
    """
    if n_scenes < 2:
        raise ValueError("need at least 2 scenes")
    if per_scene < 1:
        raise ValueError("need at least 1 image per scene")
    if dimension < 8:
        raise ValueError("dimension must be >= 8")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    centroids: list[np.ndarray] = []
    attempts = 0
    while len(centroids) < n_scenes:
        attempts += 1
        if attempts > CENTROID_MAX_ATTEMPTS:
            raise RuntimeError(
                f"could not place {n_scenes} centroids with pairwise cosine < "
                f"{CENTROID_COSINE_LIMIT} in {CENTROID_MAX_ATTEMPTS} attempts; "
                "increase the dimension"
            )
        candidate = normalize(rng.standard_normal(dimension))
        if all(float(np.dot(candidate, c)) < CENTROID_COSINE_LIMIT for c in centroids):
            centroids.append(candidate)

    ids: list[str] = []
    labels: list[str] = []
    vectors = np.empty((n_scenes * per_scene, dimension))
    row = 0
    for scene_index, centroid in enumerate(centroids):
        scene = f"scene-{scene_index:02d}"
        for image_index in range(per_scene):
            noisy = centroid + intra_noise * rng.standard_normal(dimension)
            vectors[row] = normalize(noisy)
            ids.append(f"img-{scene_index:02d}-{image_index:04d}")
            labels.append(scene)
            row += 1
    return Corpus(dimension, ids, vectors, labels=labels)


def actor_select(
    ranking: RankedList,
    labels: dict[str, str],
    already_judged: set[str],
    config: ActorConfig,
    corpus: Corpus,
) -> list[Judgment]:
    """Pick this round's judgments from the top of the ranking (pre-error).

    Returns fewer than p positives or p*m negatives when the ranking
    runs out of eligible candidates.
    """
    if len(ranking) == 0:
        raise ValueError("ranking must be non-empty")
    wanted_negatives = config.positives_per_round * config.negative_multiplier

    positives: list[str] = []
    for entry_id in ranking.ids:
        if len(positives) >= config.positives_per_round:
            break
        if entry_id in already_judged:
            continue
        if labels.get(entry_id) == config.scene:
            positives.append(entry_id)

    mu = None
    if positives:
        mu = normalize(np.sum([corpus.vector(i) for i in positives], axis=0))

    taken = already_judged | set(positives)
    negatives: list[str] = []
    for entry_id in ranking.ids:
        if len(negatives) >= wanted_negatives:
            break
        if entry_id in taken or labels.get(entry_id) == config.scene:
            continue
        if mu is not None:
            similarity = float(np.clip(np.dot(mu, corpus.vector(entry_id)), -1.0, 1.0))
            if similarity > config.similarity_threshold:
                continue
        negatives.append(entry_id)

    return [Judgment(i, True) for i in positives] + [Judgment(i, False) for i in negatives]


def apply_error_model(
    judgments: list[Judgment],
    error_rate: float,
    rng: np.random.Generator,
) -> list[Judgment]:
    """Perturb judgments: each is hit with probability ``error_rate``, and a
    hit is dropped or label-flipped with equal probability.

    Draw order per input judgment: one uniform for the hit test, then
    (only when hit) one uniform for the drop-vs-flip choice. Output
    preserves input order minus drops.
    """
    if not 0.0 <= error_rate <= 1.0:
        raise ValueError("error_rate must be in [0, 1]")
    out: list[Judgment] = []
    for judgment in judgments:
        r = rng.random()
        if r > 1.0 - error_rate:
            if rng.random() < 0.5:
                continue
            out.append(Judgment(judgment.image_id, not judgment.relevant))
        else:
            out.append(judgment)
    return out


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    scene: str
    round: int
    map_at_k: float
    recall_at_k: float


@dataclass
class SimulationReport:
    """Per-(strategy, scene, round) metrics plus per-strategy round means."""

    rows: list[ReportRow]
    strategies: list[str]
    scenes: list[str]
    rounds: int
    k_map: int
    k_recall: int

    def mean_map(self, strategy: str, round_index: int) -> float:
        values = [r.map_at_k for r in self.rows if r.strategy == strategy and r.round == round_index]
        return float(np.mean(values))

    def mean_recall(self, strategy: str, round_index: int) -> float:
        values = [r.recall_at_k for r in self.rows if r.strategy == strategy and r.round == round_index]
        return float(np.mean(values))

    def gain_pct(self, strategy: str, metric: str) -> float:
        first = self.mean_map(strategy, 0) if metric == "map" else self.mean_recall(strategy, 0)
        last = (
            self.mean_map(strategy, self.rounds)
            if metric == "map"
            else self.mean_recall(strategy, self.rounds)
        )
        if first == 0.0:
            return float("inf")
        return 100.0 * (last - first) / first

    def to_csv(self, path: str | Path) -> None:
        lines = [f"strategy,scene,round,map_at_{self.k_map},recall_at_{self.k_recall}"]
        for row in self.rows:
            lines.append(
                f"{row.strategy},{row.scene},{row.round},{row.map_at_k:.6f},{row.recall_at_k:.6f}"
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def aggregate_to_csv(self, path: str | Path) -> None:
        round_headers = ",".join(f"round_{i}" for i in range(1, self.rounds + 1))
        lines = [f"metric,strategy,initial,{round_headers},il_gain_pct"]
        for metric, mean_of in (
            (f"map_at_{self.k_map}", self.mean_map),
            (f"recall_at_{self.k_recall}", self.mean_recall),
        ):
            key = "map" if metric.startswith("map") else "recall"
            for strategy in self.strategies:
                means = ",".join(f"{mean_of(strategy, r):.6f}" for r in range(1, self.rounds + 1))
                gain = self.gain_pct(strategy, key)
                lines.append(
                    f"{metric},{strategy},{mean_of(strategy, 0):.6f},{means},{gain:.6f}"
                )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_corpus(config: SimulationConfig) -> Corpus:
    if config.synthetic is not None:
        params = dict(config.synthetic)
        return generate_synthetic_corpus(
            n_scenes=params.get("scenes", 20),
            per_scene=params.get("per_scene", 100),
            dimension=params.get("dimension", 64),
            intra_noise=params.get("intra_noise", 0.4),
            seed=params.get("seed", 0),
        )
    if config.corpus_path is None:
        raise ValueError("config must name a corpus path or synthetic parameters")
    return ingest_corpus(config.corpus_path, config.labels_path)


def _stream(seed: int, strategy_index: int, scene_index: int, round_index: int) -> np.random.Generator:
    key = np.random.SeedSequence((seed, strategy_index, scene_index, round_index))
    return np.random.Generator(np.random.PCG64(key))


def _build_query(
    config: SimulationConfig,
    strategy: str,
    strategy_index: int,
    scene: str,
    scene_index: int,
    corpus: Corpus,
) -> Query:
    if strategy == STRATEGY_TEXT:
        return Query(modality="text", text=scene, prefix_enabled=config.prefix_enabled)
    scene_ids = [i for i, lab in zip(corpus.ids, corpus.labels) if lab == scene]
    rng = _stream(config.seed, strategy_index, scene_index, 0)
    chosen = scene_ids[int(rng.integers(len(scene_ids)))]
    return Query(modality="image", image_id=chosen)


def run_simulation(config: SimulationConfig, corpus: Corpus | None = None) -> SimulationReport:
    """Run every (strategy, scene) actor for ``config.rounds`` rounds.

    Round 0 records the initial retrieval; each subsequent round is
    select -> error model -> feedback -> finetune -> measure.
    """
    if corpus is None:
        corpus = load_corpus(config)
    labels = corpus.label_map()
    scenes = config.scenes
    if scenes is None:
        scenes = sorted(set(labels.values()))
    missing = [s for s in scenes if s not in set(labels.values())]
    if missing:
        raise ValueError(f"scenes not present in corpus labels: {missing}")

    engine = SessionEngine(
        corpus,
        StubProvider(corpus.dimension, seed=config.seed),
        svm_params=config.svm,
        retrieval_limit=config.retrieval_limit,
    )

    rows: list[ReportRow] = []
    for strategy_index, strategy in enumerate(config.strategies):
        for scene_index, scene in enumerate(scenes):
            relevant = {i for i, lab in labels.items() if lab == scene}
            actor = ActorConfig(
                scene=scene,
                strategy=strategy,
                positives_per_round=config.positives_per_round,
                negative_multiplier=config.negative_multiplier,
                similarity_threshold=config.similarity_threshold,
                error_rate=config.error_rate,
                seed=config.seed,
            )
            query = _build_query(config, strategy, strategy_index, scene, scene_index, corpus)
            session = engine.start_session(query)
            rows.append(ReportRow(
                strategy, scene, 0,
                average_precision_at_k(session.current_ranking, relevant, config.k_map),
                recall_at_k(session.current_ranking, relevant, config.k_recall),
            ))
            seen: set[str] = set()
            for round_index in range(1, config.rounds + 1):
                picked = actor_select(session.current_ranking, labels, seen, actor, corpus)
                seen.update(j.image_id for j in picked)
                rng = _stream(config.seed, strategy_index, scene_index, round_index)
                noisy = apply_error_model(picked, config.error_rate, rng)
                engine.submit_feedback(session, noisy)
                engine.finetune(session)
                rows.append(ReportRow(
                    strategy, scene, round_index,
                    average_precision_at_k(session.current_ranking, relevant, config.k_map),
                    recall_at_k(session.current_ranking, relevant, config.k_recall),
                ))
    return SimulationReport(
        rows=rows,
        strategies=list(config.strategies),
        scenes=list(scenes),
        rounds=config.rounds,
        k_map=config.k_map,
        k_recall=config.k_recall,
    )


@dataclass(frozen=True)
class GridRow:
    C: float
    positives: int
    negative_multiplier: int
    kernel: str
    retrieval_limit: int
    final_map: float
    final_recall: float
    initial_map: float


def enumerate_grid(grid: dict[str, list] | None = None) -> list[dict]:
    """Cartesian product of the parameter grid, in a fixed key order."""
    cells = dict(DEFAULT_GRID)
    if grid:
        unknown = set(grid) - set(DEFAULT_GRID)
        if unknown:
            raise ValueError(f"unknown grid parameters: {sorted(unknown)}")
        cells.update(grid)
    keys = list(DEFAULT_GRID)
    return [
        dict(zip(keys, combo))
        for combo in itertools.product(*(cells[key] for key in keys))
    ]


def grid_search(
    grid: dict[str, list] | None,
    base_config: SimulationConfig,
    corpus: Corpus | None = None,
) -> list[GridRow]:
    """Run the simulation per grid cell and rank the configurations.

    Ordered by final-round mean MAP (descending); ties prefer the lower
    negative multiplier, then the lower retrieval limit.
    """
    if corpus is None:
        corpus = load_corpus(base_config)
    results: list[GridRow] = []
    for cell in enumerate_grid(grid):
        config = replace(
            base_config,
            svm={**base_config.svm, "C": cell["C"], "kernel": cell["kernel"]},
            positives_per_round=cell["positives"],
            negative_multiplier=cell["negative_multiplier"],
            retrieval_limit=cell["retrieval_limit"],
        )
        report = run_simulation(config, corpus=corpus)
        final_map = float(np.mean([
            report.mean_map(s, config.rounds) for s in config.strategies
        ]))
        final_recall = float(np.mean([
            report.mean_recall(s, config.rounds) for s in config.strategies
        ]))
        initial_map = float(np.mean([report.mean_map(s, 0) for s in config.strategies]))
        results.append(GridRow(
            C=cell["C"],
            positives=cell["positives"],
            negative_multiplier=cell["negative_multiplier"],
            kernel=cell["kernel"],
            retrieval_limit=cell["retrieval_limit"],
            final_map=final_map,
            final_recall=final_recall,
            initial_map=initial_map,
        ))
    results.sort(key=lambda row: (-row.final_map, row.negative_multiplier, row.retrieval_limit))
    return results


def grid_rows_to_csv(rows: list[GridRow], path: str | Path, k_map: int = 50, k_recall: int = 200) -> None:
    lines = [
        "C,positives,negative_multiplier,kernel,retrieval_limit,"
        f"map_at_{k_map}_final,recall_at_{k_recall}_final,map_at_{k_map}_initial"
    ]
    for row in rows:
        lines.append(
            f"{row.C},{row.positives},{row.negative_multiplier},{row.kernel},"
            f"{row.retrieval_limit},{row.final_map:.6f},{row.final_recall:.6f},{row.initial_map:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
