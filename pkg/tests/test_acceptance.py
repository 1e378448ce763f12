"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured numbers (run with -s to see them inline).
"""

import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from xcal.cli import main
from xcal.metrics import average_precision_at_k, recall_at_k
from xcal.providers import StubProvider
from xcal.service import create_app
from xcal.session import Judgment, Query, SessionEngine
from xcal.simulate import (
    ActorConfig,
    SimulationConfig,
    actor_select,
    apply_error_model,
    generate_synthetic_corpus,
    grid_search,
    run_simulation,
)
from xcal.store import Corpus, RankedList, initial_retrieval, normalize
from xcal.svm import KernelSVC, _cross_kernel, _train_gram, rank_by_confidence

from oracles import (
    brute_force_ap,
    brute_force_recall,
    dual_objective,
    exhaustive_ranking,
    oracle_bias,
    oracle_decision,
    qp_solve,
)

DEFAULTS_TOML = Path(__file__).resolve().parent.parent / "configs" / "defaults.toml"


def unit_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def balanced_labels(rng, n):
    y = np.ones(n)
    y[: n // 2] = -1
    rng.shuffle(y)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    return y


def test_svm_oracle_equivalence():
    """200 random instances, all four kernels: SMO vs projected-gradient QP."""
    started = time.monotonic()
    rng = np.random.default_rng(42)
    kernels = ["linear", "rbf", "poly", "sigmoid"]
    c_values = [0.1, 1.0, 10.0, 100.0]
    worst_objective = 0.0
    worst_decision = 0.0
    for trial in range(200):
        n = int(rng.integers(6, 21))
        d = int(rng.integers(2, 17))
        X = unit_rows(rng, n, d)
        y = balanced_labels(rng, n)
        kernel = kernels[trial % 4]
        C = c_values[(trial // 4) % 4]
        if kernel == "sigmoid":
            # conditionally positive definite regime: the dual is convex on
            # the constraint subspace, so oracle equivalence is well posed
            gamma = 1.0 / (d * X.var(axis=0).mean())
            coef0 = -3.0 * gamma
        else:
            gamma, coef0 = "scale", 0.0
        model = KernelSVC(C=C, kernel=kernel, gamma=gamma, coef0=coef0, tol=1e-6).fit(X, y)
        K = _train_gram(kernel, model.gamma_, model.degree, coef0, X)
        alpha_oracle = qp_solve(K, y, C)
        alpha_mine = np.zeros(n)
        alpha_mine[model.support_] = np.abs(model.dual_coef_)
        w_mine = dual_objective(alpha_mine, K, y)
        w_oracle = dual_objective(alpha_oracle, K, y)
        assert w_mine >= w_oracle - 1e-3
        assert abs(w_mine - w_oracle) <= 1e-3

        evaluation = unit_rows(rng, 8, d)
        K_eval = _cross_kernel(kernel, model.gamma_, model.degree, coef0, X, evaluation)
        reference = oracle_decision(alpha_oracle, oracle_bias(alpha_oracle, K, y, C), y, K_eval)
        mine = model.decision_function(evaluation)
        assert np.max(np.abs(mine - reference)) <= 1e-3
        worst_objective = max(worst_objective, abs(w_mine - w_oracle))
        worst_decision = max(worst_decision, float(np.max(np.abs(mine - reference))))

    X_xor = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y_xor = np.array([1, 1, -1, -1])
    assert (KernelSVC(C=10.0, kernel="rbf").fit(X_xor, y_xor).predict(X_xor) == y_xor).all()

    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    print(f"\n[PASS] SVM oracle equivalence: 200 instances, "
          f"worst obj {worst_objective:.2e}, worst decision {worst_decision:.2e}, {elapsed:.1f}s")


def test_metric_oracles():
    """AP@K and Recall@K equal brute force on 1,000 random cases."""
    started = time.monotonic()
    rng = np.random.default_rng(404)
    for _ in range(1000):
        n = int(rng.integers(1, 300))
        universe = [f"item-{i}" for i in range(n)]
        order = list(rng.permutation(universe))
        relevant = frozenset(
            rng.choice(universe, size=int(rng.integers(1, n + 1)), replace=False).tolist()
        )
        k = int(rng.integers(1, 260))
        ranking = RankedList([(i, 0.0) for i in order], "initial-cosine")
        assert recall_at_k(ranking, relevant, k) == brute_force_recall(order, relevant, k)
        assert abs(average_precision_at_k(ranking, relevant, k)
                   - brute_force_ap(order, relevant, k)) <= 1e-12

    analytic = ["x1", "r1", "x2", "r2"] + [f"pad{i}" for i in range(46)]
    ranking = RankedList([(i, 0.0) for i in analytic], "initial-cosine")
    assert abs(average_precision_at_k(ranking, {"r1", "r2"}, 50) - 0.5) <= 1e-12

    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    print(f"\n[PASS] metric oracles: 1000 random cases exact, AP analytic 0.5, {elapsed:.1f}s")


def test_retrieval_exactness():
    """initial_retrieval equals the exhaustive-sort oracle up to 10,000 records."""
    started = time.monotonic()
    rng = np.random.default_rng(77)
    for n, d in ((100, 8), (2500, 32), (10_000, 64)):
        ids = [f"rec-{i:06d}" for i in range(n)]
        matrix = rng.normal(size=(n, d))
        # inject exact duplicates to exercise the id tie-break
        matrix[1] = matrix[0]
        matrix[2] = matrix[0]
        corpus = Corpus(d, ids, matrix)
        for _ in range(3):
            query = rng.normal(size=d)
            mine = initial_retrieval(query, corpus, n)
            reference = exhaustive_ranking(corpus, query, n)
            assert mine.ids == [i for i, _ in reference]

    corpus = Corpus(8, [f"r{i}" for i in range(50)], rng.normal(size=(50, 8)))
    hit = initial_retrieval(corpus.vector("r7"), corpus, 5)
    assert hit.ids[0] == "r7"
    assert hit.entries[0][1] == pytest.approx(1.0, abs=1e-9)

    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    print(f"\n[PASS] retrieval exactness: oracle id-order match at n=100/2500/10000, {elapsed:.1f}s")


def test_error_model_statistics():
    """20% error rate over 10,000 judgments: binomial band and drop/flip balance."""
    judgments = [Judgment(f"i{k}", k % 2 == 0) for k in range(10_000)]
    out = apply_error_model(judgments, 0.2, np.random.default_rng(2024))
    by_id = {j.image_id: j.relevant for j in out}
    dropped = sum(1 for j in judgments if j.image_id not in by_id)
    flipped = sum(1 for j in judgments if j.image_id in by_id and by_id[j.image_id] != j.relevant)
    affected = dropped + flipped
    fraction = affected / len(judgments)
    balance = abs(dropped - flipped) / affected
    assert 0.185 <= fraction <= 0.215
    assert balance < 0.15

    untouched = apply_error_model(judgments, 0.0, np.random.default_rng(5))
    assert untouched == judgments

    print(f"\n[PASS] error model: affected {fraction:.4f} in [0.185, 0.215], "
          f"|drops-flips|/affected {balance:.3f} < 0.15, rate-0 identity exact")


def test_protocol_fidelity():
    """Near-duplicate filter, no re-judging across rounds, tuned defaults."""
    # constructed near-duplicate: negative almost parallel to the positive mean
    base = np.eye(8)[0]
    near = normalize(base + 0.05 * np.eye(8)[1])   # cosine ~ 0.9987
    far = np.eye(8)[2]
    corpus = Corpus(
        8,
        ["pos-a", "pos-b", "near-dup", "clean-neg"],
        np.vstack([base, normalize(base + 0.01 * np.eye(8)[3]), near, far]),
        labels=["t", "t", "o", "o"],
    )
    config = ActorConfig(scene="t", positives_per_round=2, negative_multiplier=1,
                         similarity_threshold=0.75, error_rate=0.0)
    ranking = RankedList([(i, 1.0) for i in corpus.ids], "initial-cosine")
    picked = actor_select(ranking, corpus.label_map(), set(), config, corpus)
    negatives = [j.image_id for j in picked if not j.relevant]
    assert negatives == ["clean-neg"]
    mu = normalize(corpus.vector("pos-a") + corpus.vector("pos-b"))
    assert float(np.dot(mu, corpus.vector("near-dup"))) > 0.75

    # error model off: run a full actor loop and require ids never repeat
    loop_corpus = generate_synthetic_corpus(4, 30, 16, 0.3, seed=31)
    labels = loop_corpus.label_map()
    engine = SessionEngine(loop_corpus, StubProvider(16, seed=0), retrieval_limit=120)
    session = engine.start_session(Query(modality="text", text="scene-02"))
    actor = ActorConfig(scene="scene-02", error_rate=0.0)
    seen: set[str] = set()
    for _ in range(6):
        picked = actor_select(session.current_ranking, labels, seen, actor, loop_corpus)
        picked_ids = [j.image_id for j in picked]
        assert not set(picked_ids) & seen
        assert len(set(picked_ids)) == len(picked_ids)
        seen.update(picked_ids)
        engine.submit_feedback(session, picked)
        engine.finetune(session)

    svm_defaults = KernelSVC()
    sim_defaults = SimulationConfig()
    assert svm_defaults.C == 10.0
    assert svm_defaults.kernel == "rbf"
    assert sim_defaults.positives_per_round == 4
    assert sim_defaults.negative_multiplier == 2
    assert sim_defaults.retrieval_limit == 2500

    print("\n[PASS] protocol fidelity: 0.75 filter holds, no id judged twice, "
          "defaults C=10/rbf/4 positives/x2 negatives/limit 2500")


def test_interactive_gain_trend():
    """Synthetic 20x100 corpus, both strategies, error on, 10 rounds."""
    started = time.monotonic()
    config = SimulationConfig(
        synthetic=dict(scenes=20, per_scene=100, dimension=64, intra_noise=0.4, seed=11),
        rounds=10,
        seed=42,
    )
    report = run_simulation(config)
    summary = []
    for strategy in report.strategies:
        maps = [report.mean_map(strategy, r) for r in range(11)]
        recalls = [report.mean_recall(strategy, r) for r in range(11)]
        assert maps[10] >= 1.5 * maps[0], f"{strategy}: map {maps[0]:.3f} -> {maps[10]:.3f}"
        assert recalls[10] > recalls[0]
        non_decreasing = sum(1 for a, b in zip(maps, maps[1:]) if b >= a)
        assert non_decreasing >= 8
        summary.append(f"{strategy}: map x{maps[10]/maps[0]:.1f}, recall x{recalls[10]/recalls[0]:.1f}, "
                       f"{non_decreasing}/10 monotone")
    elapsed = time.monotonic() - started
    assert elapsed < 300.0
    print(f"\n[PASS] interactive gain: {'; '.join(summary)}, {elapsed:.0f}s")


def test_simulation_determinism(tmp_path):
    """simulate --config defaults.toml twice: byte-identical CSVs; same for a 2x2 grid."""
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["simulate", "--config", str(DEFAULTS_TOML), "--out", str(out_a)]) == 0
    assert main(["simulate", "--config", str(DEFAULTS_TOML), "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    assert (tmp_path / "a_aggregate.csv").read_bytes() == (tmp_path / "b_aggregate.csv").read_bytes()

    grid_config = SimulationConfig(
        synthetic=dict(scenes=3, per_scene=15, dimension=16, intra_noise=0.25, seed=5),
        rounds=2, retrieval_limit=45, seed=7, strategies=["natural-language"],
    )
    sub_grid = {"C": [1, 10], "kernel": ["linear", "rbf"], "positives": [2],
                "negative_multiplier": [1], "retrieval_limit": [45]}
    table_a = grid_search(sub_grid, grid_config)
    table_b = grid_search(sub_grid, grid_config)
    assert table_a == table_b

    print("\n[PASS] determinism: defaults.toml CSVs byte-identical, 2x2 grid tables identical")


def test_service_equivalence():
    """Scripted HTTP session reproduces the exact ranking of direct engine calls."""
    corpus = generate_synthetic_corpus(4, 25, 16, 0.25, seed=19)

    http_engine = SessionEngine(corpus, StubProvider(corpus.dimension, seed=0), retrieval_limit=100)
    with TestClient(create_app(http_engine)) as client:
        created = client.post("/sessions", json={"query": {"modality": "text", "text": "scene-01"}})
        assert created.status_code == 201
        session_id = created.json()["session_id"]
        ids = [e["image_id"] for e in created.json()["page"]["entries"]]
        judgments = [{"image_id": i, "relevant": True} for i in ids[:4]]
        judgments += [{"image_id": i, "relevant": False} for i in ids[4:12]]
        accepted = client.post(f"/sessions/{session_id}/feedback", json={"judgments": judgments})
        assert accepted.json() == {"accepted_count": 12}
        finetuned = client.post(f"/sessions/{session_id}/finetune")
        assert finetuned.json()["round"] == 1
        http_pages = []
        for offset in (0, 50):
            page = client.get(f"/sessions/{session_id}/results",
                              params={"offset": offset, "limit": 50}).json()
            http_pages.extend((e["rank"], e["image_id"], e["score"], e["badge"])
                              for e in page["entries"])

    engine = SessionEngine(corpus, StubProvider(corpus.dimension, seed=0), retrieval_limit=100)
    session = engine.start_session(Query(modality="text", text="scene-01"))
    engine.submit_feedback(
        session,
        [Judgment(i, True) for i in ids[:4]] + [Judgment(i, False) for i in ids[4:12]],
    )
    engine.finetune(session)
    direct_pages = []
    for offset in (0, 50):
        page = engine.get_results(session, offset, 50)
        direct_pages.extend((e.rank, e.image_id, e.score, e.badge) for e in page.entries)

    assert http_pages == direct_pages
    print("\n[PASS] service equivalence: HTTP create/feedback/finetune/pages == direct engine calls")
