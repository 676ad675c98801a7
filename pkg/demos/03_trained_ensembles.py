"""Trainable ensembles end to end: bagging, boosting, stacking, mixture of experts.

Everything runs on small synthetic 2-D datasets so each mechanism's effect
is visible in seconds:

* bagging smooths out bootstrap-induced variance;
* boosting reweights hard samples and outvotes a single weak learner;
* stacking learns to trust whichever base model is confident;
* the mixture-of-experts gate routes each region of feature space to the
  expert that owns it.

Run:  python demos/03_trained_ensembles.py
"""

import numpy as np

from scorefuse import (
    LabelSpace,
    ProbVector,
    ScoreRow,
    ScoreTable,
    TrainConfig,
    argmax_class,
    bagging_train,
    bag_predict_proba,
    boosting_predict,
    boosting_train,
    moe_predict,
    moe_train,
    predict_matrix,
    stacking_predict,
    stacking_train,
    table_accuracy,
    train,
)

rng = np.random.default_rng(7)
config = TrainConfig(learning_rate=0.3, epochs=40, batch_size=32, seed=0)


def gaussian_blobs(rng, centers, n, scale):
    space = LabelSpace.of(tuple(f"c{j}" for j in range(len(centers))))
    X = np.vstack([rng.normal(loc=c, scale=scale, size=(n, 2)) for c in centers])
    labels = [name for name in space for _ in range(n)]
    return X, labels, space


def accuracy(predictions, labels):
    return float(np.mean([p == t for p, t in zip(predictions, labels)]))


# -- bagging ---------------------------------------------------------------
X, labels, space = gaussian_blobs(rng, [(-1, 0), (1, 0)], 100, scale=1.0)
X_test, labels_test, _ = gaussian_blobs(rng, [(-1, 0), (1, 0)], 300, scale=1.0)
accs_b1, accs_b15 = [], []
for seed in range(10):
    for replicates, bucket in ((1, accs_b1), (15, accs_b15)):
        bag = bagging_train(X, labels, space, replicates, config, seed=100 + seed)
        preds = [
            argmax_class(bag_predict_proba(bag, X_test[i]), space)
            for i in range(X_test.shape[0])
        ]
        bucket.append(accuracy(preds, labels_test))
print("bagging: test accuracy spread over 10 bootstrap seeds")
print(f"  B=1  mean {np.mean(accs_b1):.3f}  std {np.std(accs_b1):.4f}")
print(f"  B=15 mean {np.mean(accs_b15):.3f}  std {np.std(accs_b15):.4f}  (tighter)")

# -- boosting --------------------------------------------------------------
X, labels, space = gaussian_blobs(rng, [(-1.4, 0), (0, 1.4), (1.4, 0)], 60, scale=0.9)
single = train(X, labels, space, config)
truth_idx = np.array([space.index(t) for t in labels])
single_acc = float((predict_matrix(single, X).argmax(axis=1) == truth_idx).mean())
weight_log = []
ens = boosting_train(X, labels, space, 10, config, weight_log=weight_log)
boosted_acc = accuracy([boosting_predict(ens, X[i]) for i in range(len(labels))], labels)
print(f"\nboosting: single learner {single_acc:.3f} -> "
      f"{len(ens.stages)}-stage ensemble {boosted_acc:.3f} (training accuracy, never worse)")
miss0 = predict_matrix(ens.stages[0][0], X).argmax(axis=1) != truth_idx
print("  stage weights alpha:", [round(a, 3) for _, a in ens.stages])
print("  weight mass on the first stage's misses, round by round:",
      [round(float(w[miss0].sum()), 3) for w in weight_log])
print("  (reweighting piles the distribution onto the overlap region; with a"
      "\n   strong convex base learner the vote rarely flips, hence the >= bound)")

# -- stacking ----------------------------------------------------------------
# Two synthetic base models with disjoint error regions: each is confident
# when right and lukewarm when wrong, so "trust the confident one" wins.
space2 = LabelSpace.of(("c0", "c1"))
n = 1200
truth = rng.integers(0, 2, size=n)
ids = [f"s{i}" for i in range(n)]
tables = []
for model_id, err_phase in (("a", 0), ("b", 1)):
    rows = []
    for i in range(n):
        wrong = i % 4 == err_phase  # disjoint 25% error sets, spread evenly
        conf = 0.55 if wrong else 0.9
        target = 1 - truth[i] if wrong else truth[i]
        scores = (1 - conf, conf) if target == 1 else (conf, 1 - conf)
        rows.append(ScoreRow(ids[i], ProbVector(scores), f"c{truth[i]}"))
    tables.append(ScoreTable(space2, model_id, tuple(rows)))
cut = 800
train_tables = [ScoreTable(space2, t.model_id, t.rows[:cut]) for t in tables]
val_tables = [ScoreTable(space2, t.model_id, t.rows[cut:]) for t in tables]
meta = stacking_train(train_tables, TrainConfig(learning_rate=0.5, epochs=100, seed=0))
hits = 0
for i, row in enumerate(val_tables[0].rows):
    fused = stacking_predict(meta, [t.rows[i].probs for t in val_tables])
    hits += argmax_class(fused, space2) == row.true_label
print(f"\nstacking: base accuracies "
      f"{[round(table_accuracy(t), 3) for t in val_tables]} -> "
      f"stacked {hits / len(val_tables[0].rows):.3f} (validation)")

# -- mixture of experts -------------------------------------------------------
# Expert L is right only on the left half-plane, expert R only on the right;
# the gate learns the boundary from the features themselves.
Xg = rng.uniform(-2, 2, size=(1000, 2))
truth = rng.integers(0, 2, size=1000)
ids = [f"g{i}" for i in range(1000)]
expert_tables = []
for model_id, own in (("L", Xg[:, 0] < 0), ("R", Xg[:, 0] >= 0)):
    rows = []
    for i in range(1000):
        conf = 0.8 if own[i] else 0.9
        target = truth[i] if own[i] else 1 - truth[i]
        scores = (1 - conf, conf) if target == 1 else (conf, 1 - conf)
        rows.append(ScoreRow(ids[i], ProbVector(scores), f"c{truth[i]}"))
    expert_tables.append(ScoreTable(space2, model_id, tuple(rows)))
gate = moe_train(Xg[:700], [ScoreTable(space2, t.model_id, t.rows[:700]) for t in expert_tables],
                 [f"c{t}" for t in truth[:700]],
                 TrainConfig(learning_rate=0.5, epochs=120, seed=0))
hits = 0
for i in range(700, 1000):
    fused = moe_predict(gate, Xg[i], [t.rows[i].probs for t in expert_tables])
    hits += argmax_class(fused, space2) == f"c{truth[i]}"
experts_alone = [
    round(table_accuracy(ScoreTable(space2, t.model_id, t.rows[700:])), 3)
    for t in expert_tables
]
print(f"\nmixture of experts: experts alone {experts_alone} -> "
      f"gated mixture {hits / 300:.3f} (validation)")
