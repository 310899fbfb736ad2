"""Fit the boosting model on a simulated regression dataset and compare it
with a ridge baseline on raw features.

Uses a reduced sample size so the demo finishes in about a minute;
increase SAMPLES to 300 for the full benchmark layout.

Run:  python3 demos/02_regression_benchmark.py
"""

import warnings

import numpy as np

from pkb import BoostConfig, KernelSpec, fit, mse, pathway_weights, predict_scores
from pkb.simulate import SimDesign, simulate_dataset

warnings.filterwarnings("ignore")

SAMPLES = 300
SEED = 7

design = SimDesign(
    model=1, pathway_count=20, sample_size=SAMPLES, outcome_type="regression", seed=SEED
)
result = simulate_dataset(design)
dataset = result.dataset
print(f"simulated: {dataset.n_samples} samples, {len(dataset.gene_ids)} genes, "
      f"{len(result.pathways)} pathways (informative: {result.informative_pathways})")

perm = np.random.default_rng(SEED).permutation(SAMPLES)
train = dataset.subset(perm[: 2 * SAMPLES // 3])
test = dataset.subset(perm[2 * SAMPLES // 3 :])

config = BoostConfig(
    learning_rate=0.05,
    penalty="l2",
    penalty_multiplier=1.0,
    kernel=KernelSpec("poly", 3),
    max_iterations=1500,
    seed=SEED,
)
model = fit(train, result.pathways, config)
print(f"fitted: T={model.t_selected} iterations at lambda={model.lam:.4g}")

scores = predict_scores(model, test.expression, test.gene_ids, test.clinical, test.clinical_names)
print(f"test MSE (boosting): {mse(test.outcome.y, scores):.2f}")

# naive baseline: ridge regression on the raw feature matrix
try:
    from sklearn.linear_model import RidgeCV

    x_train = np.column_stack([train.expression, train.clinical])
    x_test = np.column_stack([test.expression, test.clinical])
    ridge = RidgeCV(alphas=np.logspace(-1, 3, 100)).fit(x_train, train.outcome.y)
    print(f"test MSE (ridge)   : {mse(test.outcome.y, ridge.predict(x_test)):.2f}")
except ImportError:
    print("(scikit-learn not installed; skipping the ridge baseline)")

weights = pathway_weights(model)
print("\npathway weights (nonzero):")
for name in sorted(weights, key=weights.get, reverse=True):
    if weights[name] > 0:
        marker = "*" if name in result.informative_pathways else " "
        print(f"  {marker} {name}: {weights[name]:8.3f}")
print("(* marks the pathways that actually generated the outcome)")
