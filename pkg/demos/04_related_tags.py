"""Related-tag suggestion from a knowledge graph with a convolutional triplet scorer.

Run from the repository root: python3 demos/04_related_tags.py
"""

import numpy as np

from screentags import kgrelated

# A synthetic graph with ten clusters of five entities, all relations collapsed.
g, _ = kgrelated.clustered_graph(seed=0)
train_g, test = kgrelated.split_graph(g, 20, seed=0)
print(f"{len(g.entities)} entities, {len(train_g.triplets)} train / {len(test)} test triplets")

# Negatives corrupt exactly one endpoint.
rng = np.random.default_rng(0)
s = train_g.triplets[0]
print("positive:", s, " negative:", kgrelated.negative_sample(s, train_g, rng))

res = kgrelated.train(train_g, dim=20, n_filters=8, lr=0.5, epochs=200, seed=0)
print(f"loss {res.losses[0]:.3f} -> {res.losses[-1]:.3f}")

rep = kgrelated.link_prediction_eval(res.model, test, train_g)
print(f"mean rank {rep.mean_rank:.2f} (random {(len(g.entities) + 1) / 2}), hits@10 {rep.hits_at_10:.1f}%")

entity = g.entities[0]
print(f"related to {entity}:", [(name, round(float(p), 3)) for name, p in kgrelated.related_tags(res.model, train_g, entity, k=4)])
