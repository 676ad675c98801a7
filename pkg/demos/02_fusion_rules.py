"""The four decision-level fusion rules on one worked example.

Three toy classifiers disagree about a 3-class sample; majority voting,
the max rule, probability averaging and weighted averaging each resolve
the disagreement differently.

Run:  python demos/02_fusion_rules.py
"""

from scorefuse import (
    LabelSpace,
    ProbVector,
    argmax_class,
    majority_vote,
    max_rule,
    prob_average,
    weighted_average,
)

space = LabelSpace.of(("glioma", "meningioma", "pituitary"))
outputs = {
    "model_a": ProbVector((0.48, 0.42, 0.10)),   # lukewarm glioma
    "model_b": ProbVector((0.05, 0.55, 0.40)),   # mild meningioma
    "model_c": ProbVector((0.02, 0.08, 0.90)),   # confident pituitary
}
vectors = list(outputs.values())

print("per-model outputs:")
for name, p in outputs.items():
    print(f"  {name}: {p.scores}  -> argmax {argmax_class(p, space)}")

votes = [argmax_class(p, space) for p in vectors]
print(f"\nmajority vote over {votes}: {majority_vote(votes, space)}")
print(f"max rule (trust the most confident cell): {max_rule(vectors, space)}")

avg = prob_average(vectors)
print(f"probability average: {tuple(round(s, 4) for s in avg.scores)}"
      f" -> {argmax_class(avg, space)}")

# Weight models by how much we trust them (here: made-up validation
# accuracies 0.71, 0.80, 0.66, normalized).
accs = (0.71, 0.80, 0.66)
weights = tuple(a / sum(accs) for a in accs)
wavg = weighted_average(vectors, weights)
print(f"weighted average with weights {tuple(round(w, 4) for w in weights)}: "
      f"{tuple(round(s, 4) for s in wavg.scores)} -> {argmax_class(wavg, space)}")

print("\nNote how the max rule follows model_c's confidence while the "
      "majority vote has no winner better than the tie policy's pick.")
