"""
Ranking models across datasets by mean rank
===========================================

Raw scores are not comparable across datasets: a hard dataset drags every
model's Dice down without saying anything about which model is better.
Ranking within each dataset first, then averaging the ranks, separates
model quality from dataset difficulty. Ties within a dataset share the
average of the positions they span.
"""

import tempfile
from pathlib import Path

from pixelbench import rank_models
from pixelbench.cli import main as pixelbench

# Three models on three datasets. "medium" is built to produce a tie, and
# "hard" shows a dataset where everyone does poorly but the order still
# carries information.
scores = {
    "easy":   {"alpha": 0.92, "beta": 0.89, "gamma": 0.85},
    "medium": {"alpha": 0.70, "beta": 0.70, "gamma": 0.64},
    "hard":   {"alpha": 0.21, "beta": 0.30, "gamma": 0.12},
}

table = rank_models(scores)
print("per-dataset ranks (descending score, ties share the average):")
for dataset in table.datasets:
    cells = ", ".join(f"{m}={table.rows[m].ranks[dataset]:.1f}"
                      for m in table.ordering)
    print(f"  {dataset:7s}: {cells}")

# alpha wins "easy", beta wins "hard", and they share ranks 1 and 2 on
# "medium" (1.5 each), which lands both at mean rank 1.5 overall: an exact
# tie, flagged, with the ordering falling back to model name.
print("\noverall ordering by mean rank:")
for pos, m in enumerate(table.ordering, start=1):
    row = table.rows[m]
    flag = " [tied]" if row.tied else ""
    print(f"  {pos}. {m}: mean rank {row.mean_rank:.2f}, "
          f"mean score {row.mean_score:.4f}{flag}")

# The same computation is available from the command line against a
# scores CSV, for ranking numbers produced elsewhere.
workdir = Path(tempfile.mkdtemp(prefix="rank_demo_"))
csv_path = workdir / "scores.csv"
lines = ["dataset,model,score"]
for dataset, per_model in scores.items():
    lines += [f"{dataset},{m},{s}" for m, s in per_model.items()]
csv_path.write_text("\n".join(lines) + "\n")

print("\nsame thing via the CLI:")
pixelbench(["rank", "--scores", str(csv_path), "--out", str(workdir)])
print(f"\nmachine-readable output:\n{(workdir / 'rank_ranks.csv').read_text()}")
