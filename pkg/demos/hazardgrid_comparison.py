"""Suppression + recovery against the two baselines on the 7x7 hazard grid.

Every variant shares the environment, critics, optimiser and seeds; only the
method (and its section) changes. Expect a few minutes on one core.

    python demos/hazardgrid_comparison.py [n_seeds]
"""

import sys
import tempfile
from pathlib import Path

import objsupp
from objsupp.harness import load_config, mean_std, train_seed, with_overrides

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
base = load_config(Path(objsupp.__file__).parent / "configs" / "hazardgrid7.json")
variants = {
    "suppression+recovery": {},
    "reward_penalty": {"method": "reward_penalty", "penalty": {}},
    "recovery": {"method": "recovery"},
}

out = Path(tempfile.mkdtemp(prefix="hazardgrid_"))
print(f"{'method':22s} {'return':>16s} {'hazard visits':>16s} {'pit falls':>16s}")
for name, patch in variants.items():
    cfg = with_overrides(base, patch)
    runs = [train_seed(cfg, s, out) for s in range(n_seeds)]
    finals = [r["final"] for r in runs if r["status"] == "complete"]
    cols = [mean_std(f["task_return"] for f in finals),
            mean_std(f["violations"][0] for f in finals),
            mean_std(f["violations"][1] for f in finals)]
    print(f"{name:22s} " + " ".join(f"{c['formatted']:>16s}" for c in cols))
print(f"per-seed CSVs in {out}")
