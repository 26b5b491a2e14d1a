"""Moving-obstacle slalom: suppression + recovery against reward penalty.

Uses MLP critics and squashed-Gaussian policies. One seed takes roughly a
minute per method; pass a smaller iteration count for a quick look.

    python demos/pointnav_comparison.py [n_seeds] [iterations]
"""

import sys
import tempfile
from pathlib import Path

import objsupp
from objsupp.harness import load_config, mean_std, train_seed, with_overrides

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 1
iterations = int(sys.argv[2]) if len(sys.argv) > 2 else None
base = load_config(Path(objsupp.__file__).parent / "configs" / "pointnav.json")
if iterations is not None:
    base = with_overrides(base, {"run": {"iterations": iterations}})

out = Path(tempfile.mkdtemp(prefix="pointnav_"))
for name, patch in {"suppression+recovery": {}, "reward_penalty": {"method": "reward_penalty", "penalty": {}}}.items():
    cfg = with_overrides(base, patch)
    finals = [r["final"] for r in (train_seed(cfg, s, out) for s in range(n_seeds)) if r["status"] == "complete"]
    ret = mean_std(f["task_return"] for f in finals)["formatted"]
    col = mean_std(f["violations"][0] for f in finals)["formatted"]
    oob = mean_std(f["violations"][1] for f in finals)["formatted"]
    print(f"{name:22s} return {ret}  collisions {col}  out-of-bounds {oob}")
