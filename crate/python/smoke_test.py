"""Smoke test for the Python extension.

Build and run from the repository root:

    cargo build -p spectral-confound-py --features extension-module --release
    cp target/release/libspectral_confound_py.so python/spectral_confound.so
    python3 python/smoke_test.py
"""

import csv
import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np  # noqa: E402

import spectral_confound as sc  # noqa: E402


def check(name, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {name}")
    if not ok:
        check.failed = True


check.failed = False

# Isotropic covariance: the two moments coincide.
check("isotropic deviation", sc.deviation([1.0, 2.0, -3.0], np.eye(3).tolist()) < 1e-12)

# Diagonal example by hand: φ = (1, 1), Σ = diag(1, 3) gives |4 - 2 * 2| = 0.
check("diagonal balanced", abs(sc.deviation([1.0, 1.0], [[1.0, 0.0], [0.0, 3.0]])) < 1e-12)
# φ = (1, 0): |1 - 1 * 2| = 1.
check("diagonal skewed", abs(sc.deviation([1.0, 0.0], [[1.0, 0.0], [0.0, 3.0]]) - 1.0) < 1e-12)

e = math.e
check("exp closed form", abs(sc.closed_form("exp", 1.0, 1.0) - (e - 2) / (e + 1)) < 1e-12)
check("poly closed form", abs(sc.closed_form("poly", 3.0, 0.5) - 9.0) < 1e-12)
check("constant spectrum has no radius", sc.nonidentifiable_radius_sq([2.0] * 50) is None)

rng = np.random.default_rng(0)
n, L = 8, 4000
a = rng.standard_normal(n)
a /= np.linalg.norm(a)
x = rng.standard_normal((L, n))
y = x @ a + 0.1 * rng.standard_normal(L)
report = sc.detect(x.tolist(), y.tolist())
check(f"causal data not flagged ({report!r})", not report.confounder and report.n == n and report.samples == L)

b = rng.standard_normal(n)
b *= 3 / np.linalg.norm(b)
z = rng.standard_normal(L)
xc = x + np.outer(z, b)
yc = xc @ a + 3 * z
flagged = sc.detect(xc.tolist(), yc.tolist(), gamma=0.05)
check(f"confounded data flagged ({flagged!r})", flagged.confounder)

fit = sc.js_detect(x.tolist(), y.tolist())
check(f"baseline returns a fit ({fit!r})", 0.0 <= fit.beta_star <= 1.0 and fit.metric == "euclidean")

values = sc.simulate([6], samples=0, runs=30, c="uniform:2,3", seed=1)
check("simulate shape", len(values) == 1 and len(values[0]) == 30)
check("simulate deterministic", values == sc.simulate([6], samples=0, runs=30, c="uniform:2,3", seed=1))

rows = json.loads(sc.benchmark(json.dumps({"n": [6], "L": 0, "runs": 20, "c": {"kind": "zero"}, "method": "both"})))
check("benchmark rows", {r["method"] for r in rows} == {"ours", "js"})

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "data.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{i}" for i in range(n)] + ["y"])
        w.writerows(np.column_stack([xc, yc])[:600].tolist())
    reports, fits = sc.analyze_csv(path, "y", drop=["x0"], subsample=300, repeats=4, seed=3, method="both")
    check("csv analysis", len(reports) == 4 and len(fits) == 4 and reports[0].n == n - 1)

try:
    sc.closed_form("cubic", 1.0, 1.0)
    check("bad kind raises", False)
except ValueError:
    check("bad kind raises", True)

sys.exit(1 if check.failed else 0)
