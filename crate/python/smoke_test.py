"""Smoke test for the pyuqbench extension module."""
import json
import math
import os
import random
import sys
import tempfile

import pyuqbench as uq

rng = random.Random(0)


def blobs(n, shift=0.0):
    x, y = [], []
    for i in range(n):
        label = i % 2
        x.append([rng.gauss(1.5 * label + shift, 1.0), rng.gauss(-label, 1.0)])
        y.append(label)
    return x, y


x_train, y_train = blobs(400)
x_cal, y_cal = blobs(200)
x_test, y_test = blobs(200)
x_shift, y_shift = blobs(200, shift=2.0)

assert uq.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
stat, p = uq.ks_two_sample([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
assert stat == 0.0 and p == 1.0

model = uq.Model.fit("logistic", x_train, y_train, seed=0)
proba = model.predict_proba(x_test)
assert all(abs(a + b - 1.0) < 1e-9 for a, b in proba)
preds = model.predict(x_test)

iso = uq.IsotonicCalibrator([p[1] for p in model.predict_proba(x_cal)], y_cal)
calibrated = iso.predict([p[1] for p in proba])
assert all(0.0 <= v <= 1.0 for v in calibrated)

cp = uq.Conformal(model.predict_proba(x_cal), y_cal)
u_p, u_cred, u_conf = cp.scores(proba)
ed = uq.error_detection(u_p, preds, y_test)
print(f"error detection (cp p-value): {ed:.3f}")

mc = uq.max_confidence(proba)
_, _, area = uq.retention(mc, preds, y_test)
print(f"retention area (max confidence): {area:.3f}")

knn = uq.KnnModel(x_train, y_train, k=10)
ood = uq.ood_detection(knn.score(x_test), knn.score(x_shift))
print(f"ood detection (knn): {ood:.3f}")
assert ood > 0.6

shift = uq.shift_detection(knn.score(x_test), knn.score(x_shift), n_bootstrap=20, seed=1)
assert 0.0 <= shift <= 1.0

shift_preds = model.predict(x_shift)
drop = uq.perf_drop(
    (mc, preds, y_test),
    (uq.max_confidence(model.predict_proba(x_shift)), shift_preds, y_shift),
    n_bootstrap=20,
)
assert math.isfinite(drop)

ens = uq.Model.fit("deep_ensemble", x_train[:200], y_train[:200], seed=0, ensemble_size=3)
for t, a, e in ens.decompose(x_test[:10]):
    assert abs(t - a - e) < 1e-9

here = os.path.dirname(os.path.abspath(__file__))
config = os.path.join(here, "..", "configs", "adult.toml")
if os.path.exists(os.path.join(here, "..", "data", "adult.csv")) and "--full" in sys.argv:
    with tempfile.TemporaryDirectory() as out:
        report = json.loads(uq.run_benchmark(config, out, seeds=[0]))
        assert os.path.exists(os.path.join(out, "report.md"))
        print(f"benchmark cells: {len(report['cells'])}")

print("smoke test OK")
