#!/usr/bin/env python3
"""Generate the committed test fixtures (models, datasets, golden files).

Run from the repository root:

    python3 scripts/make_fixtures.py

Everything is seeded, so reruns reproduce the committed bytes. The golden
logit vector for the MLP fixture is computed here with plain Python loops,
independent of the package's forward pass.
"""

import json
import math
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from bbopt.bench import BenchConfig, RunRecord, emit_report, summarize
from bbopt.datasets import LabeledImage, save_dataset
from bbopt.oracle import LossKind, save_builtin_model
from bbopt.tensors import ImageTensor

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"
GOLDEN = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"

EPS = 0.05


def loop_forward(layers, flat):
    """Reference forward pass with explicit loops; deliberately naive."""
    x = [float(v) for v in flat]
    for w, b, relu in layers:
        out = []
        for row in range(w.shape[0]):
            acc = float(b[row])
            for col in range(w.shape[1]):
                acc += float(w[row, col]) * x[col]
            out.append(max(acc, 0.0) if relu else acc)
        x = out
    return x


def make_mlp_fixture():
    rng = np.random.Generator(np.random.Philox(key=20240824))
    w1 = rng.normal(0.0, 0.4, size=(32, 64)).astype(np.float32)
    b1 = rng.normal(0.0, 0.1, size=32).astype(np.float32)
    w2 = rng.normal(0.0, 0.4, size=(4, 32)).astype(np.float32)
    b2 = rng.normal(0.0, 0.1, size=4).astype(np.float32)
    layers = [(w1, b1, True), (w2, b2, False)]
    save_builtin_model(FIXTURES / "mlp_8x8_k4.bbam", layers)

    probe = rng.uniform(0.1, 0.9, size=(1, 8, 8)).astype(np.float32)
    save_dataset(FIXTURES / "probe_8x8.imgb",
                 [LabeledImage(ImageTensor(probe), 0)], class_count=4)
    golden = loop_forward(layers, probe.reshape(-1))
    (FIXTURES / "mlp_8x8_k4_golden.json").write_text(
        json.dumps({"logits": golden}, indent=2) + "\n")

    # 16 images labeled with the model's own prediction, so all start correct
    items = []
    while len(items) < 16:
        img = rng.uniform(0.15, 0.85, size=(1, 8, 8)).astype(np.float32)
        logits = loop_forward(layers, img.reshape(-1))
        label = int(np.argmax(logits))
        items.append(LabeledImage(ImageTensor(img), label))
    save_dataset(FIXTURES / "dataset_16.imgb", items, class_count=4)


def make_linear_fixture():
    """Two-class linear model with weights constant over 2x2 pixel cells.

    margin(x) = <w, x> + b0 for label 0; the minimal l-inf adversarial
    distance is margin / ||w||_1 (pixels are kept interior so the unit box
    never binds).
    """
    rng = np.random.Generator(np.random.Philox(key=77001122))
    latent = rng.normal(0.0, 1.0, size=(4, 4))
    latent[np.abs(latent) < 0.2] += np.sign(latent[np.abs(latent) < 0.2] + 1e-9) * 0.2
    w = np.repeat(np.repeat(latent, 2, axis=0), 2, axis=1).reshape(-1)  # (64,)
    w1_norm = float(np.sum(np.abs(w)))
    b0 = -float(w @ np.full(64, 0.5))  # margin 0 at the mid-gray image

    rows = np.stack([w / 2.0, -w / 2.0]).astype(np.float32)
    bias = np.array([b0, 0.0], dtype=np.float32)
    save_builtin_model(FIXTURES / "linear_64.bbam", [(rows, bias, False)])

    def gen_images(n, lo_frac, hi_frac, key):
        g = np.random.Generator(np.random.Philox(key=key))
        items = []
        while len(items) < n:
            base = 0.5 + g.normal(0.0, 0.05, size=64)
            target = g.uniform(lo_frac, hi_frac) * EPS * w1_norm
            shift = (target - (w @ base + b0)) / float(w @ w)
            x = base + shift * w
            if x.min() < 0.12 or x.max() > 0.88:
                continue
            margin = float(w @ x + b0)
            assert 0.0 < margin < 0.8 * EPS * w1_norm
            items.append(LabeledImage(ImageTensor(x.reshape(1, 8, 8).astype(np.float32)), 0))
        return items

    save_dataset(FIXTURES / "linear_100.imgb", gen_images(100, 0.20, 0.60, 31001), class_count=2)

    meta = {"b0": b0, "l1_norm": w1_norm}
    (FIXTURES / "linear_64_meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def make_curved_fixture():
    """Two-class ReLU network on 32x32 images for the square-count ablation.

    The first layer's preactivations are centered near zero at mid-gray with
    unit-norm rows scaled up, so they flip sign inside the eps-ball and window
    effects interact instead of adding up. Image difficulty is controlled by
    a white-box PGD estimate of the best margin reduction reachable in the
    ball: each image is shifted along its margin gradient until the clean
    margin sits at a target fraction (0.3-0.6) of that reachable reduction.
    """
    side = 32
    dim = side * side
    rng = np.random.Generator(np.random.Philox(key=774413))
    hidden = 128
    w1 = rng.standard_normal((hidden, dim))
    w1 /= np.linalg.norm(w1, axis=1, keepdims=True)
    w1 *= 6.0
    mid_gray = np.full(dim, 0.5)
    b1 = -w1 @ mid_gray + 0.3 * rng.standard_normal(hidden)
    w2 = rng.standard_normal((2, hidden))
    b2 = np.zeros(2)
    save_builtin_model(FIXTURES / "curved_1024.bbam",
                       [(w1.astype(np.float32), b1.astype(np.float32), True),
                        (w2.astype(np.float32), b2.astype(np.float32), False)])

    # forward/backward in the same float32-weight precision the oracle uses
    w1f = w1.astype(np.float32).astype(np.float64)
    b1f = b1.astype(np.float32).astype(np.float64)
    w2f = w2.astype(np.float32).astype(np.float64)

    def margin_grad(x):
        z = w1f @ x + b1f
        m = (w2f[0] - w2f[1]) @ np.maximum(z, 0)
        gm = ((w2f[0] - w2f[1]) * (z > 0)) @ w1f
        return m, gm

    def pgd_min(x0, steps=40, restarts=2, key=0):
        g = np.random.Generator(np.random.Philox(key=key))
        best = margin_grad(x0)[0]
        for r in range(restarts):
            x = x0 + (g.uniform(-EPS, EPS, dim) if r else 0.0)
            x = np.clip(np.clip(x, x0 - EPS, x0 + EPS), 0, 1)
            for _ in range(steps):
                _, gm = margin_grad(x)
                x = np.clip(np.clip(x - (EPS / 8) * np.sign(gm), x0 - EPS, x0 + EPS), 0, 1)
            best = min(best, margin_grad(x)[0])
        return best

    def hardness(x, key):
        m0, _ = margin_grad(x)
        if m0 <= 0:
            return -1.0
        mmin = pgd_min(x, key=key)
        if mmin >= 0:
            return 2.0
        return m0 / (m0 - mmin)

    lo, hi = 0.3, 0.6
    g = np.random.Generator(np.random.Philox(key=31337))
    items = []
    tries = 0
    while len(items) < 200 and tries < 8000:
        tries += 1
        base = np.clip(0.5 + g.normal(0, 0.06, dim), 0.1, 0.9)
        _, gm = margin_grad(base)
        direction = gm / np.linalg.norm(gm)
        target = g.uniform(lo, hi)
        # coarse scan, then bisection, for the shift that hits the target hardness
        ts = np.linspace(-0.5, 1.5, 21)
        hs = [hardness(np.clip(base + t * direction, 0, 1), key=1000 * tries + i)
              for i, t in enumerate(ts)]
        tl = None
        for i in range(len(ts) - 1):
            if hs[i] < target <= hs[i + 1] and hs[i] > 0:
                tl, th = ts[i], ts[i + 1]
                break
        if tl is None:
            continue
        for it in range(12):
            tm = 0.5 * (tl + th)
            if hardness(np.clip(base + tm * direction, 0, 1), key=2000 * tries + it) < target:
                tl = tm
            else:
                th = tm
        x = np.clip(base + 0.5 * (tl + th) * direction, 0, 1)
        hfin = hardness(x, key=5000 + tries)
        if not (lo <= hfin <= hi):
            continue
        xq = x.astype(np.float32)
        if margin_grad(xq.astype(np.float64))[0] <= 0:
            continue
        items.append(LabeledImage(ImageTensor(xq.reshape(1, side, side)), 0))
    assert len(items) == 200, f"only generated {len(items)} curved images"
    save_dataset(FIXTURES / "curved_200.imgb", items, class_count=2)


def engineered_summary_rows():
    """SummaryRows whose aggregates render like the benchmark summary table."""
    spec = {
        # attack -> model -> (n_evaluated, failures, success query count)
        "bandits": {"I": (1000, 84, 1339), "R": (1000, 34, 854), "V": (1000, 46, 596)},
        "nes": {"I": (1000, 132, 1763), "R": (1000, 87, 1335), "V": (1000, 65, 918)},
        "square": {"I": (1000, 5, 217), "R": (1000, 0, 78), "V": (1000, 0, 31)},
        "zosignsgd": {"I": (1000, 106, 927), "R": (1000, 78, 887), "V": (1000, 22, 687)},
    }
    rows = []
    for attack, models in spec.items():
        for model, (n, fails, q) in models.items():
            cfg = BenchConfig(attack=attack, model=model, dataset="engineered",
                              eps=EPS, budget=10000, loss=LossKind.MARGIN, seed=0)
            records = [RunRecord(i, True, i >= fails, q if i >= fails else 10000, -1.0 if i >= fails else 1.0)
                       for i in range(n)]
            rows.append(summarize(records, cfg))
    return rows


def engineered_l3_row():
    # 332 successes totalling 78196 queries -> mean 235.53; 1/333 failures -> 0.3%
    queries = [236] * 176 + [235] * 156
    records = [RunRecord(i, True, True, q, -1.0) for i, q in enumerate(queries)]
    records.append(RunRecord(len(records), True, False, 10000, 1.0))
    cfg = BenchConfig(attack="square", model="I", dataset="engineered", eps=EPS,
                      budget=10000, loss=LossKind.MARGIN, seed=0,
                      overrides={"p_indices": [5, 40, 150, 400, 800, 1600, 2500, 4500, 8000]})
    return summarize(records, cfg)


def make_goldens():
    rows = engineered_summary_rows()
    (GOLDEN / "summary_report.csv").write_bytes(emit_report(rows, "csv").encode("utf-8"))
    one_model = [r for r in rows if r.model == "I"]
    (GOLDEN / "summary_report.md").write_bytes(emit_report(one_model, "markdown").encode("utf-8"))
    (GOLDEN / "single_row.csv").write_bytes(emit_report(one_model[:1], "csv").encode("utf-8"))
    (GOLDEN / "l3_row.csv").write_bytes(emit_report([engineered_l3_row()], "csv").encode("utf-8"))


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    make_mlp_fixture()
    make_linear_fixture()
    make_curved_fixture()
    make_goldens()
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
