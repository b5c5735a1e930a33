import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbopt.oracle import (
    BudgetExhausted,
    LossKind,
    MlpOracle,
    ModelFormatError,
    QueryLedger,
    cross_entropy_loss,
    is_adversarial_untargeted,
    load_builtin_model,
    margin_loss,
    objective_fn,
    query_logits,
    save_builtin_model,
)
from bbopt.rng import RngStream
from bbopt.tensors import ImageTensor

from conftest import FIXTURES


class IdentityLogitOracle:
    """K=2 fixture: logits = [x0, 1 - x0]."""

    serial = False
    num_classes = 2

    def logits(self, image):
        x0 = float(image.data.reshape(-1)[0])
        return np.array([x0, 1.0 - x0])


def test_query_logits_counts_and_returns():
    ledger = QueryLedger(10)
    img = ImageTensor(np.full((1, 1, 1), 0.3))
    out = query_logits(IdentityLogitOracle(), img, ledger)
    assert np.allclose(out, [0.3, 0.7])
    assert ledger.used == 1


def test_three_queries_three_charges():
    ledger = QueryLedger(10)
    img = ImageTensor(np.full((1, 1, 1), 0.5))
    for _ in range(3):
        query_logits(IdentityLogitOracle(), img, ledger)
    assert ledger.used == 3


def test_budget_boundary():
    ledger = QueryLedger(1)
    img = ImageTensor(np.full((1, 1, 1), 0.5))
    query_logits(IdentityLogitOracle(), img, ledger)
    with pytest.raises(BudgetExhausted):
        query_logits(IdentityLogitOracle(), img, ledger)
    assert ledger.used == 1


def test_margin_loss_basics():
    assert margin_loss(np.array([2.0, 5.0]), 0) == -3.0
    assert margin_loss(np.array([5.0, 2.0]), 0) == 3.0


def test_margin_loss_matches_loop_oracle():
    rng = RngStream(3)
    logits = rng.standard_normal(10)
    y = 4
    rest = [float(v) for i, v in enumerate(logits) if i != y]
    assert margin_loss(logits, y) == pytest.approx(float(logits[y]) - max(rest), abs=0)


def test_margin_loss_needs_two_classes():
    with pytest.raises(ValueError):
        margin_loss(np.array([1.0]), 0)


def test_cross_entropy_uniform():
    assert cross_entropy_loss(np.array([0.0, 0.0]), 0) == pytest.approx(np.log(2), abs=1e-12)


def test_cross_entropy_no_overflow():
    val = cross_entropy_loss(np.array([1000.0, 0.0]), 0)
    assert 0 <= val < 1e-6


def test_cross_entropy_matches_high_precision():
    from mpmath import mp, mpf, exp as mexp, log as mlog

    mp.dps = 50
    rng = RngStream(5)
    logits = rng.standard_normal(8) * 5
    y = 2
    denom = sum(mexp(mpf(float(v))) for v in logits)
    expected = float(-mlog(mexp(mpf(float(logits[y]))) / denom))
    got = cross_entropy_loss(logits, y)
    assert abs(got - expected) / abs(expected) < 1e-6


def test_cross_entropy_shift_invariant():
    rng = RngStream(9)
    logits = rng.standard_normal(6)
    a = cross_entropy_loss(logits, 1)
    b = cross_entropy_loss(logits + 123.0, 1)
    assert a == pytest.approx(b, abs=1e-6)


def test_is_adversarial_and_tie_rule():
    assert is_adversarial_untargeted(np.array([0.1, 0.9]), 0)
    assert not is_adversarial_untargeted(np.array([0.9, 0.1]), 0)
    assert not is_adversarial_untargeted(np.array([0.5, 0.5]), 0)  # tie -> index 0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_margin_sign_iff_adversarial(seed):
    logits = RngStream(seed).standard_normal(5)
    y = int(seed % 5)
    m = margin_loss(logits, y)
    adv = is_adversarial_untargeted(logits, y)
    if m < 0:
        assert adv
    if m > 0:
        assert not adv
    if m == 0:
        assert not adv


def test_objective_fn_negates_cross_entropy():
    logits = np.array([2.0, 1.0, 0.0])
    assert objective_fn(LossKind.XENT)(logits, 0) == -cross_entropy_loss(logits, 0)
    assert objective_fn(LossKind.MARGIN)(logits, 0) == margin_loss(logits, 0)


def test_identity_one_layer_model(tmp_path):
    path = tmp_path / "ident.bbam"
    save_builtin_model(path, [(np.eye(4, dtype=np.float32), np.zeros(4, dtype=np.float32), False)])
    model = load_builtin_model(path)
    one_hot = np.zeros(4, dtype=np.float32)
    one_hot[2] = 1.0
    out = model.logits(ImageTensor(one_hot.reshape(1, 2, 2)))
    assert np.allclose(out, one_hot)


def test_mlp_fixture_golden_logits(mlp_oracle):
    from bbopt.datasets import load_dataset

    probe = load_dataset(FIXTURES / "probe_8x8.imgb")[0].image
    golden = json.loads((FIXTURES / "mlp_8x8_k4_golden.json").read_text())["logits"]
    out = mlp_oracle.logits(probe)
    assert np.allclose(out, golden, atol=1e-5)


def test_truncated_model_file_fails(tmp_path):
    blob = (FIXTURES / "mlp_8x8_k4.bbam").read_bytes()
    bad = tmp_path / "trunc.bbam"
    bad.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ModelFormatError, match="byte"):
        load_builtin_model(bad)


def test_bad_magic_fails(tmp_path):
    bad = tmp_path / "bad.bbam"
    bad.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ModelFormatError, match="magic"):
        load_builtin_model(bad)


def test_non_finite_weights_fail(tmp_path):
    w = np.full((2, 2), np.inf, dtype=np.float32)
    path = tmp_path / "inf.bbam"
    save_builtin_model(path, [(w, np.zeros(2, dtype=np.float32), False)])
    with pytest.raises(ModelFormatError, match="non-finite"):
        load_builtin_model(path)


def test_trailing_bytes_fail(tmp_path):
    blob = (FIXTURES / "mlp_8x8_k4.bbam").read_bytes()
    bad = tmp_path / "extra.bbam"
    bad.write_bytes(blob + b"\x00\x00")
    with pytest.raises(ModelFormatError, match="trailing"):
        load_builtin_model(bad)


def test_mlp_rejects_mismatched_chain():
    with pytest.raises(ValueError, match="in_dim"):
        MlpOracle([
            (np.zeros((3, 4), dtype=np.float32), np.zeros(3, dtype=np.float32), True),
            (np.zeros((2, 5), dtype=np.float32), np.zeros(2, dtype=np.float32), False),
        ])
