import numpy as np
import pytest

from bbopt.attacks import ATTACK_IDS, default_config, run_attack
from bbopt.attacks.bandits import BanditsConfig, bandits_attack
from bbopt.attacks.square import SquareConfig, square_attack_linf
from bbopt.datasets import LabeledImage
from bbopt.rng import RngStream
from bbopt.schedule import default_schedule
from bbopt.tensors import ImageTensor, linf_distance

from conftest import CheckingOracle, CountingOracle, LinearOracle

EPS = 0.05


def _misclassified_item():
    # LinearOracle with all-negative margin at any positive image
    return LabeledImage(ImageTensor(np.full((1, 8, 8), 0.5)), 0), LinearOracle(-np.ones(64))


def _correct_item(linear_meta):
    w, b0 = linear_meta["w"], linear_meta["b0"]
    x = np.full(64, 0.5) + 0.002 * np.sign(w)
    margin = float(w @ x + b0)
    assert margin > 0
    return LabeledImage(ImageTensor(x.reshape(1, 8, 8)), 0)


@pytest.mark.parametrize("attack", ATTACK_IDS)
def test_already_misclassified_succeeds_in_one_query(attack):
    item, oracle = _misclassified_item()
    cfg = default_config(attack, 8, 100)
    res = run_attack(attack, oracle, item, EPS, 100, cfg, RngStream(0))
    assert res.success and res.queries == 1 and res.iterations == 0


@pytest.mark.parametrize("attack", ATTACK_IDS)
def test_budget_one_on_correct_input(attack, linear_oracle, linear_meta):
    item = _correct_item(linear_meta)
    cfg = default_config(attack, 8, 1)
    res = run_attack(attack, linear_oracle, item, EPS, 1, cfg, RngStream(0))
    assert not res.success and res.queries == 1


@pytest.mark.parametrize("attack", ATTACK_IDS)
@pytest.mark.parametrize("budget", [2, 3])
def test_tiny_budgets_never_exceeded(attack, budget, linear_oracle, linear_meta):
    item = _correct_item(linear_meta)
    wrapper = CountingOracle(linear_oracle)
    cfg = default_config(attack, 8, budget)
    res = run_attack(attack, wrapper, item, EPS, budget, cfg, RngStream(0))
    assert res.queries <= budget
    assert res.queries == wrapper.count


@pytest.mark.parametrize("attack", ATTACK_IDS)
def test_feasibility_and_accounting(attack, mlp_oracle, dataset16):
    for idx in (0, 7, 15):
        item = dataset16[idx]
        wrapper = CheckingOracle(mlp_oracle, item.image, EPS)
        cfg = default_config(attack, 8, 400)
        res = run_attack(attack, wrapper, item, EPS, 400, cfg, RngStream(idx))
        assert wrapper.count > 0
        assert wrapper.violations == 0
        assert res.queries == wrapper.count
        assert linf_distance(res.final_image, item.image) <= EPS + 1e-6
        assert (res.final_image.data >= 0).all() and (res.final_image.data <= 1).all()


@pytest.mark.parametrize("attack", ATTACK_IDS)
def test_determinism_same_seed_same_result(attack, mlp_oracle, dataset16):
    item = dataset16[3]
    cfg = default_config(attack, 8, 300)
    a = run_attack(attack, mlp_oracle, item, EPS, 300, cfg, RngStream(77))
    b = run_attack(attack, mlp_oracle, item, EPS, 300, cfg, RngStream(77))
    assert a.success == b.success
    assert a.queries == b.queries
    assert a.iterations == b.iterations
    assert np.array_equal(a.final_image.data, b.final_image.data)
    assert a.final_loss == b.final_loss


@pytest.mark.parametrize("attack", ["nes", "bandits", "zosignsgd"])
def test_gradient_attacks_beat_linear_fixture(attack, linear_oracle, linear_meta):
    # margin < eps * ||w||_1, so an aligned perturbation flips the label
    item = _attackable_item(linear_meta, 0.3)
    wins = 0
    for seed in range(20):
        cfg = default_config(attack, 8, 2000)
        res = run_attack(attack, linear_oracle, item, EPS, 2000, cfg, RngStream(seed))
        wins += int(res.success)
    assert wins >= 18


def _attackable_item(linear_meta, margin_frac):
    w, b0, l1 = linear_meta["w"], linear_meta["b0"], linear_meta["l1_norm"]
    base = np.full(64, 0.5)
    target = margin_frac * EPS * l1
    x = base + (target - (w @ base + b0)) / float(w @ w) * w
    assert 0.1 < x.min() and x.max() < 0.9
    return LabeledImage(ImageTensor(x.reshape(1, 8, 8)), 0)


def test_square_attack_beats_linear_fixture(linear_oracle, linear_meta):
    item = _attackable_item(linear_meta, 0.3)
    cfg = SquareConfig(p_schedule=default_schedule(n_total=2000))
    wins = sum(
        run_attack("square", linear_oracle, item, EPS, 2000, cfg, RngStream(seed)).success
        for seed in range(20)
    )
    assert wins >= 18


def test_square_accepted_losses_non_increasing(mlp_oracle, dataset16):
    for seed in range(5):
        item = dataset16[seed]
        cfg = SquareConfig(p_schedule=default_schedule(n_total=500))
        trace: list = []
        square_attack_linf(mlp_oracle, item, EPS, 500, cfg, RngStream(seed),
                           accepted_losses=trace)
        assert all(a >= b for a, b in zip(trace, trace[1:]))


def test_square_strict_improve_strictly_decreasing(mlp_oracle, dataset16):
    for seed in range(5):
        item = dataset16[seed]
        cfg = SquareConfig(p_schedule=default_schedule(n_total=500), strict_improve=True)
        trace: list = []
        square_attack_linf(mlp_oracle, item, EPS, 500, cfg, RngStream(seed),
                           accepted_losses=trace)
        assert all(a > b for a, b in zip(trace, trace[1:]))


def test_bandits_frozen_prior_never_moves(linear_oracle, linear_meta):
    item = _correct_item(linear_meta)
    cfg = BanditsConfig(prior_size=4, exploration=0.01, fd_eta=0.1,
                        prior_step=0.0, image_step=0.01)
    res = bandits_attack(linear_oracle, item, EPS, 100, cfg, RngStream(0))
    assert not res.success
    assert np.array_equal(res.final_image.data, item.image.data)


class _ScaledOracle:
    serial = False

    def __init__(self, inner, scale):
        self.inner = inner
        self.scale = scale
        self.num_classes = inner.num_classes

    def logits(self, image):
        return self.inner.logits(image) * self.scale


def test_square_outcome_invariant_under_logit_scaling(mlp_oracle, dataset16):
    item = dataset16[2]
    cfg = default_config("square", 8, 400)
    base = run_attack("square", mlp_oracle, item, EPS, 400, cfg, RngStream(5))
    scaled = run_attack("square", _ScaledOracle(mlp_oracle, 4.0), item, EPS, 400,
                        cfg, RngStream(5))
    assert base.success == scaled.success
    assert base.queries == scaled.queries
    assert np.array_equal(base.final_image.data, scaled.final_image.data)


def test_attack_rejects_bad_eps(mlp_oracle, dataset16):
    cfg = default_config("nes", 8, 100)
    with pytest.raises(ValueError):
        run_attack("nes", mlp_oracle, dataset16[0], 0.0, 100, cfg, RngStream(0))
