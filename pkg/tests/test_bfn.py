import math

import pytest
import torch

from molbfn.bfn import (
    GuidanceConfig,
    ScheduleConfig,
    accuracy_schedule,
    bayesian_update,
    cfg_combine,
    continuous_loss,
    noise_parameters,
    rl_loss,
)


def test_schedule_endpoints():
    cfg = ScheduleConfig(beta1=1.0)
    assert accuracy_schedule(0.0, cfg) == 0.0
    assert accuracy_schedule(1.0, cfg) == 1.0
    assert accuracy_schedule(0.5, cfg) == pytest.approx(0.25)


def test_schedule_monotone():
    cfg = ScheduleConfig(beta1=2.5)
    ts = torch.linspace(0, 1, 101)
    bs = accuracy_schedule(ts, cfg)
    assert torch.all(bs[1:] >= bs[:-1])


def test_schedule_rejects_out_of_range():
    cfg = ScheduleConfig()
    with pytest.raises(ValueError):
        accuracy_schedule(1.5, cfg)
    with pytest.raises(ValueError):
        accuracy_schedule(-0.1, cfg)


def test_bad_schedule_config():
    with pytest.raises(ValueError):
        ScheduleConfig(beta1=0.0)
    with pytest.raises(ValueError):
        ScheduleConfig(steps=0)


def test_noise_at_time_zero_is_uniform():
    e_x = torch.eye(4)[torch.tensor([0, 1, 2])]
    theta = noise_parameters(e_x, 0.0, ScheduleConfig())
    assert torch.allclose(theta, torch.full((3, 4), 0.25))


def test_noise_output_on_simplex():
    g = torch.Generator().manual_seed(0)
    e_x = torch.eye(5)[torch.randint(0, 5, (8, 10), generator=g)]
    theta = noise_parameters(e_x, 0.7, ScheduleConfig(beta1=3.0), generator=g)
    assert torch.all(theta >= 0)
    assert torch.allclose(theta.sum(dim=-1), torch.ones(8, 10), atol=1e-6)


def test_noise_mean_matches_monte_carlo():
    # sample mean of the pre-softmax latent over 1e5 draws vs analytic mean
    k, t, beta1 = 3, 0.6, 1.0
    cfg = ScheduleConfig(beta1=beta1)
    beta = beta1 * t * t
    e_x = torch.zeros(1, k)
    e_x[0, 1] = 1.0
    n = 100_000
    g = torch.Generator().manual_seed(42)
    mean = beta * (k * e_x - 1.0)
    std = math.sqrt(beta * k)
    draws = mean + std * torch.randn(n, 1, k, generator=g)
    sample_mean = draws.mean(dim=0)
    se = std / math.sqrt(n)
    assert torch.all((sample_mean - mean).abs() < 3 * se)
    # and the library path concentrates on the data token for large beta
    big = ScheduleConfig(beta1=1000.0)
    theta = noise_parameters(e_x.expand(n, k).reshape(n, 1, k), 1.0, big, generator=g)
    frac = (theta.argmax(dim=-1) == 1).float().mean().item()
    assert frac >= 0.999


def test_bayesian_update_identity():
    theta = torch.tensor([[0.2, 0.3, 0.5]])
    assert torch.allclose(bayesian_update(theta, torch.zeros_like(theta)), theta)


def test_bayesian_update_arithmetic():
    theta = torch.tensor([[0.5, 0.5]])
    y = torch.tensor([[math.log(3.0), 0.0]])
    out = bayesian_update(theta, y)
    assert torch.allclose(out, torch.tensor([[0.75, 0.25]]), atol=1e-7)


def test_bayesian_update_additivity():
    g = torch.Generator().manual_seed(3)
    theta = torch.softmax(torch.randn(4, 5, generator=g), dim=-1)
    y1 = torch.randn(4, 5, generator=g)
    y2 = torch.randn(4, 5, generator=g)
    a = bayesian_update(bayesian_update(theta, y1), y2)
    b = bayesian_update(theta, y1 + y2)
    assert torch.allclose(a, b, atol=1e-6)


def test_bayesian_update_row_constant_invariance():
    g = torch.Generator().manual_seed(4)
    theta = torch.softmax(torch.randn(2, 4, generator=g), dim=-1)
    y = torch.randn(2, 4, generator=g)
    shifted = y + torch.tensor([[5.0], [-3.0]])
    assert torch.allclose(bayesian_update(theta, y), bayesian_update(theta, shifted), atol=1e-6)


def test_continuous_loss_zero_at_target():
    e_x = torch.eye(3)[torch.tensor([0, 2])]
    cfg = ScheduleConfig()
    assert continuous_loss(e_x.clone(), e_x, 0.5, cfg).item() == 0.0


def test_continuous_loss_arithmetic():
    cfg = ScheduleConfig(beta1=1.0)
    e_x = torch.tensor([[[1.0, 0.0]]])
    e_hat = torch.tensor([[[0.5, 0.5]]])
    val = continuous_loss(e_hat, e_x, 1.0, cfg).item()
    assert val == pytest.approx(1.0)


def test_continuous_loss_shape_mismatch():
    cfg = ScheduleConfig()
    with pytest.raises(ValueError):
        continuous_loss(torch.zeros(1, 2, 3), torch.zeros(1, 2, 4), 0.5, cfg)


def test_continuous_loss_gradient_matches_finite_differences():
    torch.manual_seed(0)
    cfg = ScheduleConfig(beta1=1.7)
    e_x = torch.eye(4, dtype=torch.float64)[torch.randint(0, 4, (2, 6))]
    logits = torch.randn(2, 6, 4, dtype=torch.float64, requires_grad=True)
    mask = torch.ones(2, 6, dtype=torch.bool)
    mask[0, 4:] = False

    def f(lg):
        return continuous_loss(torch.softmax(lg, dim=-1), e_x, 0.37, cfg, mask)

    loss = f(logits)
    loss.backward()
    eps = 1e-6
    for _ in range(20):
        i, j, k = (
            torch.randint(0, 2, ()).item(),
            torch.randint(0, 6, ()).item(),
            torch.randint(0, 4, ()).item(),
        )
        lp = logits.detach().clone()
        lm = logits.detach().clone()
        lp[i, j, k] += eps
        lm[i, j, k] -= eps
        fd = (f(lp) - f(lm)).item() / (2 * eps)
        an = logits.grad[i, j, k].item()
        assert abs(fd - an) <= 1e-5 * max(1.0, abs(fd))


def test_continuous_loss_convex_min_at_target():
    cfg = ScheduleConfig()
    e_x = torch.tensor([[[0.0, 1.0, 0.0]]])
    base = continuous_loss(e_x.clone(), e_x, 0.9, cfg)
    for _ in range(50):
        p = torch.softmax(torch.randn(1, 1, 3), dim=-1)
        assert continuous_loss(p, e_x, 0.9, cfg) >= base


def test_rl_loss_valid_is_zero():
    e_hat = torch.rand(2, 5, 4).softmax(dim=-1)
    assert rl_loss(e_hat, torch.tensor([1.0, 1.0]), 0.5).item() == 0.0


def test_rl_loss_arithmetic_single_position():
    e_hat = torch.tensor([[[0.9, 0.1]]])
    out = rl_loss(e_hat, torch.tensor([0.0]), 0.01)
    assert out.item() == pytest.approx(0.009)


def test_rl_loss_arithmetic_two_positions():
    e_hat = torch.tensor([[[0.8, 0.2], [0.4, 0.6]]])
    out = rl_loss(e_hat, torch.tensor([0.0]), 0.01)
    assert out.item() == pytest.approx(0.007)


def test_rl_loss_rejects_negative_eta():
    with pytest.raises(ValueError):
        rl_loss(torch.ones(1, 1, 2) / 2, torch.tensor([0.0]), -0.1)


def test_cfg_combine_cases():
    z_c = torch.tensor([[2.0, 0.0]])
    z_u = torch.tensor([[1.0, 1.0]])
    assert torch.equal(cfg_combine(z_c, z_u, 0.0), z_c)
    assert torch.equal(cfg_combine(z_c, z_c, 0.7), z_c)
    assert torch.allclose(cfg_combine(z_c, z_u, 0.5), torch.tensor([[2.5, -0.5]]))
    with pytest.raises(ValueError):
        cfg_combine(torch.zeros(1, 2), torch.zeros(1, 3), 0.5)


def test_guidance_config_validation():
    GuidanceConfig(strength=0.5, condition=(0.1, 0.2))
    with pytest.raises(ValueError):
        GuidanceConfig(strength=float("nan"))
