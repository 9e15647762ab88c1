# -*- coding: utf-8 -*-
"""Test the functionality of network_blocks"""

import pytest
import torch

from landmark_reenact.errors import ConfigError, ShapeMismatch
from landmark_reenact.network_blocks import (
    AdaINParams,
    AdaINResBlock,
    BlockConfig,
    StyleHead,
    TensorSpec,
    adain,
    build_decoder,
    build_encoder,
    build_patch_discriminator,
    encoder_output_spec,
    zero_module,
)


def _checkerboard(batch, channels, size):
    """Content with zero mean and unit population std in every channel"""
    rows = torch.arange(size)[:, None]
    cols = torch.arange(size)[None, :]
    board = 1.0 - 2.0 * ((rows + cols) % 2).double()
    return board.expand(batch, channels, size, size).clone()


def _params(mean, std):
    return AdaINParams(
        mean=torch.as_tensor(mean, dtype=torch.float64),
        std=torch.as_tensor(std, dtype=torch.float64),
    )


def test_reenact_network_blocks_adain_closed_form():
    """Standardized content with the style (3, 2) gives 2 * content + 3"""

    content = _checkerboard(2, 3, 4)
    output = adain(content, _params(torch.full((2, 3), 3.0), torch.full((2, 3), 2.0)))
    assert torch.allclose(output, 2.0 * content + 3.0, atol=1e-5, rtol=0.0)


def test_reenact_network_blocks_adain_self_style():
    """The statistics of the content itself as style reproduce the content"""

    torch.manual_seed(0)
    content = torch.randn(2, 4, 8, 8, dtype=torch.float64)
    mean = content.mean(dim=(2, 3))
    std = content.var(dim=(2, 3), unbiased=False).sqrt()
    output = adain(content, _params(mean, std))
    assert torch.allclose(output, content, atol=1e-4, rtol=0.0)


@pytest.mark.parametrize("size", [4, 8, 16])
def test_reenact_network_blocks_adain_statistics(size):
    """The output channel statistics are the style parameters"""

    torch.manual_seed(1)
    content = 3.0 * torch.randn(3, 5, size, size, dtype=torch.float64) + 1.0
    mean = torch.randn(3, 5, dtype=torch.float64)
    std = torch.rand(3, 5, dtype=torch.float64) + 0.1
    output = adain(content, _params(mean, std))

    assert torch.allclose(output.mean(dim=(2, 3)), mean, atol=1e-5, rtol=0.0)
    assert torch.allclose(
        output.var(dim=(2, 3), unbiased=False).sqrt(), std, atol=1e-4, rtol=0.0
    )


def test_reenact_network_blocks_adain_shape_mismatch():
    """Style parameters have to match the content channels and batch"""

    content = torch.zeros(2, 4, 8, 8)
    with pytest.raises(ShapeMismatch):
        adain(content, AdaINParams(torch.zeros(2, 3), torch.ones(2, 3)))
    with pytest.raises(ShapeMismatch):
        adain(content, AdaINParams(torch.zeros(3, 4), torch.ones(3, 4)))
    with pytest.raises(ShapeMismatch):
        AdaINParams(torch.zeros(2, 4), torch.ones(2, 3))


def test_reenact_network_blocks_adain_gradient():
    """Analytic gradients of AdaIN match central finite differences"""

    torch.manual_seed(2)
    content = torch.randn(2, 3, 4, 4, dtype=torch.float64, requires_grad=True)
    mean = torch.randn(2, 3, dtype=torch.float64, requires_grad=True)
    std = (torch.rand(2, 3, dtype=torch.float64) + 0.5).requires_grad_()

    assert torch.autograd.gradcheck(
        lambda x, m, s: adain(x, AdaINParams(m, s)),
        (content, mean, std),
        eps=1e-6,
        atol=1e-6,
        rtol=1e-3,
    )


def test_reenact_network_blocks_res_block_zero_init():
    """A residual block with zero weights and zero second style mean is the
    identity"""

    torch.manual_seed(3)
    block = zero_module(AdaINResBlock(4)).double()
    x = torch.randn(2, 4, 8, 8, dtype=torch.float64)
    style = (
        _params(torch.randn(2, 4), torch.rand(2, 4) + 0.5),
        _params(torch.zeros(2, 4), torch.rand(2, 4) + 0.5),
    )
    assert torch.equal(block(x, style), x)


def test_reenact_network_blocks_zero_mean_head():
    """A zero mean style head makes a zeroed residual block the identity for any
    style vector"""

    torch.manual_seed(5)
    heads = [StyleHead(6, 4).double(), StyleHead(6, 4, zero_mean=True).double()]
    block = zero_module(AdaINResBlock(4)).double()
    x = torch.randn(2, 4, 8, 8, dtype=torch.float64)
    style_vector = torch.randn(2, 6, dtype=torch.float64)
    style = (heads[0](style_vector), heads[1](style_vector))

    assert torch.count_nonzero(style[0].mean) > 0
    assert torch.equal(style[1].mean, torch.zeros(2, 4, dtype=torch.float64))
    assert torch.all(style[1].std > 0.0)
    assert torch.equal(block(x, style), x)


def test_reenact_network_blocks_res_block_gradient():
    """Input and parameter gradients of the residual block match finite
    differences"""

    torch.manual_seed(4)
    block = AdaINResBlock(4).double()
    style = (
        _params(torch.randn(1, 4), torch.rand(1, 4) + 0.5),
        _params(torch.randn(1, 4), torch.rand(1, 4) + 0.5),
    )
    x = torch.randn(1, 4, 8, 8, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(
        lambda inputs: block(inputs, style), (x,), eps=1e-6, atol=1e-6, rtol=1e-3
    )

    bias = block.conv_2.bias.detach().clone().requires_grad_()
    weights = {name: p.detach() for name, p in block.named_parameters()}

    def with_bias(value):
        parameters = dict(weights)
        parameters["conv_2.bias"] = value
        return torch.func.functional_call(block, parameters, (x.detach(), style))

    assert torch.autograd.gradcheck(with_bias, (bias,), eps=1e-6, atol=1e-6, rtol=1e-3)


def test_reenact_network_blocks_res_block_style_count():
    """A residual block needs exactly two AdaIN parameter sets"""
    block = AdaINResBlock(4)
    style = AdaINParams(torch.zeros(1, 4), torch.ones(1, 4))
    with pytest.raises(ShapeMismatch):
        block(torch.zeros(1, 4, 8, 8), (style,))


def test_reenact_network_blocks_shapes():
    """Encoder, decoder and discriminator stacks produce the documented shapes"""

    torch.manual_seed(5)
    cfg = BlockConfig(stages=4, base_width=8, max_width=32, res_blocks=1)
    images = torch.rand(2, 3, 64, 64)

    features = build_encoder(cfg, 3, 64)(images)
    assert features.shape == (2, 32, 4, 4)
    assert encoder_output_spec(cfg, 64) == TensorSpec(32, 4, 4)
    assert build_decoder(cfg, 3)(features).shape == (2, 3, 64, 64)

    discriminator_cfg = BlockConfig(stages=3, base_width=8, max_width=32)
    scores = build_patch_discriminator(discriminator_cfg, 3, output="sigmoid")(images)
    assert scores.shape == (2, 1, 8, 8)
    assert scores.min() >= 0.0 and scores.max() <= 1.0


def test_reenact_network_blocks_style_head():
    """Style heads always produce strictly positive standard deviations"""

    head = StyleHead(8, 4)
    with torch.no_grad():
        head.affine.bias.fill_(-50.0)
    params = head(torch.randn(3, 8))
    assert params.mean.shape == (3, 4)
    assert torch.all(params.std > 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"stages": 0},
        {"base_width": 12},
        {"base_width": 64, "max_width": 32},
        {"res_blocks": -1},
        {"stages": 2, "norms": ("none",)},
        {"stages": 2, "norms": ("none", "layer")},
    ],
)
def test_reenact_network_blocks_config_errors(kwargs):
    """Invalid block layouts raise ConfigError"""
    with pytest.raises(ConfigError):
        BlockConfig(**kwargs)


def test_reenact_network_blocks_too_many_stages():
    """Stacks that reduce the input below one pixel are rejected"""
    with pytest.raises(ConfigError):
        encoder_output_spec(BlockConfig(stages=7), 64)
    with pytest.raises(ConfigError):
        TensorSpec(0, 4, 4)
