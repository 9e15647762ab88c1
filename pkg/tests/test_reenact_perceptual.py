# -*- coding: utf-8 -*-
"""Test the functionality of perceptual"""

import pytest
import torch

from landmark_reenact.perceptual import FixedRandomExtractor, InputTap


def test_reenact_perceptual_fixed_random_seed():
    """Extractors with the same seed are identical, other seeds differ"""

    first = FixedRandomExtractor(seed=3, widths=(4, 8, 16))
    second = FixedRandomExtractor(seed=3, widths=(4, 8, 16))
    other = FixedRandomExtractor(seed=4, widths=(4, 8, 16))

    for p_1, p_2 in zip(first.parameters(), second.parameters()):
        assert torch.equal(p_1, p_2)
    assert not torch.equal(first.convs[0].weight, other.convs[0].weight)


def test_reenact_perceptual_fixed_random_activations():
    """One frozen tap per stage, each halving the resolution"""

    extractor = FixedRandomExtractor(seed=0, widths=(4, 8, 16))
    assert extractor.taps == ["conv1", "conv2", "conv3"]
    assert extractor.feature_dim == 16
    assert not any(p.requires_grad for p in extractor.parameters())
    assert not extractor.training

    images = torch.rand(2, 3, 32, 32, requires_grad=True)
    activations = extractor(images)
    assert [a.shape for a in activations] == [
        (2, 4, 16, 16),
        (2, 8, 8, 8),
        (2, 16, 4, 4),
    ]

    # Gradients reach the input but not the frozen weights.
    activations[-1].sum().backward()
    assert images.grad is not None
    assert all(p.grad is None for p in extractor.parameters())


def test_reenact_perceptual_input_tap():
    """The input tap returns its input"""

    tap = InputTap()
    images = torch.rand(2, 3, 8, 8)
    activations = tap(images)
    assert tap.taps == ["input"]
    assert len(activations) == 1
    assert torch.equal(activations[0], images)


@pytest.mark.slow
def test_reenact_perceptual_vgg():
    """VGG taps without pretrained weights"""

    pytest.importorskip("torchvision")
    from landmark_reenact.perceptual import VGGPerceptualNetwork

    network = VGGPerceptualNetwork(layers=(3, 8))
    assert network.taps == ["features.3", "features.8"]
    assert network.feature_dim == 128
    activations = network(torch.rand(1, 3, 32, 32))
    assert [a.shape for a in activations] == [(1, 64, 32, 32), (1, 128, 16, 16)]
