# -*- coding: utf-8 -*-
"""Fixed feature extractors for the perceptual loss and the FID.

All extractors map a batch of B x 3 x H x W images in [0, 1] to a list of
activations, one per tap layer. Their parameters never receive gradients.
"""

# Import python modules.
import abc
from typing import List, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

# Import local stuff
from .errors import DependencyError


class PerceptualNetwork(nn.Module, abc.ABC):
    """Interface of the fixed networks of the perceptual loss"""

    @property
    @abc.abstractmethod
    def taps(self) -> List[str]:
        """Names of the tap layers"""

    @abc.abstractmethod
    def activations(self, images: torch.Tensor) -> List[torch.Tensor]:
        """Activations at the tap layers, in the order of taps"""

    def forward(self, images):
        return self.activations(images)

    def freeze(self):
        self.eval()
        for parameter in self.parameters():
            parameter.requires_grad_(False)
        return self


class FixedRandomExtractor(PerceptualNetwork):
    """Convolution stack with seeded random weights.

    Every stage is a 3x3 convolution with stride 2 followed by a leaky ReLU, the
    output of every stage is a tap. The weights are drawn with He scaling from a
    generator seeded with seed, so two extractors with the same seed are identical.

    Args
    ----
    seed:
        Seed of the weights
    widths:
        Channel count of every stage, the last one is the FID feature dimension
    """

    def __init__(self, *, seed: int = 0, widths: Sequence[int] = (16, 32, 64)):
        super().__init__()
        generator = torch.Generator().manual_seed(seed)
        self.convs = nn.ModuleList()
        channels = 3
        for width in widths:
            conv = nn.Conv2d(channels, width, kernel_size=3, stride=2, padding=1)
            with torch.no_grad():
                std = np.sqrt(2.0 / (channels * 9))
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=generator) * std
                )
                conv.bias.zero_()
            self.convs.append(conv)
            channels = width
        self.freeze()

    @property
    def taps(self):
        return [f"conv{i + 1}" for i in range(len(self.convs))]

    @property
    def feature_dim(self):
        return self.convs[-1].out_channels

    def activations(self, images):
        outputs = []
        x = images
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
            outputs.append(x)
        return outputs


class InputTap(PerceptualNetwork):
    """Network whose only tap is the raw input"""

    @property
    def taps(self):
        return ["input"]

    @property
    def feature_dim(self):
        return 3

    def activations(self, images):
        return [images]


class VGGPerceptualNetwork(PerceptualNetwork):
    """torchvision VGG19 features tapped after the given layers.

    Requires the optional torchvision dependency. The pretrained ImageNet weights are
    only downloaded with pretrained=True.

    Args
    ----
    layers:
        Indices of the layers of vgg19().features after which a tap is taken
    pretrained:
        Load the default ImageNet weights
    """

    MEAN = (0.485, 0.456, 0.406)
    STD = (0.229, 0.224, 0.225)

    def __init__(self, *, layers: Sequence[int] = (3, 8, 17, 26), pretrained=False):
        super().__init__()
        try:
            from torchvision.models import VGG19_Weights, vgg19
        except ImportError as error:
            raise DependencyError(
                "VGGPerceptualNetwork needs torchvision, install the 'pretrained' extra"
            ) from error

        weights = VGG19_Weights.DEFAULT if pretrained else None
        features = vgg19(weights=weights).features
        self.layers = tuple(sorted(layers))
        self.slices = nn.ModuleList()
        start = 0
        for end in self.layers:
            self.slices.append(
                nn.Sequential(*[features[i] for i in range(start, end + 1)])
            )
            start = end + 1
        self.register_buffer("mean", torch.tensor(self.MEAN)[None, :, None, None])
        self.register_buffer("std", torch.tensor(self.STD)[None, :, None, None])
        self.freeze()

    @property
    def taps(self):
        return [f"features.{layer}" for layer in self.layers]

    @property
    def feature_dim(self):
        return [m for m in self.slices[-1] if isinstance(m, nn.Conv2d)][-1].out_channels

    def activations(self, images):
        x = (images - self.mean) / self.std
        outputs = []
        for vgg_slice in self.slices:
            x = vgg_slice(x)
            outputs.append(x)
        return outputs
