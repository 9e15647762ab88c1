# -*- coding: utf-8 -*-
"""Adversarial losses and the loss report shared by all training stages."""

# Import python modules.
from dataclasses import dataclass, field
from typing import Dict

import torch

LOG_EPS = 1e-7


def log_gan_losses(p_real: torch.Tensor, p_fake: torch.Tensor, eps: float = LOG_EPS):
    """Log loss of a probability discriminator.

    The discriminator minimizes d_loss = -mean[log D(real) + log(1 - D(fake))], the
    generator minimizes the non saturating g_loss = -mean[log D(fake)].
    Probabilities are clamped to [eps, 1 - eps].

    Args
    ----
    p_real:
        Discriminator outputs on real samples
    p_fake:
        Discriminator outputs on generated samples

    Return
    ----
    (d_loss, g_loss)
    """

    p_real = p_real.clamp(eps, 1.0 - eps)
    p_fake = p_fake.clamp(eps, 1.0 - eps)
    d_loss = -(torch.log(p_real).mean() + torch.log(1.0 - p_fake).mean())
    g_loss = -torch.log(p_fake).mean()
    return d_loss, g_loss


def lsgan_losses(score_real: torch.Tensor, score_fake: torch.Tensor):
    """Least squares GAN losses with real target 1 and fake target 0.

    Return
    ----
    (d_loss, g_loss) with d_loss = mean[(D(real) - 1)^2] + mean[D(fake)^2] and
    g_loss = mean[(D(fake) - 1)^2]
    """

    d_loss = ((score_real - 1.0) ** 2).mean() + (score_fake**2).mean()
    g_loss = ((score_fake - 1.0) ** 2).mean()
    return d_loss, g_loss


def weighted_total(terms: Dict[str, torch.Tensor], weights: Dict[str, float]):
    """Sum of the weighted loss terms, terms without a weight are not included"""
    total = None
    for name, weight in weights.items():
        value = weight * terms[name]
        total = value if total is None else total + value
    return total


@dataclass
class LossReport:
    """Detached loss values of one training step

    Args
    ----
    terms:
        Unweighted generator side loss terms
    total:
        Weighted sum of the terms the stage network was optimized for
    auxiliary:
        Losses of the auxiliary networks (discriminators, classifiers)
    """

    terms: Dict[str, float]
    total: float
    auxiliary: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_tensors(cls, terms, total, auxiliary=None):
        return cls(
            terms={name: float(value.detach()) for name, value in terms.items()},
            total=float(total.detach()),
            auxiliary={
                name: float(value.detach()) for name, value in (auxiliary or {}).items()
            },
        )

    def as_dict(self):
        """Flat dictionary of all reported values"""
        values = dict(self.terms)
        values.update(self.auxiliary)
        values["total"] = self.total
        return values
