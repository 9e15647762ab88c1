# -*- coding: utf-8 -*-
"""
Define the main namespace for testing
"""

import functools
import os

TESTING_INPUT = os.path.join(os.path.dirname(__file__), "test_files")

# Small network layout that keeps the CPU time of the tests low.
TINY_BLOCKS = {"stages": 3, "base_width": 8, "max_width": 32, "res_blocks": 1}
TINY_NETWORKS = (
    "transformer",
    "classifier",
    "landmark_discriminator",
    "rotator",
    "pose_encoder",
    "face_discriminator",
    "pose_discriminator",
    "generator",
    "expression_encoder",
)


def tiny_config_dict(**kwargs):
    """Configuration dictionary with tiny networks and one step per epoch"""
    data = {
        "resolution": 64,
        "progress": False,
        "model": {
            **{name: dict(TINY_BLOCKS) for name in TINY_NETWORKS},
            "pose_dim": 8,
            "style_dim": 8,
            "identity_feature_dim": 16,
            "perceptual_widths": [4, 8],
        },
        "schedules": {
            stage: {"epochs": 1, "batch_size": 2, "steps_per_epoch": 1}
            for stage in ["T", "R", "G"]
        },
    }
    data.update(kwargs)
    return data


def tiny_config(**kwargs):
    """RunConfig with tiny networks, see tiny_config_dict"""
    from landmark_reenact.config import config_from_dict

    return config_from_dict(tiny_config_dict(**kwargs))


@functools.lru_cache(maxsize=None)
def small_dataset():
    """In memory synthetic dataset with 3 training and 1 test identity, 2
    expressions and 3 poses"""
    from landmark_reenact.dataset import build_synthetic_dataset

    return build_synthetic_dataset(
        n_ids=4, n_expr=2, n_poses=3, resolution=64, seed=0, n_test=1
    )


def discriminator_gradcheck(discriminator, loss, real, fake):
    """Finite difference check of the discriminator side of an adversarial loss
    with respect to the weight of the last discriminator layer"""
    import torch

    parameters = {n: p.detach() for n, p in discriminator.named_parameters()}
    name = [n for n in parameters if n.endswith("weight")][-1]

    def d_loss(value):
        d = lambda x: torch.func.functional_call(  # noqa: E731
            discriminator, {**parameters, name: value}, (x,)
        )
        return loss(d, real, fake)[0]

    value = parameters[name].clone().requires_grad_()
    return torch.autograd.gradcheck(d_loss, (value,), eps=1e-6, atol=1e-6, rtol=1e-3)
