# -*- coding: utf-8 -*-
"""Common parameter and optimizer bookkeeping of the three training stages."""

# Import python modules.
from typing import Dict

import torch
import torch.nn as nn

ADAM_BETAS = (0.5, 0.999)


class TrainingStage:
    """Base class of the stage trainers.

    A stage owns its networks (by name) and one Adam optimizer per trained network.
    The state of both is what a stage checkpoint stores.

    Args
    ----
    networks:
        Dictionary of all networks of the stage
    learning_rate:
        Initial learning rate of all optimizers
    """

    tag = None

    def __init__(self, networks: Dict[str, nn.Module], *, learning_rate: float):
        self.networks = networks
        self.optimizers = {
            name: torch.optim.Adam(
                network.parameters(), lr=learning_rate, betas=ADAM_BETAS
            )
            for name, network in networks.items()
            if any(True for _ in network.parameters())
        }

    def set_learning_rate(self, learning_rate: float):
        for optimizer in self.optimizers.values():
            for group in optimizer.param_groups:
                group["lr"] = learning_rate

    def state_dict(self):
        return {
            "networks": {
                name: network.state_dict() for name, network in self.networks.items()
            },
            "optimizers": {
                name: optimizer.state_dict()
                for name, optimizer in self.optimizers.items()
            },
        }

    def load_state_dict(self, state, *, optimizers: bool = True):
        for name, network in self.networks.items():
            network.load_state_dict(state["networks"][name])
        if optimizers:
            for name, optimizer in self.optimizers.items():
                optimizer.load_state_dict(state["optimizers"][name])

    def train(self):
        for network in self.networks.values():
            network.train()

    def eval(self):
        for network in self.networks.values():
            network.eval()

    @staticmethod
    def _step(optimizer, loss):
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
