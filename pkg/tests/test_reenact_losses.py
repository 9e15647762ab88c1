# -*- coding: utf-8 -*-
"""Test the functionality of losses"""

import numpy as np
import pytest
import torch

from landmark_reenact.losses import (
    LOG_EPS,
    LossReport,
    log_gan_losses,
    lsgan_losses,
    weighted_total,
)


def _full(value, shape=(4, 1, 8, 8)):
    return torch.full(shape, value, dtype=torch.float64)


def test_reenact_losses_log_gan_closed_forms():
    """Log loss of the probability discriminators on the closed form cases"""

    d_loss, _ = log_gan_losses(_full(1.0 - LOG_EPS), _full(LOG_EPS))
    assert 0.0 <= d_loss.item() <= 1e-6

    d_loss, g_loss = log_gan_losses(_full(0.5), _full(0.5))
    assert d_loss.item() == pytest.approx(2.0 * np.log(2.0), abs=1e-12)
    assert g_loss.item() == pytest.approx(np.log(2.0), abs=1e-12)

    # Outputs outside of (0, 1) are clamped.
    d_loss, g_loss = log_gan_losses(_full(1.0), _full(0.0))
    assert np.isfinite(d_loss.item()) and np.isfinite(g_loss.item())


def test_reenact_losses_lsgan_closed_forms():
    """Least squares losses on the closed form cases"""

    d_loss, _ = lsgan_losses(_full(1.0), _full(0.0))
    assert d_loss.item() == 0.0

    d_loss, _ = lsgan_losses(_full(0.5), _full(0.5))
    assert d_loss.item() == pytest.approx(0.5, abs=1e-12)

    _, g_loss = lsgan_losses(_full(0.3), _full(1.0))
    assert g_loss.item() == 0.0


def test_reenact_losses_non_negative():
    """All adversarial losses are non negative"""

    torch.manual_seed(0)
    for _ in range(10):
        real = torch.rand(4, 1, 8, 8, dtype=torch.float64)
        fake = torch.rand(4, 1, 8, 8, dtype=torch.float64)
        for losses in [log_gan_losses(real, fake), lsgan_losses(real, fake)]:
            assert all(value.item() >= 0.0 for value in losses)


def test_reenact_losses_weighted_total():
    """The total is the weighted sum of the terms with a weight"""

    terms = {"a": torch.tensor(2.0), "b": torch.tensor(3.0), "c": torch.tensor(7.0)}
    total = weighted_total(terms, {"a": 0.5, "b": 2.0})
    assert total.item() == pytest.approx(7.0)


def test_reenact_losses_report():
    """Loss reports hold detached floats"""

    value = torch.tensor(2.0, requires_grad=True)
    report = LossReport.from_tensors(
        {"pix": value * 2.0}, value * 3.0, {"d_loss": value + 1.0}
    )
    assert report.terms == {"pix": 4.0}
    assert report.total == 6.0
    assert report.as_dict() == {"pix": 4.0, "d_loss": 3.0, "total": 6.0}
