"""Shared fixtures: default pipeline objects and a small trained model.

The trained model is expensive (a few seconds), so it is built once per
session and reused by every test that needs realistic predictions.
"""

import time

import numpy as np
import pytest

from histocolor import colorspace, config, net, synth


@pytest.fixture(scope="session")
def default_cfg():
    return config.default_config()


@pytest.fixture(scope="session")
def net_cfg(default_cfg):
    return config.build_net_config(default_cfg)


@pytest.fixture(scope="session")
def tables(default_cfg):
    return config.build_tables(default_cfg)


@pytest.fixture(scope="session")
def loss_cfg(default_cfg):
    return config.build_loss_config(default_cfg)


def train_model(cfg, pairs, seed):
    """Mirror of the CLI training loop for in-memory (gray, rgb) pairs.

    Returns the trained model and the per-epoch mean losses.
    """
    model = net.init_model(config.build_net_config(cfg), seed=seed)
    tbl = config.build_tables(cfg)
    loss_cfg = config.build_loss_config(cfg)
    if cfg.rebalance:
        probe = [gray for gray, _ in pairs[: min(8, len(pairs))]]
        net.rebalance(model, net.compute_tap_moments(model, probe))
    seeds = np.random.SeedSequence(seed)
    perm = np.random.default_rng(seeds.spawn(1)[0])
    history = []
    for _ in range(cfg.epochs):
        order = perm.permutation(len(pairs))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [pairs[i] for i in order[start : start + cfg.batch_size]]
            model, loss = net.train_step(
                model, batch, loss_cfg, tbl, cfg.lr, seeds.spawn(1)[0]
            )
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return model, history


@pytest.fixture(scope="session")
def train_images():
    """The 64-image 32x32 training corpus."""
    return synth.corpus_arrays(64, 32, seed=0)


@pytest.fixture(scope="session")
def heldout_images():
    """16 corpus images disjoint from the training set."""
    return [synth.generate_image(0, 64 + i, 32) for i in range(16)]


@pytest.fixture(scope="session")
def trained(default_cfg, train_images):
    """Default net trained with seed 0 for the configured 10 epochs."""
    pairs = [(colorspace.desaturate(rgb), rgb) for rgb in train_images]
    t0 = time.monotonic()
    model, history = train_model(default_cfg, pairs, seed=0)
    seconds = time.monotonic() - t0
    return {"model": model, "history": history, "seconds": seconds}
