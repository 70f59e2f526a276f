"""Fixtures for driving the service over real sockets."""

from __future__ import annotations

import numpy as np
import pytest

from td_sidecar import ServerConfig, SidecarServer


@pytest.fixture(scope="module")
def echo_url():
    with SidecarServer(ServerConfig(port=0)) as srv:
        yield srv.url


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)
