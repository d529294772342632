"""Tests configuration."""

# pylint:disable=redefined-outer-name
import asyncio
from collections.abc import Callable
from typing import AsyncGenerator

import pytest
import pytest_asyncio

from aiodeconv import Deconvolution
from aiodeconv.synth import SynthSpec, generate
from tests import MIXTURE, REFERENCE, TRUTH, fixture_path


@pytest_asyncio.fixture(autouse=True)
def loop_factory() -> Callable[..., asyncio.AbstractEventLoop]:
    """Create loop."""
    return asyncio.new_event_loop


@pytest.fixture()
def settings(tmp_path) -> dict:
    """Settings for the small fixture dataset."""
    return {
        "dataset": {
            "mixture": fixture_path(MIXTURE),
            "reference": fixture_path(REFERENCE),
            "truth": fixture_path(TRUTH),
        },
        "solver": {"param_search": "off"},
        "eval": {"samples": "200"},
        "output": {"directory": str(tmp_path / "results")},
    }


@pytest_asyncio.fixture()
async def runner(settings) -> AsyncGenerator:
    """Create runner."""
    async with Deconvolution(settings) as obj:
        yield obj


@pytest.fixture(scope="session")
def small_synth():
    """Noiseless dataset with replicates, shared by several tests."""
    spec = SynthSpec(
        n_genes=120, n_types=3, n_samples=4, markers_per_type=20, replicates_per_type=3
    )
    return generate(spec, seed=11)
