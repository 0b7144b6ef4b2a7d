from __future__ import annotations

import pytest

from forgedit.backend import ToyBackend
from forgedit.captioner import CaptionerConfig
from forgedit.finetune import FinetuneConfig
from forgedit.fixtures import polar_bear_image
from forgedit.images import image_digest
from forgedit.pipeline import Pipeline
from forgedit.sampling import SamplerSettings
from forgedit.store import ArtifactStore

POLAR_CAPTION = "a polar bear on the ice field"


@pytest.fixture(scope="session")
def backend() -> ToyBackend:
    # immutable after construction; safe to share across tests
    return ToyBackend()


@pytest.fixture(scope="session")
def polar_image():
    return polar_bear_image()


@pytest.fixture
def store(tmp_path) -> ArtifactStore:
    return ArtifactStore(tmp_path / "store")


@pytest.fixture
def fast_finetune() -> FinetuneConfig:
    return FinetuneConfig(steps=6, seed=7)


@pytest.fixture
def fast_sampler() -> SamplerSettings:
    return SamplerSettings(seed=0, steps=2, guidance_scale=7.5)


@pytest.fixture
def make_pipeline(tmp_path, backend, fast_finetune, fast_sampler, polar_image):
    """Factory for cheap pipelines: tiny finetune, short sampler, stub captioner."""
    counter = {"n": 0}

    def factory(**overrides) -> Pipeline:
        counter["n"] += 1
        store = overrides.pop("store", None) or ArtifactStore(tmp_path / f"store-{counter['n']}")
        captioner = overrides.pop(
            "captioner",
            CaptionerConfig(mode="stub", stub_table={image_digest(polar_image): POLAR_CAPTION}),
        )
        return Pipeline(
            store=store,
            backend=overrides.pop("backend", backend),
            captioner=captioner,
            finetune_config=overrides.pop("finetune_config", fast_finetune),
            sampler_defaults=overrides.pop("sampler_defaults", fast_sampler),
        )

    return factory


@pytest.fixture
def pipeline(make_pipeline) -> Pipeline:
    return make_pipeline()
