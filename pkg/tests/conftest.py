import pytest

from src.backchannel.adapters import traffic
from src.components.container import Container
from src.pipeline.components import PIPELINE_COMPONENT_TYPES
from src.utils.settings import Settings

from .support import TEST_COMPONENT_TYPES


@pytest.fixture
def container():
    container = Container(name="test")
    container.register_types(*TEST_COMPONENT_TYPES)
    container.register_types(*PIPELINE_COMPONENT_TYPES)
    yield container
    container.shutdown()


@pytest.fixture
def fast_settings():
    """Settings with short periods so in-process pipelines settle quickly"""
    settings = Settings()
    settings.agents.cycle_interval = 0.01
    settings.pipeline.advertise_period = 0.2
    settings.pipeline.batch_size = 5
    settings.pipeline.fetch_timeout = 1.0
    settings.pipeline.manager_enabled = False
    return settings


@pytest.fixture
def corpus(tmp_path):
    """Twenty small TXT documents"""
    directory = tmp_path / "corpus"
    directory.mkdir()
    for n in range(1, 21):
        (directory / f"d{n:06d}.txt").write_text(f"Title {n}\n\nalpha beta doc{n} gamma\n")
    return directory


@pytest.fixture(autouse=True)
def reset_traffic():
    traffic.reset()
    yield
