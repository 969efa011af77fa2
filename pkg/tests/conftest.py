import pytest

from moca import kb as kb_mod


@pytest.fixture(scope="session")
def seed_paths():
    return kb_mod.seed_kb_paths()


@pytest.fixture(scope="session")
def seed_kb(seed_paths):
    return kb_mod.load_kb(seed_paths)
