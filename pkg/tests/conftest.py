import pytest

from privtest import demo_model, source_laws


@pytest.fixture(scope="session")
def model():
    return demo_model()


@pytest.fixture(scope="session")
def identity_laws(model):
    """Per-slot laws of the unmanaged source (identity policy, k=1)."""
    return source_laws(model, k=1)
