import numpy as np
import pytest

from pausebench import cli


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Small synthetic corpus with audio and embeddings, shared across
    pipeline/CLI/serve tests. Built once through the CLI."""
    root = tmp_path_factory.mktemp("corpus")
    rc = cli.main([
        "synth", "--out", str(root),
        "--n-recordings", "12", "--subjects", "6", "--seed", "7",
        "--min-duration", "18", "--max-duration", "24",
        "--audio", "--emb", "--tasks", "both",
    ])
    assert rc == 0
    return root
