import numpy as np
import pytest

from aumol.model import AuMolModel, ModelConfig

# small enough for per-coordinate finite differences, same topology as the toy default
TINY = dict(n_mels=6, d_enc=8, enc_layers=1, d_hidden_adapter=6, d_llm=8, dec_layers=1, n_heads=2,
            max_audio_frames=8, max_text_len=4, lora_rank=2, alphabet="abc :", prompt="a:")


@pytest.fixture
def tiny_config():
    return ModelConfig(**TINY)


@pytest.fixture
def tiny_model(tiny_config):
    return AuMolModel(tiny_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, shown after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
