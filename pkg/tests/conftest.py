import numpy as np
import pytest

from fedwtp.config import resolve


def small_config(**sections):
    """A fast experiment config: 10 BSs, short series, few rounds."""
    raw = {
        "data": {"length": 96, "period": 12, "noise_std": 1.0},
        "window": {"r": 3, "s": 1},
        "model": {"hidden_dims": [4]},
        "train": {"learning_rate": 0.05, "batch_size": 16, "local_epochs": 1},
        "fleet": {"num_bs": 10, "adversary_pct": 20},
        "rounds": 4,
    }
    for key, value in sections.items():
        if isinstance(value, dict):
            raw.setdefault(key, {}).update(value)
        else:
            raw[key] = value
    return resolve(raw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance scorecard: criterion number -> (passed, detail)
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
