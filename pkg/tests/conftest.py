import json
import sys
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# criterion number -> (status, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def mini_dir() -> Path:
    return Path(str(resources.files("seglens.data").joinpath("mini")))


@pytest.fixture
def mini_config(mini_dir, tmp_path) -> Path:
    """Copy of the bundled mini config with absolute inputs and a temp out_dir."""
    doc = json.loads((mini_dir / "config.json").read_text())
    doc["paths"]["corpus"] = str(mini_dir / "corpus.jsonl")
    doc["paths"]["embeddings"] = str(mini_dir / "embeddings.txt")
    doc["paths"]["out_dir"] = str(tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
