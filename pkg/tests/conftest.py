import shutil
from pathlib import Path

import pytest

from rcbev.config import load_config
from rcbev.synthetic import make_scene

REPO = Path(__file__).resolve().parents[1]
FIXTURE_DATASET = REPO / "data" / "fixture"
FIXTURE_CONFIG = REPO / "configs" / "fixture.yaml"


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def fixture_dataset(tmp_path):
    dst = tmp_path / "fixture"
    shutil.copytree(FIXTURE_DATASET, dst)
    return dst


@pytest.fixture
def fixture_config():
    return load_config(FIXTURE_CONFIG)


@pytest.fixture(scope="session")
def scene5(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene5")
    make_scene(root, num_frames=5, seed=3)
    return root


@pytest.fixture
def acceptance_report(request):
    """Call with (number, title, passed, detail); lines print in the terminal summary."""

    def report(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        request.config.acceptance_lines.append(f"[{status}] criterion {number:>2}: {title} {detail}".rstrip())
        assert passed, f"criterion {number} failed: {detail}"

    return report


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
