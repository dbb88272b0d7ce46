from contextlib import contextmanager
from pathlib import Path

import pytest

from polysimp.dsl import parse

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def load(name: str):
    return parse((CORPUS / name).read_text())


@pytest.fixture
def corpus():
    return load


def pytest_configure(config):
    config.acceptance_results = {}


@pytest.fixture
def criterion(request):
    """``with criterion("A1", "detail"):`` records PASS/FAIL for the summary."""
    results = request.config.acceptance_results

    @contextmanager
    def run(key: str, detail: str):
        try:
            yield
        except BaseException:
            results[key] = ("FAIL", detail)
            print(f"{key} FAIL: {detail}")
            raise
        results[key] = ("PASS", detail)
        print(f"{key} PASS: {detail}")

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[1:])):
        status, detail = results[key]
        terminalreporter.write_line(f"{key} {status}: {detail}")
