import json
import os

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS = os.path.join(ROOT, "corpus")
FIXTURES = os.path.join(ROOT, "fixtures")
DOCS = os.path.join(ROOT, "docs")
GOLDEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


def corpus_source(name):
    with open(os.path.join(CORPUS, name), encoding="utf-8") as fh:
        return fh.read()


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def corpus_labels():
    with open(os.path.join(CORPUS, "labels.json"), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def guarded_source():
    return corpus_source("guarded_rebase_chain.tok")


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{exc_type.__name__}: {exc}"
        ACCEPTANCE[self.number] = (ok, self.title, detail)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
