import json

import pytest

from infobounds import golden
from infobounds.problems import problem_document

GOLDEN = golden.golden_suite()


@pytest.fixture(scope="session")
def golden_models():
    """name -> (spec, model) for the whole golden suite, built once."""
    return {name: (spec, spec.build()) for name, spec in GOLDEN.items()}


@pytest.fixture(scope="session")
def copy_spec():
    return golden.copy_channel()


@pytest.fixture(scope="session")
def copy_model(copy_spec):
    return copy_spec.build()


@pytest.fixture(scope="session")
def indep_spec():
    return golden.independent(n=1)


@pytest.fixture(scope="session")
def indep_model(indep_spec):
    return indep_spec.build()


@pytest.fixture(scope="session")
def gibbs_spec():
    return golden.gibbs_golden()


@pytest.fixture(scope="session")
def gibbs_model(gibbs_spec):
    return gibbs_spec.build()


@pytest.fixture
def write_problem(tmp_path):
    """Write a spec (or a raw document) to a JSON file and return its path."""

    def _write(spec_or_doc, name="problem.json"):
        doc = spec_or_doc if isinstance(spec_or_doc, dict) else problem_document(spec_or_doc)
        path = tmp_path / name
        path.write_text(json.dumps(doc, indent=2))
        return str(path)

    return _write


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, ok, summary):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {summary}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
