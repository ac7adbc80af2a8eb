import pytest

from crcpheno.synth import CorpusSpec, generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(CorpusSpec(n_patients=300, n_sites=12, seed=7))


@pytest.fixture(scope="session")
def noisy_corpus():
    return generate_corpus(CorpusSpec(n_patients=300, n_sites=12, seed=8, noise_rate=0.02, confounders=True))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
