import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from schedlab.model import scenario_from_jobs  # noqa: E402


def single(jobs, eta=1.0, t_max=None):
    """One-type scenario on one server; jobs are (arrival, deadline, proc, value)."""
    return scenario_from_jobs([(a, d, p, v, 0, (1.0,)) for a, d, p, v in jobs], [(eta,)], t_max=t_max)


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SCHEDLAB_OUTPUT", str(tmp_path / "out"))


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """``verdict(n, ok, detail)`` records criterion ``n`` and fails the test if not ok."""

    def record(n, ok, detail):
        _VERDICTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_VERDICTS[n])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in range(1, 11):
            terminalreporter.write_line(_VERDICTS.get(n, f"criterion {n:>2}: NO VERDICT  (errored or deselected)"))


@pytest.fixture(scope="session")
def default_model(tmp_path_factory):
    """Comparator trained by the default pipeline (300 desk-scale scenarios, seeds 0-299)."""
    from schedlab.experiments import PipelineConfig, train_pipeline

    return train_pipeline(PipelineConfig(out_dir=str(tmp_path_factory.mktemp("default-model"))))
