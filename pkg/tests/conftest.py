from __future__ import annotations

import pytest

from dc2.synthetic import write_suite


@pytest.fixture(scope="session")
def hr_suite(tmp_path_factory):
    """30 synthetic 2688x2688 canvases plus their mock scenes."""
    root = tmp_path_factory.mktemp("hr_suite")
    dataset = write_suite(root, n=30, size=2688, seed=0)
    return dataset, root / "scenes.json"


@pytest.fixture()
def verdict(capsys):
    """Print one PASS/FAIL line per acceptance criterion, then assert it."""

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit
