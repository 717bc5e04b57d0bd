"""Shared fixtures: the expensive end-to-end artifacts are built once."""

from __future__ import annotations

import pytest

from platelift.scenario import plan_scenario, resolve_scenario


@pytest.fixture(scope="session")
def ab1_outcome():
    """The bundled ab1 scenario planned to No-Contact, reused across suites."""
    return plan_scenario(resolve_scenario("ab1"))


@pytest.fixture(scope="session")
def ab1_plan_dir(tmp_path_factory):
    """CLI `plan` artifacts for ab1 (plan/stats JSON), produced once."""
    from platelift.cli import main

    out = tmp_path_factory.mktemp("ab1_cli")
    rc = main(["plan", "--scenario", "ab1", "--out", str(out)])
    assert rc == 0
    return out
