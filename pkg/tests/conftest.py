"""Shared fixtures: the agents and target of the bundled scenarios."""

import numpy as np
import pytest

from netsync import Exosystem, LtiAgent, TargetModel


def make_target():
    return TargetModel(
        C=[[1, 0, 0]],
        A=[[0, 1, 0], [0, 0, 1], [0, -1, 0]],
        B=[[0], [0], [1]],
        n_q=3,
    )


def make_agent(idx, agent_id=None):
    """Agents of the bundled scenarios: 3 and 4 share the same model."""
    agent_id = idx if agent_id is None else agent_id
    if idx == 1:
        return LtiAgent(
            A=[[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0]],
            B=[[0, 1], [0, 0], [1, 0], [0, 1]],
            C=[[1, 0, 0, 0]],
            agent_id=agent_id,
        )
    if idx == 2:
        return LtiAgent(
            A=[[0, 1, 0], [0, 0, 1], [0, 0, 0]],
            B=[[0], [0], [1]],
            C=[[1, 0, 0]],
            agent_id=agent_id,
        )
    if idx in (3, 4):
        return LtiAgent(
            A=[[-1, 0, 0, -1, 0], [0, 0, 1, 1, 0], [0, 1, -1, 1, 0],
               [0, 0, 0, 1, 1], [-1, 1, 0, 1, 1]],
            B=[[0, 0], [0, 0], [0, 1], [0, 0], [1, 0]],
            C=[[0, 0, 0, 1, 0]],
            agent_id=agent_id,
        )
    if idx == 5:
        return LtiAgent(
            A=[[0, 1, 0], [0, 0, 1], [1, 1, 0]],
            B=[[0], [0], [1]],
            C=[[1, 0, 0]],
            agent_id=agent_id,
        )
    raise ValueError(idx)


def make_oscillator(xr0=(1.0, 0.0)):
    return Exosystem(Ar=[[0, 1], [-1, 0]], Cr=[[1, 0]], xr0=xr0)


@pytest.fixture
def target():
    return make_target()


@pytest.fixture
def pool():
    return {i: make_agent(i) for i in (1, 2, 3, 4, 5)}


@pytest.fixture
def oscillator():
    return make_oscillator()


def assert_multiset_close(got, want, tol):
    """Greedy complex multiset comparison within tol."""
    got = list(np.asarray(got, dtype=complex))
    want = list(np.asarray(want, dtype=complex))
    assert len(got) == len(want), f"cardinality {len(got)} != {len(want)}"
    for g in got:
        j = min(range(len(want)), key=lambda k: abs(want[k] - g))
        assert abs(want[j] - g) < tol, f"{g} has no partner within {tol}"
        want.pop(j)
