"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line.  Run with ``pytest tests/test_acceptance.py -v -s``."""

import dataclasses
import time

import numpy as np
import pytest
import scipy.linalg

import netsync as ns

from conftest import make_agent, make_oscillator, make_target


def report(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number:2d} {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def fuzz_agents(rng, n):
    ids = rng.integers(1, 6, size=n)
    return tuple(make_agent(int(k), agent_id=pos + 1) for pos, k in enumerate(ids))


def test_01_gain_reproduction():
    k, h = ns.design_gains(make_target())
    k_exact = np.max(np.abs(k - np.round(k))) < 1e-9
    h_exact = np.max(np.abs(h - np.round(h))) < 1e-9
    ok = (k_exact and h_exact
          and np.array_equal(np.round(k), [[30.0, 30.0, 10.0]])
          and np.array_equal(np.round(h), [[6.0], [10.0], [0.0]]))
    report(1, "gain reproduction", ok, f"K={np.round(k).ravel()}, H={np.round(h).ravel()}")


def test_02_reduced_laplacian_spectrum():
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(200):
        n = int(rng.integers(2, 13))
        g = ns.random_admissible_graph(n, "spanning_tree", seed=trial,
                                       weight_range=(0.01, 2.0))
        lap = ns.laplacian(g)
        eig = list(ns.spectrum(lap))
        zero_at = min(range(len(eig)), key=lambda i: abs(eig[i]))
        assert abs(eig[zero_at]) < 1e-8
        eig.pop(zero_at)
        red = list(ns.spectrum(ns.reduced_laplacian(lap)))
        for lam in red:
            j = min(range(len(eig)), key=lambda i: abs(eig[i] - lam))
            worst = max(worst, abs(eig[j] - lam))
            eig.pop(j)
    report(2, "reduced-Laplacian spectrum (200 graphs)", worst < 1e-8,
           f"worst mismatch {worst:.2e}")


def test_03_expanded_laplacian_positivity():
    rng = np.random.default_rng(202)
    worst = np.inf
    for trial in range(200):
        n = int(rng.integers(2, 13))
        size = int(rng.integers(1, n + 1))
        roots = ns.RootSet(set(rng.choice(np.arange(1, n + 1), size=size,
                                          replace=False).tolist()))
        g = ns.random_admissible_graph(n, "rootset", seed=trial, roots=roots,
                                       weight_range=(0.01, 2.0))
        worst = min(worst, float(np.min(ns.spectrum(ns.expanded_laplacian(g, roots)).real)))
    report(3, "expanded-Laplacian positivity (200 graphs)", worst > 0.0,
           f"min Re {worst:.3e}")


def test_04_homogenization_exactness():
    target = make_target()
    pre2, cert2 = ns.design_precompensator(make_agent(2), target)
    pre5, cert5 = ns.design_precompensator(make_agent(5), target)
    static_ok = (
        pre2.xi_dim == 0 and pre5.xi_dim == 0
        and np.allclose(pre2.Fh, [[0.0, -1.0, 0.0]], atol=1e-12)
        and np.allclose(pre5.Fh, [[-1.0, -2.0, 0.0]], atol=1e-12)
        and np.array_equal(pre2.Dh, [[1.0]]) and np.array_equal(pre5.Dh, [[1.0]])
        and np.all(cert2.Cs == 0.0) and np.all(cert5.Cs == 0.0))
    worst = 0.0
    for idx in (1, 2, 3, 4, 5):
        agent = make_agent(idx)
        pre, _ = ns.design_precompensator(agent, target)
        cert = ns.verify_homogenization(agent, pre, target)
        worst = max(worst, cert.markov_error)
    report(4, "homogenization exactness", static_ok and worst < 1e-6,
           f"worst markov error {worst:.2e}")


@pytest.mark.parametrize("case", ["case1", "case2", "case3"])
def test_05_case_reproduction(case):
    s = dataclasses.replace(ns.load_scenario(ns.bundled_scenario_path(case)), T=40.0)
    start = time.perf_counter()
    traj = ns.run_scenario(s)
    elapsed = time.perf_counter() - start
    e = ns.output_sync_error(traj)
    at20 = e[int(round(20.0 / s.dt))]
    at40 = e[-1]
    ok = at20 < 1e-2 and at40 < 1e-3
    report(5, f"{case} reproduction", ok,
           f"e_sync(20)={at20:.2e}, e_sync(40)={at40:.2e}, {elapsed:.1f}s")


def test_06_output_sync_fuzz():
    target = make_target()
    worst = 0.0
    start = time.perf_counter()
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 11))
        agents = fuzz_agents(rng, n)
        g = ns.random_admissible_graph(n, "spanning_tree", seed=seed)
        s = ns.Scenario(agents=agents, graph=g, target=target, T=40.0, seed=seed)
        worst = max(worst, float(ns.output_sync_error(ns.run_scenario(s))[-1]))
    elapsed = time.perf_counter() - start
    report(6, "output-sync fuzz (50 scenarios)", worst < 1e-3,
           f"worst e_sync(40)={worst:.2e}, {elapsed:.0f}s")


def test_07_regulated_fuzz():
    worst = 0.0
    forests = 0
    start = time.perf_counter()
    for seed in range(50):
        rng = np.random.default_rng(2000 + seed)
        force_forest = seed < 5
        n = int(rng.integers(3, 11)) if force_forest else int(rng.integers(2, 11))
        agents = fuzz_agents(rng, n)
        if force_forest:
            # multi-root forest: admissible without any spanning tree
            roots = ns.RootSet({1, 2})
            g = ns.random_admissible_graph(n, "rootset", seed=seed, roots=roots,
                                           extra_edge_density=0.0)
            assert not ns.contains_spanning_tree(g)
            forests += 1
        else:
            size = int(rng.integers(1, n + 1))
            roots = ns.RootSet(set(rng.choice(np.arange(1, n + 1), size=size,
                                              replace=False).tolist()))
            g = ns.random_admissible_graph(n, "rootset", seed=seed, roots=roots,
                                           acyclic_extras=True)
        exo = make_oscillator(xr0=tuple(rng.uniform(-1.0, 1.0, size=2)))
        s = ns.Scenario(agents=agents, graph=g, mode="regulated", rootset=roots,
                        exosystem=exo, T=40.0, seed=seed)
        worst = max(worst, float(ns.regulation_error(ns.run_scenario(s))[-1]))
    elapsed = time.perf_counter() - start
    report(7, "regulated fuzz (50 scenarios)", worst < 1e-3 and forests >= 5,
           f"worst e_reg(40)={worst:.2e}, {forests} spanning-tree-free, {elapsed:.0f}s")


def test_08_scale_free_bit_identity():
    target = make_target()
    sizes = (3, 4, 5, 25)
    ok = True
    for idx in (1, 2, 3, 4, 5):
        bundles = []
        for n in sizes:
            agents = (make_agent(idx, agent_id=1),) + tuple(
                make_agent(2, agent_id=k) for k in range(2, n + 1))
            g = ns.random_admissible_graph(n, "spanning_tree", seed=7 * n + idx)
            s = ns.Scenario(agents=agents, graph=g, target=target, T=1.0)
            net = ns.assemble_network(s)
            bundles.append(ns.realization_to_text(net.protocols[0]).encode())
        ok = ok and all(b == bundles[0] for b in bundles)
    report(8, "scale-free bit-identity", ok,
           f"agents 1-5 across N={sizes} and distinct graphs")


def test_09_integrator_fidelity():
    s = ns.load_scenario(ns.bundled_scenario_path("case1"))
    net = ns.assemble_network(s)
    rk = ns.simulate(net, s)
    exact = ns.simulate_expm(net, s)
    scale = max(1.0, float(np.max(np.abs(exact.states))))
    err = float(np.max(np.abs(rk.states - exact.states))) / scale
    report(9, "integrator fidelity", err < 1e-6, f"relative deviation {err:.2e}")


def test_10_exosystem_remodel():
    target = make_target()
    agents = [make_agent(i) for i in (1, 2, 3, 4, 5)]
    exo = make_oscillator()
    got = ns.remodel_exosystem(exo, agents)
    exact = (np.array_equal(got.A, target.A) and np.array_equal(got.B, target.B)
             and np.array_equal(got.C, target.C) and got.n_q == 3)
    # both generators share one autonomous joint system: exact-step all 100
    # matched initial conditions as a batch over [0, 20]
    rng = np.random.default_rng(404)
    joint = np.zeros((5, 5))
    joint[:2, :2] = exo.Ar
    joint[2:, 2:] = got.A
    starts = np.empty((100, 5))
    for row in range(100):
        xr0 = rng.uniform(-2.0, 2.0, size=2)
        starts[row, :2] = xr0
        starts[row, 2:] = ns.match_initial_condition(exo, got, xr0)
    diff_row = np.zeros(5)
    diff_row[0], diff_row[2] = 1.0, -1.0  # y_r of each generator
    phi_t = scipy.linalg.expm(joint * 1e-3).T
    states = starts.copy()
    worst = float(np.max(np.abs(states @ diff_row)))
    for _ in range(20000):
        states = states @ phi_t
        worst = max(worst, float(np.max(np.abs(states @ diff_row))))
    report(10, "exosystem remodeling", exact and worst < 1e-6,
           f"matrices exact={exact}, worst output gap over 100 draws {worst:.2e}")
