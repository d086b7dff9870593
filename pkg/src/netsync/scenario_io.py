"""Scenario file parsing.

Scenario files are INI-style documents with sections ``[simulation]``,
``[target]``, ``[gains]``, ``[exosystem]``, ``[rootset]``, ``[graph]`` and
one ``[agent.<i>]`` per agent.  Matrices are written as semicolon-separated
rows (``A = 0 1; -1 0``).  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionError,
    DegenerateSystemError,
    DimensionError,
    NetsyncError,
    ScenarioParseError,
)
from .graphs import RootSet, graph_from_edges, read_edge_list
from .lti import LtiAgent, infinite_zero_order
from .simulation import DEFAULT_DT, DEFAULT_T, Scenario, check_scenario
from .targets import Exosystem, TargetModel

_KNOWN_KEYS = {
    "simulation": {"mode", "t", "dt", "seed"},
    "target": {"a", "b", "c"},
    "gains": {"k_poles", "h_poles"},
    "graph": {"edges", "file", "n"},
    "rootset": {"members"},
    "exosystem": {"ar", "cr", "x0"},
}
_AGENT_KEYS = {"a", "b", "c", "cm", "x0"}


def parse_matrix(text, what="matrix"):
    """Semicolon-separated rows of whitespace-separated floats."""
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            rows.append([float(v) for v in chunk.split()])
        except ValueError as exc:
            raise ScenarioParseError(f"{what}: bad number in row {chunk!r}") from exc
    if not rows:
        raise ScenarioParseError(f"{what}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ScenarioParseError(f"{what}: ragged rows")
    return np.array(rows, dtype=float)


def parse_vector(text, what="vector"):
    return parse_matrix(text, what).reshape(-1)


def _parse_pole_list(text, what):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ScenarioParseError(f"{what}: bad pole list {text!r}") from exc


def _parse_edges_inline(text):
    edges = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) not in (2, 3):
            raise ScenarioParseError(f"graph edges: expected 'src dst [weight]', got {chunk!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
            weight = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ScenarioParseError(f"graph edges: bad entry {chunk!r}") from exc
        edges.append((src, dst, weight))
    return edges


def load_scenario(path):
    """Parse a scenario file into a Scenario (structural validation only).

    Raises ScenarioParseError (with line numbers for syntax problems) for
    malformed files; semantic admissibility is checked separately.
    """
    path = Path(path)
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), strict=True)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioParseError(f"parse error: {exc}") from exc

    agent_sections = {}
    for section in parser.sections():
        low = section.lower()
        if low.startswith("agent."):
            try:
                idx = int(low.split(".", 1)[1])
            except ValueError:
                raise ScenarioParseError(f"[{section}]: agent index must be an integer")
            agent_sections[idx] = section
            unknown = set(parser[section]) - _AGENT_KEYS
            if unknown:
                raise ScenarioParseError(f"[{section}]: unknown keys {sorted(unknown)}")
        elif low in _KNOWN_KEYS:
            unknown = set(parser[section]) - _KNOWN_KEYS[low]
            if unknown:
                raise ScenarioParseError(f"[{section}]: unknown keys {sorted(unknown)}")
        else:
            raise ScenarioParseError(f"unknown section [{section}]")

    if "simulation" not in parser:
        raise ScenarioParseError("missing [simulation] section")
    sim = parser["simulation"]
    mode = sim.get("mode", "output_sync").strip()
    if mode not in ("output_sync", "regulated"):
        raise ScenarioParseError(f"[simulation]: unknown mode {mode!r}")
    try:
        T = float(sim.get("t", DEFAULT_T))
        dt = float(sim.get("dt", DEFAULT_DT))
        seed = int(sim.get("seed", 0))
    except ValueError as exc:
        raise ScenarioParseError(f"[simulation]: {exc}") from exc
    if dt <= 0 or T <= 0:
        raise ScenarioParseError("[simulation]: T and dt must be positive")

    if not agent_sections:
        raise ScenarioParseError("no [agent.<i>] sections")
    ids = sorted(agent_sections)
    if ids != list(range(1, len(ids) + 1)):
        raise ScenarioParseError(f"agent indices must be 1..N consecutive, got {ids}")

    agents = []
    init_states = {}
    for idx in ids:
        section = parser[agent_sections[idx]]
        for key in ("a", "b", "c"):
            if key not in section:
                raise ScenarioParseError(f"[agent.{idx}]: missing {key.upper()}")
        a = parse_matrix(section["a"], f"agent {idx} A")
        b = parse_matrix(section["b"], f"agent {idx} B")
        c = parse_matrix(section["c"], f"agent {idx} C")
        cm_text = section.get("cm", "identity").strip()
        cm = None if cm_text.lower() == "identity" else parse_matrix(cm_text, f"agent {idx} Cm")
        try:
            agents.append(LtiAgent(A=a, B=b, C=c, Cm=cm, agent_id=idx))
        except (DimensionError, NetsyncError) as exc:
            raise ScenarioParseError(f"[agent.{idx}]: {exc}") from exc
        if "x0" in section:
            x0 = parse_vector(section["x0"], f"agent {idx} x0")
            init_states[idx] = x0

    if "graph" not in parser:
        raise ScenarioParseError("missing [graph] section")
    gsec = parser["graph"]
    if "edges" in gsec and "file" in gsec:
        raise ScenarioParseError("[graph]: give either edges or file, not both")
    if "edges" in gsec:
        edges = _parse_edges_inline(gsec["edges"])
        n_seen = max((max(s, d) for s, d, _ in edges), default=0)
    elif "file" in gsec:
        ref = (path.parent / gsec["file"].strip()).resolve()
        try:
            edges, n_seen = read_edge_list(ref.read_text())
        except OSError as exc:
            raise ScenarioParseError(f"[graph]: cannot read {ref}: {exc}") from exc
        except NetsyncError as exc:
            raise ScenarioParseError(f"[graph]: {exc}") from exc
    else:
        raise ScenarioParseError("[graph]: needs edges or file")
    n_nodes = int(gsec.get("n", len(agents)))
    if n_seen > n_nodes:
        raise ScenarioParseError(f"[graph]: edge references node {n_seen} > n={n_nodes}")
    try:
        graph = graph_from_edges(edges, n_nodes)
    except NetsyncError as exc:
        raise ScenarioParseError(f"[graph]: {exc}") from exc

    rootset = None
    if "rootset" in parser:
        members_text = parser["rootset"].get("members", "").replace(",", " ")
        try:
            members = frozenset(int(v) for v in members_text.split())
        except ValueError as exc:
            raise ScenarioParseError(f"[rootset]: {exc}") from exc
        try:
            rootset = RootSet(members)
        except NetsyncError as exc:
            raise ScenarioParseError(f"[rootset]: {exc}") from exc
    elif mode == "regulated":
        raise ScenarioParseError("regulated mode requires a [rootset] section")

    exosystem = None
    if "exosystem" in parser:
        esec = parser["exosystem"]
        for key in ("ar", "cr"):
            if key not in esec:
                raise ScenarioParseError(f"[exosystem]: missing {key.capitalize()}")
        try:
            exosystem = Exosystem(
                Ar=parse_matrix(esec["ar"], "exosystem Ar"),
                Cr=parse_matrix(esec["cr"], "exosystem Cr"),
                xr0=parse_vector(esec["x0"], "exosystem x0") if "x0" in esec else None,
            )
        except DimensionError as exc:
            raise ScenarioParseError(f"[exosystem]: {exc}") from exc
    elif mode == "regulated":
        raise ScenarioParseError("regulated mode requires an [exosystem] section")

    target = None
    if "target" in parser:
        tsec = parser["target"]
        for key in ("a", "b", "c"):
            if key not in tsec:
                raise ScenarioParseError(f"[target]: missing {key.upper()}")
        a = parse_matrix(tsec["a"], "target A")
        b = parse_matrix(tsec["b"], "target B")
        c = parse_matrix(tsec["c"], "target C")
        try:
            n_q = infinite_zero_order((a, b, c))
        except (DegenerateSystemError, DimensionError):
            n_q = a.shape[0]
        try:
            target = TargetModel(C=c, A=a, B=b, n_q=n_q)
        except DimensionError as exc:
            raise ScenarioParseError(f"[target]: {exc}") from exc
    elif mode == "output_sync":
        raise ScenarioParseError("output_sync mode requires a [target] section")

    k_poles, h_poles = None, None
    if "gains" in parser:
        gsec = parser["gains"]
        if "k_poles" in gsec:
            k_poles = _parse_pole_list(gsec["k_poles"], "k_poles")
        if "h_poles" in gsec:
            h_poles = _parse_pole_list(gsec["h_poles"], "h_poles")

    return Scenario(
        agents=tuple(agents), graph=graph, mode=mode, rootset=rootset,
        exosystem=exosystem, target=target, k_poles=k_poles, h_poles=h_poles,
        init_states=init_states or None, T=T, dt=dt, seed=seed,
        label=path.stem,
    )


def parse_scenario(path):
    """Parse and eagerly validate a scenario file.

    Raises ScenarioParseError for malformed files and AssumptionError (with
    the full diagnostics list) when the scenario violates a model or
    graph-class assumption.
    """
    scenario = load_scenario(path)
    diagnostics, _, _, _ = check_scenario(scenario)
    if diagnostics:
        raise AssumptionError("scenario violates assumptions", diagnostics)
    return scenario


def bundled_scenario_path(name):
    """Filesystem path of a scenario shipped with the package."""
    if not name.endswith(".scn"):
        name = name + ".scn"
    ref = resources.files("netsync") / "scenarios" / name
    with resources.as_file(ref) as concrete:
        return Path(concrete)


def resolve_scenario_path(name_or_path):
    """Interpret an argument as a file path, else as a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    candidate = bundled_scenario_path(Path(name_or_path).name)
    if candidate.exists():
        return candidate
    raise ScenarioParseError(f"no such scenario: {name_or_path}")
