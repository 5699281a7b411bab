import json
import time
from pathlib import Path

import numpy as np
import pytest

from nnadp import cli
from nnadp.config import default_config, load_config

OCTAGON_H = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
OCTAGON_h = np.array([5, 5, 5, 5, 7, 7, 7, 7], dtype=float)
OCTAGON_V = {(5, 2), (2, 5), (-2, 5), (-5, 2), (-5, -2), (-2, -5), (2, -5), (5, -2)}

ACCEPTANCE = []


def record_acceptance(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bench():
    return load_config()


@pytest.fixture(scope="session")
def bench_sets(bench):
    from nnadp import backward_reach_sequence

    return backward_reach_sequence(bench.system, bench.X, bench.U, bench.X_N, bench.N)


@pytest.fixture
def octagon():
    from nnadp import HPolytope

    return HPolytope(OCTAGON_H, OCTAGON_h)


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """Full benchmark workflow through the CLI, shared by every test that needs trained models."""
    out = tmp_path_factory.mktemp("bench_run")
    t0 = time.perf_counter()
    codes = {}
    for cmd in ("sets", "train-value", "train-policy"):
        codes[cmd] = cli.main([cmd, "--out", str(out), "--jobs", "1"])
    codes["compare"] = cli.main(["compare", "--out", str(out), "--jobs", "1"])
    elapsed = time.perf_counter() - t0
    first = {p.name: p.read_bytes() for p in sorted((out / "compare").glob("*.csv"))}
    codes["compare_again"] = cli.main(["compare", "--out", str(out), "--jobs", "1", "--svg"])
    second = {p.name: p.read_bytes() for p in sorted((out / "compare").glob("*.csv"))}
    return {"out": out, "codes": codes, "first": first, "second": second, "elapsed": elapsed}


def write_config(path, **overrides):
    """Benchmark config with top-level keys replaced; returns the path."""
    cfg = default_config()
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    Path(path).write_text(json.dumps(cfg, indent=1))
    return str(path)
