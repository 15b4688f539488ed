import sys

import numpy as np
import pytest

from gridmc import datamatrix as dm
from gridmc import gridmodel as gm
from gridmc import linflow as lf


@pytest.fixture(scope="session")
def small_feeder():
    """9-bus single-phase radial feeder with a 3-area chain partition."""
    net, scen = gm.generate_radial_feeder(9, branching=0.5, seed=2, n_steps=2)
    part = gm.AreaPartition.contiguous(net.n_phases, 3)
    return net, scen, part


@pytest.fixture(scope="session")
def small_instance(small_feeder):
    """Ground truth, measurement matrix, and area maps for the small feeder."""
    net, scen, part = small_feeder
    v = gm.solve_exact_flow(net, scen.s)
    mat = dm.build_matrix(v, scen.s)
    model = lf.build_linear_model(net, n_steps=scen.n_steps)
    trunc = lf.truncate_model(model, part)
    maps = lf.build_area_maps(trunc)
    return {
        "net": net, "scen": scen, "part": part, "v": v, "mat": mat,
        "model": model, "trunc": trunc, "maps": maps,
    }


@pytest.fixture(scope="session")
def analog33():
    net, scen, part = gm.feeder33_analog(seed=0, n_steps=2, n_areas=4)
    return net, scen, part


def rand_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdict lines after the run summary."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance"
    )
    if mod is None or not getattr(mod, "VERDICT_LINES", None):
        return
    terminalreporter.section("acceptance verdicts")
    for line in mod.VERDICT_LINES:
        terminalreporter.write_line(line)
