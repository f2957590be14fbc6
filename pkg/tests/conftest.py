import numpy as np
import pytest

from wavedecay.model import ModelParams
from wavedecay.solver import Grid, InitialDataSpec, make_initial_data, evolve


def gaussian_run(dr, r_max, t_final, p=3.0, gamma0=1.5, record_every=4, node_stride=2,
                 nonlinearity=True, amplitude=1.0, family="gaussian", tail_exponent=3.0,
                 cfl=0.4):
    params = ModelParams(d=3, p=p, gamma0=gamma0, epsilon=0.1)
    spec = InitialDataSpec(family=family, amplitude=amplitude, width=1.0,
                           tail_exponent=tail_exponent)
    grid = Grid(dr, r_max)
    state, energies = make_initial_data(spec, grid, params)
    dt = cfl * dr
    n = round(t_final / dt)
    final, record = evolve(state, params, dt, n, record_every=record_every,
                           node_stride=node_stride, nonlinearity_on=nonlinearity)
    return {"params": params, "spec": spec, "state": state, "energies": energies,
            "final": final, "record": record}


@pytest.fixture(scope="session")
def small_run():
    """Reference-physics run on a small domain: d=3, p=3, Gaussian, T=16."""
    return gaussian_run(0.05, 30.0, 16.0, record_every=1, node_stride=1)


@pytest.fixture(scope="session")
def small_run_levels():
    """Same small run at three resolutions for refinement studies."""
    return {dr: gaussian_run(dr, 30.0, 16.0, record_every=1, node_stride=1)
            for dr in (0.1, 0.05, 0.025)}


@pytest.fixture(scope="session")
def linear_run():
    """Linear control run (nonlinearity off) on the small domain."""
    return gaussian_run(0.05, 40.0, 20.0, record_every=2, node_stride=1, nonlinearity=False)
