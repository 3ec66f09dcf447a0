import json
import math

import numpy as np
import pytest

from halfspace_decay.fibers import BlochFiber, gelfand_inverse, theta_grid
from halfspace_decay.fields import save_field
from halfspace_decay.lattice import Lattice

TWO_PI = 2.0 * math.pi

ACCEPTANCE_VERDICTS = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.line(line)


def manufactured_line_input(tmp_path, theta_points=3, n=8, nt=1025, t_end=5.0, energy=0.0, mode=1):
    """Band-limited field whose fibers are single decaying torus modes.

    Built by inverse transform of manufactured fibers, so the forward
    transform recovers exactly one mode per quasimomentum with decay rate
    sqrt(|k+theta|^2 - E).  Returns (lattice_path, field_path, lattice).
    """
    lat = Lattice(basis=np.array([[TWO_PI]]), dual_gram_exact=[["1"]])
    t = np.linspace(0.0, t_end, nt)
    fibers = []
    for theta in theta_grid(lat, theta_points):
        mu = (mode + theta.coeffs[0]) ** 2 - energy
        kappa = math.sqrt(mu)
        x_mode = np.exp(2j * math.pi * mode * np.arange(n) / n)
        data = x_mode[:, None] * np.exp(-kappa * t)[None, :]
        fibers.append(
            BlochFiber(
                theta=theta, lattice=lat, points_per_cell=n,
                t_start=0.0, t_end=t_end, data=data,
            )
        )
    u = gelfand_inverse(fibers, lat)
    lat_path = tmp_path / "lattice.json"
    lat_path.write_text(json.dumps(lat.to_json()))
    u_path = tmp_path / "u.csv"
    save_field(u, u_path)
    return lat_path, u_path, lat


@pytest.fixture
def line_pipeline_input(tmp_path):
    return manufactured_line_input(tmp_path)
