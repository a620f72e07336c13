import os
import sys

import pytest

# oracle helpers live next to the tests, outside the installed package
sys.path.insert(0, os.path.dirname(__file__))

from polsqueeze.steady import build_model  # noqa: E402


@pytest.fixture(scope="session")
def cavity():
    # reduced grids: a few seconds to build, shared by every module that
    # needs the real layered-screening cavity
    return build_model(
        n_exciton=384, n_pair=48,
        table_sizes=dict(n_phi=2048, n_u=2048, n_rho=1024, n_vq=1024,
                         n_u2=(256, 40, 13), u2_quad=(24, 28)),
        kernel_angles=dict(n_theta=16, n_k=16, n_theta_k=32))
