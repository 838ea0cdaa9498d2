import numpy as np
import pytest

from secbeam.channel import build_channels
from secbeam.scenario import Geometry, SystemConfig, db_to_lin, dbm_to_watts


def make_config(n=8, k=2, q=2, p_tol_dbm=10.0, gamma_p_db=8.0, kappa=0.95, seed=1234,
                **overrides):
    cfg = SystemConfig(
        n_antennas=n,
        n_iods=k,
        n_eves=q,
        per_antenna_power=[dbm_to_watts(p_tol_dbm) / n] * n,
        sinr_targets=[db_to_lin(gamma_p_db)] * k,
        secrecy_prob=kappa,
        rng_seed=seed,
    )
    for key, val in overrides.items():
        setattr(cfg, key, val)
    return cfg


def paper_geometry(k=2):
    angles = [-35.0, 15.0, 40.0][:k]
    return Geometry(iod_polar=[(1000.0, a) for a in angles])


@pytest.fixture
def cfg8():
    return make_config(n=8, k=2)


@pytest.fixture
def geom2():
    return paper_geometry(2)


@pytest.fixture
def channels8(cfg8, geom2):
    return build_channels(cfg8, geom2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
