import numpy as np
import pytest

from hermicone.metric import HermitianMetric, bundle_for_algebra, random_metric
from hermicone.model import algebra_for, catalog, catalog_names, make_model

CATALOG_NAMES = tuple(catalog_names())


@pytest.fixture(params=CATALOG_NAMES)
def model_name(request):
    return request.param


@pytest.fixture
def model(model_name):
    return catalog(model_name)


@pytest.fixture
def algebra(model):
    return algebra_for(model)


def seeded_bundle(name, seed=None):
    """Bundle on a catalog model: identity metric, or a seeded random one."""
    alg = algebra_for(catalog(name))
    if seed is None:
        metric = HermitianMetric.identity(alg.n)
    else:
        metric = random_metric(alg.n, np.random.default_rng(seed))
    return bundle_for_algebra(alg, metric)


def non_unimodular_model():
    """Integrable n = 2 model with d(theta^1) = theta^1 ^ thetabar^1.

    d squared vanishes but d is nonzero on degree 3, so integration by
    parts fails; used to exercise the unimodularity gate.
    """
    return make_model("halfdensity", 2, [(1, "mixed", 1, 1, 1.0)])
