import numpy as np
import pytest

from hypnets.hypnet import solve_rho_cauchy
from hypnets.sampling import random_layered_net, random_positive_rho_seeds, random_surface


@pytest.fixture(scope="session")
def surface_6x5():
    return random_surface(42, (6, 5))


@pytest.fixture(scope="session")
def layered_6x5x2():
    return random_layered_net(3, (6, 5, 2))


@pytest.fixture(scope="session")
def hyp_6x5(surface_6x5):
    r1, r2, corner = random_positive_rho_seeds(42, (6, 5))
    return solve_rho_cauchy(surface_6x5, r1, r2, corner)


def hyp_for(net, seed):
    shape = net.window.shape[:2]
    r1, r2, corner = random_positive_rho_seeds(seed, shape)
    return solve_rho_cauchy(net, r1, r2, corner)
