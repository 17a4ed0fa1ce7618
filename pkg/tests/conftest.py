import numpy as np
import pytest

from panicreg.glm import Dataset, Family


def make_data(family, n=80, d=4, seed=0, scale=0.5):
    """Random well-posed problem for ``family`` (scale keeps exp() tame)."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    beta = rng.normal(size=d) * scale
    z = x @ beta + 0.2
    kind = family.kind.value
    if kind == "linear":
        y = z + rng.normal(size=n)
    elif kind == "logistic":
        y = (rng.random(n) < 1 / (1 + np.exp(-z))).astype(float)
        y[:2] = [0.0, 1.0]
    elif kind == "poisson":
        y = rng.poisson(np.exp(z)).astype(float)
        y[0] = 1.0
    else:
        y = rng.gamma(family.nu, np.exp(z) / family.nu)
    return Dataset(x, y, family)


FAMILIES = [Family.from_name("linear"), Family.from_name("logistic"),
            Family.from_name("poisson"), Family.from_name("gamma", 2.0)]


@pytest.fixture(params=FAMILIES, ids=lambda f: str(f))
def family(request):
    return request.param
