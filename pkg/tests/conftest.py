import numpy as np
import pytest

from patchwork.registry import Registry
from patchwork.token_model import SchemeParams, TokenModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def model():
    return TokenModel(Registry())


def scheme(eps=0.0, **kw):
    kw.setdefault("security_param", 20)
    return SchemeParams(completeness_error=eps, **kw)
