import dataclasses

import pytest

from rocflow import make_flow


@pytest.fixture
def sign_flipped_weingarten():
    """Linear Weingarten spec with the sign of its K01 cell flipped."""
    good = make_flow("linear_weingarten", a=1, b=2, c=1)

    def jet(p, s):
        j = good.jet(p, s)
        return dataclasses.replace(j, K01=-j.K01)

    return dataclasses.replace(good, jet_fn=jet, value_fn=None)
