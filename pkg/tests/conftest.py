from fractions import Fraction as Fr

import pytest

from admissible_flow.admissible import AdmissibleData, build_invariants, koiso_data
from admissible_flow.gqe import build_profile, solve_k0

DATASETS = {
    "round": AdmissibleData(),
    "koiso_1_2": koiso_data(Fr(1, 2)),
    "koiso_1_10": koiso_data(Fr(1, 10)),
    "fiber_0_1": AdmissibleData((), 0, 1),
    "fiber_0_2": AdmissibleData((), 0, 2),
    "fiber_1_2": AdmissibleData((), 1, 2),
    "mixed": AdmissibleData(((1, 2, Fr(1, 2)), (2, Fr(-3, 2), Fr(-1, 3))), 1, 1),
}

# P has three roots in (-1, 1)
THREE_ROOTS = AdmissibleData(((2, -18, Fr(1, 2)), (3, 10, Fr(-4, 5))), 0, 1)

_PROFILES = {}


def profile_for(name):
    """Invariants and GQE profile of a named data set, built once per session."""
    if name not in _PROFILES:
        data = DATASETS[name]
        inv = build_invariants(data)
        _PROFILES[name] = (data, inv, build_profile(inv, solve_k0(inv), data))
    return _PROFILES[name]


@pytest.fixture(params=sorted(DATASETS))
def any_profile(request):
    return profile_for(request.param)
