import math

import numpy as np
import pytest
from hypothesis import settings

from wmopt.states import SIGMA_Z, SPIN_KETS, MeasurementSetup, fock_state, ket_to_dm, oscillator_operators

settings.register_profile("wmopt", deadline=None, max_examples=60)
settings.load_profile("wmopt")

# lines recorded by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def spin_setup(pre="+x", post="+z", lam_sigma_q=0.01, dim=32, post_ket=None):
    q, p = oscillator_operators(dim)
    sigma_q = 1 / math.sqrt(2)
    E = ket_to_dm(post_ket) if post_ket is not None else ket_to_dm(SPIN_KETS[post])
    return MeasurementSetup(ket_to_dm(SPIN_KETS[pre]), E, SIGMA_Z, fock_state(dim, 0), q, p, lam_sigma_q / sigma_q)


def near_orthogonal_ket(overlap_amplitude=0.01):
    chi = math.pi / 4 - math.asin(overlap_amplitude)
    return np.array([math.cos(chi), -math.sin(chi)], dtype=complex)


@pytest.fixture
def canonical_setup():
    return spin_setup()
