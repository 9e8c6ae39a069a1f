import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnet.harmonic import (
    HarmonicParams,
    all_to_all_period,
    amplitude_trajectory,
    correlation_trajectory,
    eta_all_to_all_closed_form,
    f_of_k,
    imbalance,
    imbalance_from_correlation,
    initial_correlation,
    propagate_correlation_matrix,
)
from qnet.network import FiniteRange, NetworkSpec, single_particle_hamiltonian


@given(N=st.integers(3, 60), D=st.integers(1, 29), k=st.integers(1, 59))
def test_f_of_k_matches_direct_sum(N, D, k):
    if k >= N:
        k = 1 + k % (N - 1)
    direct = sum(math.cos(2 * math.pi * k * d / N) for d in range(1, D + 1))
    assert f_of_k(N, D, k) == pytest.approx(direct, abs=1e-11)


def test_f_of_k_rejects_zero_mode():
    with pytest.raises(ValueError):
        f_of_k(5, 1, 0)


@given(N=st.integers(2, 50), t=st.floats(0, 100))
def test_all_to_all_periodic_and_bounded(N, t):
    p = HarmonicParams(N, Np=10)
    T = all_to_all_period(N)
    assert imbalance(p, t)[0] == pytest.approx(imbalance(p, t + T)[0], abs=1e-8)
    assert -10 - 1e-9 <= imbalance(p, t)[0] <= 10 + 1e-9


@given(N=st.integers(2, 20), D=st.integers(1, 9))
@settings(max_examples=40)
def test_initial_imbalance_is_Np(N, D):
    assert imbalance(HarmonicParams(N, D, Np=7), 0.0)[0] == pytest.approx(7, abs=1e-10)


def test_minimum_gives_closed_form_eta():
    for N in (2, 5, 17, 50):
        p = HarmonicParams(N, Np=10)
        P_min = imbalance(p, np.pi / N)[0]
        assert (10 + P_min) / 20 == pytest.approx(eta_all_to_all_closed_form(N), abs=1e-12)


def test_large_D_is_all_to_all():
    assert HarmonicParams(10, D=5).is_all_to_all
    assert not HarmonicParams(10, D=4).is_all_to_all


@pytest.mark.parametrize("N,D", [(7, 1), (7, 2), (10, 3), (13, 5)])
def test_finite_range_matches_correlation_matrix(N, D):
    t = np.linspace(0, 15, 300)
    h = single_particle_hamiltonian(NetworkSpec(N, connectivity=FiniteRange(D)), 1.0)
    C = propagate_correlation_matrix(h, initial_correlation(N, 4), t)
    assert np.max(np.abs(imbalance(HarmonicParams(N, D, Np=4), t) - imbalance_from_correlation(C))) < 1e-10


def test_amplitude_path_matches_correlation_path():
    spec = NetworkSpec(9, connectivity=FiniteRange(2))
    h = single_particle_hamiltonian(spec, 1.0)
    t = np.linspace(0, 10, 101)
    a = amplitude_trajectory(h, 5, t)
    b = correlation_trajectory(h, 5, t)
    assert np.max(np.abs(a.n - b.n)) < 1e-11


def test_correlation_scalar_and_hermiticity_check():
    h = single_particle_hamiltonian(NetworkSpec(3), 1.0)
    C = propagate_correlation_matrix(h, initial_correlation(3, 2), 0.3)
    assert C.shape == (3, 3)
    with pytest.raises(ValueError):
        propagate_correlation_matrix(np.array([[0, 1], [0, 0]]), np.eye(2), 0.1)


def test_number_conserved():
    h = single_particle_hamiltonian(NetworkSpec(6, connectivity=FiniteRange(1)), 1.0)
    tr = amplitude_trajectory(h, 8, np.linspace(0, 20, 201))
    assert np.allclose(tr.total, 8, atol=1e-10)
