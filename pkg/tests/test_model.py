import itertools

import numpy as np
import pytest

from cotunnel.errors import ConfigError
from cotunnel.fock import Lead, Spin, enumerate_basis
from cotunnel.model import (
    OPPOSITE,
    SAME,
    EnergyConfig,
    SpinPair,
    build_hamiltonian,
    build_initial_state,
    build_registry,
    dot_occupancy,
    full_hamiltonian,
    lead_energies,
    number_operator,
    validate_config,
)

from conftest import sample


def test_lead_energies(example):
    assert lead_energies(example) == (-2.5, -3.5, -2.0, -4.0)
    assert lead_energies(example.with_(Delta_L=0.0)) == (-3.0, -3.0, -2.0, -4.0)


@pytest.mark.parametrize("cfg", sample(50, seed=3))
def test_lead_energies_conserve_and_round_trip(cfg):
    k, kp, r1, r2 = lead_energies(cfg)
    assert k + kp == pytest.approx(r1 + r2, abs=1e-14)
    assert (k + kp) / 2 == pytest.approx(cfg.E_L, abs=1e-14)
    assert (k - kp) / 2 == pytest.approx(cfg.Delta_L, abs=1e-14)
    assert (r1 - r2) / 2 == pytest.approx(cfg.Delta_R, abs=1e-14)


def test_example_is_valid(example):
    assert validate_config(example) == []


@pytest.mark.parametrize(
    "changes, fragment",
    [
        ({"Delta_L": 1.0}, "Delta_L < Delta_R"),
        ({"E_L": 1.0, "U": 2.0, "Delta_R": 0.8, "Delta_L": 0.3}, "2E_L-U"),
        ({"Delta_R": 3.0}, "E_L+Delta_R"),
        ({"U": -1.0}, "U >= 0"),
        ({"V_L": -0.1}, "V_L >= 0"),
        ({"E_L": float("inf")}, "finite"),
    ],
)
def test_validation_names_the_rule(example, changes, fragment):
    problems = validate_config(example.with_(**changes))
    assert any(fragment in p for p in problems), problems


def test_from_mapping_schema():
    with pytest.raises(ConfigError, match="'U'"):
        EnergyConfig.from_mapping({"E_L": -3, "Delta_L": 0.5, "Delta_R": 1})
    with pytest.raises(ConfigError, match="bogus"):
        EnergyConfig.from_mapping({"E_L": -3, "Delta_L": 0.5, "Delta_R": 1, "U": 2, "bogus": 1})


def test_registry(example):
    reg = build_registry(example)
    assert len(reg) == 10
    assert reg == build_registry(example)
    k, kp, r1, r2 = lead_energies(example)
    expected = {(Lead.L, 0): k, (Lead.L, 1): kp, (Lead.R1, 0): r1, (Lead.R2, 0): r2, (Lead.DOT, 0): 0.0}
    for m in reg:
        assert m.energy == expected[(m.lead, m.slot)]


def test_trivial_sectors(example):
    reg = build_registry(example.with_(V_L=0.0, V_R1=0.0, V_R2=0.0))
    cfg = example.with_(V_L=0.0, V_R1=0.0, V_R2=0.0)
    assert build_hamiltonian(cfg, reg, 0).matrix.tolist() == [[0.0]]
    H1 = build_hamiltonian(cfg, reg, 1).matrix
    assert np.array_equal(H1, np.diag(reg.energies()))


def test_decoupled_two_particle_spectrum(example):
    cfg = example.with_(V_L=0.0, V_R1=0.0, V_R2=0.0)
    reg = build_registry(cfg)
    H = build_hamiltonian(cfg, reg, 2)
    e = reg.energies()
    want = sorted(e[a] + e[b] for a, b in itertools.combinations(range(10), 2))
    dd = reg.index(Lead.DOT, 0, Spin.UP), reg.index(Lead.DOT, 0, Spin.DOWN)
    idx = H.index()[(1 << dd[0]) | (1 << dd[1])]
    assert H.matrix[idx, idx] == 2 * cfg.eps_d + cfg.U == 2.0
    want[want.index(0.0)] += cfg.U
    assert np.allclose(np.sort(np.linalg.eigvalsh(H.matrix)), sorted(want), atol=1e-14)


@pytest.mark.parametrize("cfg", sample(5, seed=11) + [EnergyConfig(-3, 0.5, 1, 2, eps_d=0.3, V_L=0.2)])
def test_hermitian_and_number_conserving(cfg):
    reg = build_registry(cfg)
    H = full_hamiltonian(cfg, reg)
    N = number_operator(len(reg))
    assert abs(H - H.T).max() == 0
    assert abs(H @ N - N @ H).max() == 0
    for n in range(len(reg) + 1):
        sector = build_hamiltonian(cfg, reg, n)
        assert np.array_equal(sector.matrix, sector.matrix.T)
        idx = list(sector.basis)
        assert np.allclose(H[idx][:, idx].toarray(), sector.matrix, atol=1e-14)


def test_dot_occupancy(example):
    reg = build_registry(example)
    assert all(dot_occupancy(reg, s) <= 2 for s in enumerate_basis(10, 2))


def test_initial_state(example):
    reg = build_registry(example)
    for spins in (OPPOSITE, SAME):
        ((state, amp),) = build_initial_state(example, reg, spins).items()
        assert abs(amp) == 1 and state.bit_count() == 2
    with pytest.raises(ConfigError, match="Delta_L = 0"):
        build_initial_state(example.with_(Delta_L=0.0), reg, SAME)


def test_spin_pair_parse():
    assert SpinPair.parse("ud") == OPPOSITE
    assert str(SpinPair.parse("dd")) == "dd"
    assert SpinPair.parse("uu").same
    with pytest.raises(ValueError):
        SpinPair.parse("ux")
