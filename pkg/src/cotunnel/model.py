"""Physical configuration of the three-port dot.

One input lead ``L`` carries two electrons at ``E_L +/- Delta_L``; the output
leads ``R1`` and ``R2`` sit at ``E_L + Delta_R`` and ``E_L - Delta_R``.  The
dot has one spin-degenerate level ``eps_d`` with charging energy ``U``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError
from .fock import (
    Lead,
    Mode,
    ModeRegistry,
    Spin,
    StateVector,
    apply_annihilation,
    apply_creation,
    enumerate_basis,
    product_state,
)

# Momentum slots of the input lead.
SLOT_K = 0  # energy E_L + Delta_L
SLOT_KP = 1  # energy E_L - Delta_L

LEADS = (Lead.L, Lead.R1, Lead.R2)


@dataclass(frozen=True)
class EnergyConfig:
    E_L: float
    Delta_L: float
    Delta_R: float
    U: float
    eps_d: float = 0.0
    V_L: float = 1.0
    V_R1: float = 1.0
    V_R2: float = 1.0
    degeneracy_tol: float = 1e-9

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "EnergyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in sorted(unknown)])
        missing = [k for k in ("E_L", "Delta_L", "Delta_R", "U") if k not in values]
        if missing:
            raise ConfigError([f"missing required key {k!r}" for k in missing])
        return cls(**{k: float(v) for k, v in values.items()})

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def with_(self, **changes) -> "EnergyConfig":
        return replace(self, **changes)

    @property
    def energy_scale(self) -> float:
        return max(abs(self.E_L), abs(self.Delta_R), abs(self.U), 1.0)

    @property
    def coupling_product(self) -> float:
        """``V_L**2 * V_R1 * V_R2``, the coupling factor shared by every ordering."""
        return self.V_L**2 * self.V_R1 * self.V_R2

    def coupling(self, lead: Lead) -> float:
        return {Lead.L: self.V_L, Lead.R1: self.V_R1, Lead.R2: self.V_R2}[Lead(lead)]


def _denominator_factors(c: EnergyConfig) -> dict[str, float]:
    return {
        "E_L+Delta_L": c.E_L + c.Delta_L,
        "E_L-Delta_L": c.E_L - c.Delta_L,
        "E_L+Delta_R": c.E_L + c.Delta_R,
        "E_L-Delta_R": c.E_L - c.Delta_R,
        "2E_L-U": 2 * c.E_L - c.U,
        "Delta_L^2-Delta_R^2": c.Delta_L**2 - c.Delta_R**2,
    }


def validate_config(config: EnergyConfig) -> list[str]:
    """Return every violated constraint; an empty list means the config is valid."""
    c = config
    problems = []
    for f in fields(c):
        v = getattr(c, f.name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            problems.append(f"{f.name} must be a finite real, got {v!r}")
    if problems:
        return problems

    if c.Delta_L < 0:
        problems.append("Delta_L >= 0")
    if c.Delta_R <= 0:
        problems.append("Delta_R > 0")
    if c.U < 0:
        problems.append("U >= 0")
    for name in ("V_L", "V_R1", "V_R2"):
        if getattr(c, name) < 0:
            problems.append(f"{name} >= 0")
    if c.degeneracy_tol <= 0:
        problems.append("degeneracy_tol > 0")
    if not c.Delta_L < c.Delta_R:
        problems.append("Delta_L < Delta_R (single-electron tunneling must be suppressed)")

    tol = c.degeneracy_tol * c.energy_scale
    for name, value in _denominator_factors(c).items():
        if abs(value) < tol:
            problems.append(f"{POLE_PREFIX}{name}")
    return problems


POLE_PREFIX = "pole: "


def is_pole_violation(message: str) -> bool:
    return message.startswith(POLE_PREFIX)


def require_valid(config: EnergyConfig) -> EnergyConfig:
    problems = validate_config(config)
    if problems:
        raise ConfigError(problems)
    return config


def lead_energies(config: EnergyConfig) -> tuple[float, float, float, float]:
    """``(eps_Lk, eps_Lk', eps_R1, eps_R2)``."""
    c = require_valid(config)
    return (c.E_L + c.Delta_L, c.E_L - c.Delta_L, c.E_L + c.Delta_R, c.E_L - c.Delta_R)


def build_registry(config: EnergyConfig) -> ModeRegistry:
    """Ten modes: two L slots, one slot each in R1 and R2, and the dot level, x2 spins."""
    eps_k, eps_kp, eps_r1, eps_r2 = lead_energies(config)
    orbitals = [
        (Lead.L, SLOT_K, eps_k),
        (Lead.L, SLOT_KP, eps_kp),
        (Lead.R1, 0, eps_r1),
        (Lead.R2, 0, eps_r2),
        (Lead.DOT, 0, config.eps_d),
    ]
    return ModeRegistry(Mode(lead, slot, spin, e) for lead, slot, e in orbitals for spin in Spin)


def unperturbed_energy(config: EnergyConfig, registry: ModeRegistry, state: int) -> float:
    """Diagonal of the Hamiltonian: orbital energies plus ``U n_up n_down`` on the dot."""
    e = 0.0
    dot = 0
    for i, mode in enumerate(registry):
        if state >> i & 1:
            e += mode.energy
            if mode.lead is Lead.DOT:
                dot += 1
    if dot == 2:
        e += config.U
    return e


def dot_occupancy(registry: ModeRegistry, state: int) -> int:
    return sum(1 for i, m in enumerate(registry) if m.lead is Lead.DOT and state >> i & 1)


def hopping_terms(config: EnergyConfig, registry: ModeRegistry) -> list[tuple[int, int, float]]:
    """``(create, annihilate, amplitude)`` for every lead<->dot hop (both directions)."""
    terms = []
    for i, mode in enumerate(registry):
        if mode.lead is Lead.DOT:
            continue
        d = registry.index(Lead.DOT, 0, mode.spin)
        v = config.coupling(mode.lead)
        terms.append((i, d, v))  # a^dag_lead c
        terms.append((d, i, v))  # c^dag a_lead
    return terms


def apply_hop(state: int, create: int, annihilate: int, n_modes: int):
    r = apply_annihilation(state, annihilate, n_modes)
    if r is None:
        return None
    r2 = apply_creation(r[0], create, n_modes)
    if r2 is None:
        return None
    return r2[0], r[1] * r2[1]


@dataclass(frozen=True)
class HamiltonianMatrix:
    basis: tuple[int, ...]
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.basis)}


def build_hamiltonian(
    config: EnergyConfig, registry: ModeRegistry, sector: int
) -> HamiltonianMatrix:
    """Dense Hamiltonian restricted to the ``sector``-particle subspace.

    The matrix is real symmetric because all couplings are real.
    """
    require_valid(config)
    n = len(registry)
    basis = enumerate_basis(n, sector)
    index = {s: i for i, s in enumerate(basis)}
    H = np.zeros((len(basis), len(basis)))
    hops = hopping_terms(config, registry)
    for j, s in enumerate(basis):
        H[j, j] = unperturbed_energy(config, registry, s)
        for cr, an, v in hops:
            r = apply_hop(s, cr, an, n)
            if r is not None:
                H[index[r[0]], j] += v * r[1]
    return HamiltonianMatrix(tuple(basis), H)


def build_initial_state(
    config: EnergyConfig, registry: ModeRegistry, spins: "SpinPair"
) -> StateVector:
    """``a^dag_{L,k,sigma} a^dag_{L,k',sigma'} |0>``."""
    c = require_valid(config)
    sigma, sigma_p = spins
    if sigma == sigma_p and c.Delta_L == 0:
        raise ConfigError("same-spin input with Delta_L = 0 puts two electrons in one mode")
    i = registry.index(Lead.L, SLOT_K, sigma)
    j = registry.index(Lead.L, SLOT_KP, sigma_p)
    return product_state([i, j], len(registry))


@dataclass(frozen=True)
class SpinPair:
    sigma: Spin
    sigma_prime: Spin

    def __iter__(self):
        return iter((self.sigma, self.sigma_prime))

    @classmethod
    def parse(cls, text: str) -> "SpinPair":
        table = {"u": Spin.UP, "d": Spin.DOWN}
        if len(text) != 2 or any(ch not in table for ch in text):
            raise ValueError(f"spin pair must be two of 'u'/'d', got {text!r}")
        return cls(table[text[0]], table[text[1]])

    @property
    def same(self) -> bool:
        return self.sigma == self.sigma_prime

    def __str__(self) -> str:
        return self.sigma.symbol + self.sigma_prime.symbol


OPPOSITE = SpinPair(Spin.UP, Spin.DOWN)
SAME = SpinPair(Spin.UP, Spin.UP)


def full_hamiltonian(config: EnergyConfig, registry: ModeRegistry):
    """Sparse Hamiltonian on the whole ``2**n`` Fock space, built from operator products.

    Independent of :func:`build_hamiltonian`; used to check number conservation
    and the sector blocks.
    """
    from .fock import operator_matrix

    require_valid(config)
    n = len(registry)
    cr = [operator_matrix(n, i, True) for i in range(n)]
    an = [operator_matrix(n, i, False) for i in range(n)]
    H = sum(mode.energy * (cr[i] @ an[i]) for i, mode in enumerate(registry))
    up = registry.index(Lead.DOT, 0, Spin.UP)
    dn = registry.index(Lead.DOT, 0, Spin.DOWN)
    H = H + config.U * (cr[up] @ an[up] @ cr[dn] @ an[dn])
    for c, a, v in hopping_terms(config, registry):
        H = H + v * (cr[c] @ an[a])
    return H.tocsr()


def number_operator(n_modes: int):
    """Diagonal sparse ``N`` on the full Fock space."""
    import scipy.sparse as sp

    counts = np.array([bin(s).count("1") for s in range(1 << n_modes)], dtype=float)
    return sp.diags(counts, format="csr")
