"""Fermionic Fock space on a small, fixed list of modes.

Basis states are plain ``int`` bitstrings: bit ``i`` is the occupation of
mode ``i`` of a :class:`ModeRegistry`.  Operators act with Jordan-Wigner
signs, i.e. ``(-1)`` to the number of occupied modes with a lower index.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

MAX_MODES = 63


class Lead(enum.IntEnum):
    L = 0
    R1 = 1
    R2 = 2
    DOT = 3


class Spin(enum.IntEnum):
    UP = 0
    DOWN = 1

    @property
    def symbol(self) -> str:
        return "u" if self is Spin.UP else "d"


@dataclass(frozen=True, order=True)
class Mode:
    """A single-particle orbital: lead, momentum slot, spin and energy."""

    lead: Lead
    slot: int
    spin: Spin
    energy: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.energy):
            raise ValueError(f"mode energy must be finite, got {self.energy}")

    @property
    def key(self) -> tuple[Lead, int, Spin]:
        return (self.lead, self.slot, self.spin)


class ModeRegistry:
    """Immutable, canonically ordered list of modes.

    Modes are sorted by ``(lead, slot, spin)`` with ``L < R1 < R2 < DOT`` and
    ``up < down``.  All fermionic signs in the package refer to this order.
    """

    __slots__ = ("_modes", "_index")

    def __init__(self, modes: Iterable[Mode]):
        ordered = tuple(sorted(modes, key=lambda m: m.key))
        if len(ordered) > MAX_MODES:
            raise ValueError(f"at most {MAX_MODES} modes supported, got {len(ordered)}")
        index = {}
        for i, m in enumerate(ordered):
            if m.key in index:
                raise ValueError(f"duplicate mode {m.key}")
            index[m.key] = i
        self._modes = ordered
        self._index = index

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self._modes

    def __len__(self) -> int:
        return len(self._modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self._modes)

    def __getitem__(self, i: int) -> Mode:
        return self._modes[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, ModeRegistry) and self._modes == other._modes

    def __hash__(self) -> int:
        return hash(self._modes)

    def __repr__(self) -> str:
        return f"ModeRegistry({len(self)} modes)"

    def index(self, lead: Lead, slot: int, spin: Spin) -> int:
        return self._index[(Lead(lead), slot, Spin(spin))]

    def energies(self) -> np.ndarray:
        return np.array([m.energy for m in self._modes])


def _check_index(mode_index: int, n_modes: int) -> None:
    if not 0 <= mode_index < n_modes:
        raise IndexError(f"mode index {mode_index} out of range for {n_modes} modes")


def popcount(state: int) -> int:
    return int(state).bit_count()


def occupied(state: int) -> list[int]:
    """Indices of occupied modes, ascending."""
    out = []
    i = 0
    while state:
        if state & 1:
            out.append(i)
        state >>= 1
        i += 1
    return out


def _sign_below(state: int, mode_index: int) -> int:
    return -1 if popcount(state & ((1 << mode_index) - 1)) & 1 else 1


def apply_creation(state: int, mode_index: int, n_modes: int = MAX_MODES):
    """Apply a^dagger_i to a basis state.

    Returns ``(new_state, sign)`` or ``None`` if the mode is already filled.
    """
    _check_index(mode_index, n_modes)
    if state >> mode_index & 1:
        return None
    return state | (1 << mode_index), _sign_below(state, mode_index)


def apply_annihilation(state: int, mode_index: int, n_modes: int = MAX_MODES):
    """Apply a_i to a basis state; ``None`` if the mode is empty."""
    _check_index(mode_index, n_modes)
    if not state >> mode_index & 1:
        return None
    return state & ~(1 << mode_index), _sign_below(state, mode_index)


def enumerate_basis(n_modes: int | ModeRegistry, n_particles: int) -> list[int]:
    """All basis states with ``n_particles`` electrons.

    Ordered lexicographically by the tuple of occupied indices.
    """
    if isinstance(n_modes, ModeRegistry):
        n_modes = len(n_modes)
    if not 0 <= n_particles <= n_modes:
        raise ValueError(f"n_particles must be in [0, {n_modes}], got {n_particles}")
    return [sum(1 << i for i in combo) for combo in itertools.combinations(range(n_modes), n_particles)]


def format_state(state: int, n_modes: int) -> str:
    """Bitstring with mode 0 first (reading left to right)."""
    return "".join("1" if state >> i & 1 else "0" for i in range(n_modes))


class StateVector:
    """Sparse state vector: a mapping from basis bitstrings to amplitudes."""

    __slots__ = ("_amps",)

    def __init__(self, amplitudes: Mapping[int, complex] | None = None):
        self._amps: dict[int, complex] = {}
        if amplitudes:
            for s, a in amplitudes.items():
                if a != 0:
                    self._amps[int(s)] = complex(a)

    @classmethod
    def basis(cls, state: int, amplitude: complex = 1.0) -> "StateVector":
        return cls({state: amplitude})

    @classmethod
    def vacuum(cls) -> "StateVector":
        return cls({0: 1.0})

    def items(self):
        return self._amps.items()

    def __iter__(self):
        return iter(self._amps)

    def __len__(self) -> int:
        return len(self._amps)

    def __getitem__(self, state: int) -> complex:
        return self._amps.get(state, 0.0)

    def __add__(self, other: "StateVector") -> "StateVector":
        out = dict(self._amps)
        for s, a in other.items():
            out[s] = out.get(s, 0.0) + a
        return StateVector(out)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self + other.scale(-1.0)

    def scale(self, factor: complex) -> "StateVector":
        return StateVector({s: factor * a for s, a in self._amps.items()})

    __rmul__ = scale

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return sum((a.conjugate() * other[s] for s, a in self._amps.items()), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return self.scale(1.0 / n)

    def is_zero(self) -> bool:
        return not self._amps

    def create(self, mode_index: int, n_modes: int = MAX_MODES) -> "StateVector":
        return self._apply(apply_creation, mode_index, n_modes)

    def annihilate(self, mode_index: int, n_modes: int = MAX_MODES) -> "StateVector":
        return self._apply(apply_annihilation, mode_index, n_modes)

    def _apply(self, op, mode_index, n_modes):
        out: dict[int, complex] = {}
        for s, a in self._amps.items():
            r = op(s, mode_index, n_modes)
            if r is not None:
                out[r[0]] = out.get(r[0], 0.0) + r[1] * a
        return StateVector(out)

    def to_dense(self, basis: list[int], dtype=complex) -> np.ndarray:
        index = {s: i for i, s in enumerate(basis)}
        vec = np.zeros(len(basis), dtype=dtype)
        for s, a in self._amps.items():
            if s not in index:
                raise KeyError(f"state {s:#b} is not in the given basis")
            vec[index[s]] = a
        return vec

    @classmethod
    def from_dense(cls, vec: np.ndarray, basis: list[int]) -> "StateVector":
        return cls({s: complex(a) for s, a in zip(basis, vec) if a != 0})

    def __repr__(self) -> str:
        terms = ", ".join(f"{s:#b}: {a:.6g}" for s, a in sorted(self._amps.items()))
        return f"StateVector({{{terms}}})"


def product_state(creations: Iterable[int], n_modes: int = MAX_MODES) -> StateVector:
    """``a^dag_{c0} a^dag_{c1} ... |0>``, applied right to left."""
    vec = StateVector.vacuum()
    for i in reversed(list(creations)):
        vec = vec.create(i, n_modes)
    return vec


def operator_matrix(n_modes: int, mode_index: int, dagger: bool) -> sp.csr_matrix:
    """Sparse matrix of a_i (or a^dag_i) on the full 2**n_modes space.

    Row/column ``s`` is the basis state with bitstring ``s``.
    """
    _check_index(mode_index, n_modes)
    dim = 1 << n_modes
    op = apply_creation if dagger else apply_annihilation
    rows, cols, vals = [], [], []
    for s in range(dim):
        r = op(s, mode_index, n_modes)
        if r is not None:
            rows.append(r[0])
            cols.append(s)
            vals.append(r[1])
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=float)
