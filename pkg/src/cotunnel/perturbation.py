"""Fourth-order time-ordered perturbation theory in the lead-dot hopping.

Every ordering is a sequence of four hops that carries both input
electrons from ``L`` through the dot into ``R1`` and ``R2``.  Its amplitude
is the product of hop signs and couplings over the three resolvent
denominators ``E_i - E_n`` of the intermediate states.  Amplitudes are
reported with the coupling product ``V_L**2 V_R1 V_R2`` divided out.
"""

from __future__ import annotations

import enum
import functools
from collections import defaultdict
from dataclasses import dataclass

from .errors import PoleError, SectorLeakError
from .fock import Lead, Mode, ModeRegistry, Spin, StateVector, format_state, product_state
from .model import (
    SLOT_K,
    SLOT_KP,
    EnergyConfig,
    SpinPair,
    _denominator_factors,
    apply_hop,
    build_registry,
    dot_occupancy,
    require_valid,
    unperturbed_energy,
)


class VertexKind(enum.Enum):
    IN = "in"  # lead -> dot
    OUT = "out"  # dot -> lead


class PathLabel(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Vertex:
    kind: VertexKind
    lead: Lead
    slot: int
    spin: Spin
    coupling: float = 1.0

    def __post_init__(self):
        if self.kind is VertexKind.IN and self.lead is not Lead.L:
            raise ValueError("IN vertices take electrons from lead L")
        if self.kind is VertexKind.OUT and self.lead not in (Lead.R1, Lead.R2):
            raise ValueError("OUT vertices put electrons into R1 or R2")

    def __str__(self) -> str:
        arrow = f"{self.lead.name}{self.slot}->D" if self.kind is VertexKind.IN else f"D->{self.lead.name}"
        return f"{arrow}{self.spin.symbol}"


@dataclass(frozen=True)
class Ordering:
    """One time ordering of four hops.

    ``vertices`` are listed in the order they act on the initial state.
    ``states`` holds the initial, three intermediate and final basis states.
    ``amplitude`` is C-stripped; ``raw_amplitude`` keeps the couplings.
    """

    vertices: tuple[Vertex, Vertex, Vertex, Vertex]
    states: tuple[int, int, int, int, int]
    sign: int
    intermediate_energies: tuple[float, float, float]
    initial_energy: float
    amplitude: float
    raw_amplitude: float

    @property
    def final_state(self) -> int:
        return self.states[-1]

    @property
    def denominators(self) -> tuple[float, float, float]:
        return tuple(self.initial_energy - e for e in self.intermediate_energies)

    def output(self, raw: bool = False) -> StateVector:
        return StateVector.basis(self.final_state, self.raw_amplitude if raw else self.amplitude)

    def __str__(self) -> str:
        return " , ".join(str(v) for v in self.vertices)


@dataclass(frozen=True)
class SpinDecomposition:
    """Output amplitudes in the basis ``|S>, |T0>, |T+>, |T->``.

    ``singlet`` and ``triplet_m0`` are coefficients of the unnormalized
    states ``(a^dag_{R1u} a^dag_{R2d} -/+ a^dag_{R1d} a^dag_{R2u})|0>``, each of
    squared norm 2.  ``triplet_up``/``triplet_down`` multiply
    ``a^dag_{R1s} a^dag_{R2s}|0>``.
    """

    singlet: complex
    triplet_m0: complex
    triplet_up: complex
    triplet_down: complex

    @property
    def triplet_magnitude(self) -> float:
        return max(abs(self.triplet_m0), abs(self.triplet_up), abs(self.triplet_down))

    @property
    def singlet_probability(self) -> float:
        return 2.0 * abs(self.singlet) ** 2

    @property
    def triplet_probability(self) -> float:
        return 2.0 * abs(self.triplet_m0) ** 2 + abs(self.triplet_up) ** 2 + abs(self.triplet_down) ** 2

    def __add__(self, other: "SpinDecomposition") -> "SpinDecomposition":
        return SpinDecomposition(
            self.singlet + other.singlet,
            self.triplet_m0 + other.triplet_m0,
            self.triplet_up + other.triplet_up,
            self.triplet_down + other.triplet_down,
        )

    def reconstruct(self, registry: ModeRegistry) -> StateVector:
        """Expand back into the Fock basis."""
        ud, du, uu, dd = _output_products(registry)
        return (
            ud.scale(self.singlet + self.triplet_m0)
            + du.scale(self.triplet_m0 - self.singlet)
            + uu.scale(self.triplet_up)
            + dd.scale(self.triplet_down)
        )


ZERO_DECOMPOSITION = SpinDecomposition(0j, 0j, 0j, 0j)


@dataclass(frozen=True)
class PathAmplitude:
    label: PathLabel
    orderings: tuple[Ordering, Ordering]
    decomposition: SpinDecomposition

    @property
    def singlet_coeff(self) -> complex:
        return self.decomposition.singlet

    @property
    def triplet0_coeff(self) -> complex:
        return self.decomposition.triplet_m0

    @property
    def has_double_occupancy(self) -> bool:
        return _visits_double(self.orderings[0])


def _output_products(registry: ModeRegistry):
    n = len(registry)
    r1 = {s: registry.index(Lead.R1, 0, s) for s in Spin}
    r2 = {s: registry.index(Lead.R2, 0, s) for s in Spin}
    up, dn = Spin.UP, Spin.DOWN
    return (
        product_state([r1[up], r2[dn]], n),
        product_state([r1[dn], r2[up]], n),
        product_state([r1[up], r2[up]], n),
        product_state([r1[dn], r2[dn]], n),
    )


def spin_decompose(
    output_state: StateVector, registry: ModeRegistry, leak_tol: float = 1e-12
) -> SpinDecomposition:
    """Project a state in the one-electron-in-R1, one-in-R2 sector onto singlet/triplets.

    Raises :class:`SectorLeakError` when any other component exceeds
    ``leak_tol`` times the largest amplitude (or ``leak_tol`` absolutely for
    tiny states).
    """
    products = _output_products(registry)
    coeffs = []
    sector = set()
    for p in products:
        ((state, sign),) = p.items()
        sector.add(state)
        coeffs.append(output_state[state] * sign.real)
    limit = leak_tol * max((abs(a) for _, a in output_state.items()), default=0.0)
    for s, a in output_state.items():
        if s not in sector and abs(a) > limit:
            raise SectorLeakError(
                f"component {format_state(s, len(registry))} = {a:.3e} lies outside the R1xR2 sector"
            )
    c_ud, c_du, c_uu, c_dd = coeffs
    return SpinDecomposition(
        singlet=(c_ud - c_du) / 2,
        triplet_m0=(c_ud + c_du) / 2,
        triplet_up=c_uu,
        triplet_down=c_dd,
    )


# --- enumeration -----------------------------------------------------------


def _structural_registry() -> ModeRegistry:
    keys = [(Lead.L, SLOT_K), (Lead.L, SLOT_KP), (Lead.R1, 0), (Lead.R2, 0), (Lead.DOT, 0)]
    return ModeRegistry(Mode(lead, slot, spin) for lead, slot in keys for spin in Spin)


def _candidate_vertices(registry: ModeRegistry) -> list[tuple[Vertex, int, int]]:
    out = []
    for i, m in enumerate(registry):
        d = registry.index(Lead.DOT, 0, m.spin)
        if m.lead is Lead.L:
            out.append((Vertex(VertexKind.IN, m.lead, m.slot, m.spin), d, i))
        elif m.lead in (Lead.R1, Lead.R2):
            out.append((Vertex(VertexKind.OUT, m.lead, m.slot, m.spin), i, d))
    return out


@functools.lru_cache(maxsize=None)
def _templates(sigma: Spin, sigma_prime: Spin):
    """Config-independent part of every ordering: vertices, basis states, sign."""
    reg = _structural_registry()
    n = len(reg)
    i_k = reg.index(Lead.L, SLOT_K, sigma)
    i_kp = reg.index(Lead.L, SLOT_KP, sigma_prime)
    ((start, start_sign),) = product_state([i_k, i_kp], n).items()
    r1 = {reg.index(Lead.R1, 0, s) for s in Spin}
    r2 = {reg.index(Lead.R2, 0, s) for s in Spin}
    verts = _candidate_vertices(reg)

    found = []

    def walk(state, sign, seq, states):
        if len(seq) == 4:
            occ = [i for i in range(n) if state >> i & 1]
            if len(occ) == 2 and occ[0] in r1 and occ[1] in r2:
                found.append((tuple(seq), tuple(states), int(sign)))
            return
        for vertex, cr, an in verts:
            r = apply_hop(state, cr, an, n)
            if r is not None:
                walk(r[0], sign * r[1], seq + [vertex], states + [r[0]])

    walk(start, start_sign.real, [], [start])
    return tuple(found)


def _name_factor(config: EnergyConfig, value: float, label: str) -> str:
    for name, v in _denominator_factors(config).items():
        if abs(abs(v) - abs(value)) <= 1e-12 * config.energy_scale:
            return f"{name} (E_i - E[{label}])"
    return f"E_i - E[{label}]"


def _evaluate(config: EnergyConfig, registry: ModeRegistry, template) -> Ordering:
    seq, states, sign = template
    seq = tuple(Vertex(v.kind, v.lead, v.slot, v.spin, config.coupling(v.lead)) for v in seq)
    e_i = unperturbed_energy(config, registry, states[0])
    inter = tuple(unperturbed_energy(config, registry, s) for s in states[1:4])
    tol = config.degeneracy_tol * config.energy_scale
    denom = 1.0
    for s, e in zip(states[1:4], inter):
        d = e_i - e
        if abs(d) < tol:
            raise PoleError(_name_factor(config, d, format_state(s, len(registry))), d)
        denom *= d
    stripped = sign / denom
    return Ordering(
        vertices=seq,
        states=states,
        sign=sign,
        intermediate_energies=inter,
        initial_energy=e_i,
        amplitude=stripped,
        raw_amplitude=stripped * config.coupling_product,
    )


def enumerate_orderings(config: EnergyConfig, spins: SpinPair) -> list[Ordering]:
    """All non-vanishing four-hop orderings from ``|phi_i>`` into the R1xR2 sector."""
    require_valid(config)
    registry = build_registry(config)
    return [_evaluate(config, registry, t) for t in _templates(spins.sigma, spins.sigma_prime)]


def ordering_amplitude(ordering: Ordering, config: EnergyConfig, raw: bool = False) -> float:
    """Re-evaluate an ordering's amplitude at ``config``."""
    registry = build_registry(require_valid(config))
    template = (ordering.vertices, ordering.states, ordering.sign)
    o = _evaluate(config, registry, template)
    return o.raw_amplitude if raw else o.amplitude


# --- grouping ----------------------------------------------------------------


def _visits_double(ordering: Ordering) -> bool:
    reg = _structural_registry()
    return any(dot_occupancy(reg, s) == 2 for s in ordering.states[1:4])


def _path_key(o: Ordering):
    return tuple((v.kind, v.slot if v.kind is VertexKind.IN else None, v.spin) for v in o.vertices)


def _label(o: Ordering) -> PathLabel:
    ins = [v for v in o.vertices if v.kind is VertexKind.IN]
    outs = [v for v in o.vertices if v.kind is VertexKind.OUT]
    set_a = ins[0].slot == SLOT_KP  # lower-energy electron enters first
    if not _visits_double(o):
        return PathLabel.I if set_a else PathLabel.IV
    last_in_first_out = outs[0].spin == ins[1].spin
    if set_a:
        return PathLabel.II if last_in_first_out else PathLabel.III
    return PathLabel.V if last_in_first_out else PathLabel.VI


_LABEL_ORDER = list(PathLabel)


def group_into_paths(orderings: list[Ordering], registry: ModeRegistry | None = None) -> list[PathAmplitude]:
    """Pair orderings related by the R1<->R2 exchange and label the pairs I..VI.

    Labels follow the structure of each pair: which input electron enters
    the dot first (``E_L - Delta_L`` first gives I-III), whether the dot is
    ever doubly occupied (no: I and IV), and whether the electron that
    entered last leaves first (II and V) or not (III and VI).
    """
    if registry is None:
        registry = _structural_registry()
    groups: dict = defaultdict(list)
    for o in orderings:
        groups[_path_key(o)].append(o)
    paths = []
    for members in groups.values():
        if len(members) != 2:
            raise AssertionError(f"ordering group of size {len(members)}; expected R1<->R2 pairs")
        a, b = members
        if {v.lead for v in a.vertices if v.kind is VertexKind.OUT} != {Lead.R1, Lead.R2}:
            raise AssertionError("path members must each use both output leads")
        if _label(a) != _label(b):
            raise AssertionError(f"pair members labelled {_label(a)} and {_label(b)}")
        a, b = sorted(members, key=lambda o: o.vertices[[v.kind for v in o.vertices].index(VertexKind.OUT)].lead)
        out = a.output() + b.output()
        paths.append(PathAmplitude(_label(a), (a, b), spin_decompose(out, registry)))
    labels = [p.label for p in paths]
    if len(set(labels)) != len(labels):
        raise AssertionError(f"duplicate path labels {labels}")
    return sorted(paths, key=lambda p: _LABEL_ORDER.index(p.label))


def output_state(orderings: list[Ordering], raw: bool = False) -> StateVector:
    out = StateVector()
    for o in orderings:
        out = out + o.output(raw)
    return out


def total_output(config: EnergyConfig, spins: SpinPair, raw: bool = False) -> SpinDecomposition:
    """Sum of all orderings, spin-decomposed (C-stripped unless ``raw``)."""
    registry = build_registry(config)
    orderings = enumerate_orderings(config, spins)
    return spin_decompose(output_state(orderings, raw), registry)


def max_ordering_magnitude(orderings: list[Ordering]) -> float:
    return max(abs(o.amplitude) for o in orderings)
