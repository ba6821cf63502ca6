"""Closed-form rational expressions for the path, set and total amplitudes.

All values are C-stripped (coupling product and on-shell factor removed)
and assume ``eps_d = 0``.

The triplet coefficients of the four charging paths (II, III, V, VI) are
available in two forms.  ``printed=True`` gives numerators
``-/+ Delta_R (E_L -/+ Delta_L)``; these are not dimensionally consistent with
their singlet parts.  The default gives ``+/- Delta_R``, which is what the
fourth-order sum produces and agrees in sign with the printed form whenever
``E_L -/+ Delta_L < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PoleError
from .model import EnergyConfig, require_valid
from .perturbation import PathLabel

SET_A = (PathLabel.I, PathLabel.II, PathLabel.III)
SET_B = (PathLabel.IV, PathLabel.V, PathLabel.VI)


@dataclass(frozen=True)
class ClosedFormResult:
    singlet_coeff: float
    triplet0_coeff: float


def _scale(E_L, Delta_L, Delta_R, U):
    return max(abs(E_L), abs(Delta_R), abs(U), 1.0)


def _guard(factors: dict[str, float], tol: float, scale: float) -> None:
    for name, value in factors.items():
        if abs(value) < tol * scale:
            raise PoleError(name, value)


def _factors(E_L, Delta_L, Delta_R, U):
    return {
        "E_L-Delta_L": E_L - Delta_L,
        "E_L+Delta_L": E_L + Delta_L,
        "E_L^2-Delta_R^2": (E_L - Delta_R) * (E_L + Delta_R),
        "Delta_L^2-Delta_R^2": (Delta_L - Delta_R) * (Delta_L + Delta_R),
        "2E_L-U": 2 * E_L - U,
    }


def path_closed_form(
    label: PathLabel | str,
    E_L: float,
    Delta_L: float,
    Delta_R: float,
    U: float,
    *,
    printed: bool = False,
    tol: float = 1e-9,
) -> ClosedFormResult:
    """Singlet and m=0 triplet coefficients of one path."""
    label = PathLabel(label)
    f = _factors(E_L, Delta_L, Delta_R, U)
    needed = {
        PathLabel.I: ("E_L-Delta_L", "E_L^2-Delta_R^2", "Delta_L^2-Delta_R^2"),
        PathLabel.IV: ("E_L+Delta_L", "E_L^2-Delta_R^2", "Delta_L^2-Delta_R^2"),
        PathLabel.II: ("E_L-Delta_L", "E_L^2-Delta_R^2", "2E_L-U"),
        PathLabel.III: ("E_L-Delta_L", "E_L^2-Delta_R^2", "2E_L-U"),
        PathLabel.V: ("E_L+Delta_L", "E_L^2-Delta_R^2", "2E_L-U"),
        PathLabel.VI: ("E_L+Delta_L", "E_L^2-Delta_R^2", "2E_L-U"),
    }[label]
    _guard({k: f[k] for k in needed}, tol, _scale(E_L, Delta_L, Delta_R, U))
    minus, plus = E_L - Delta_L, E_L + Delta_L
    rr = f["E_L^2-Delta_R^2"]
    ll = f["Delta_L^2-Delta_R^2"]
    charge = f["2E_L-U"]

    if label is PathLabel.I:
        d = minus * rr * ll
        return ClosedFormResult((Delta_R**2 - Delta_L * E_L) / d, -Delta_R * minus / d)
    if label is PathLabel.IV:
        d = plus * rr * ll
        return ClosedFormResult((Delta_R**2 + Delta_L * E_L) / d, Delta_R * plus / d)

    # charging paths: singlet E_L / D, triplet sign pattern (-, +, +, -) for II, III, V, VI
    first = minus if label in (PathLabel.II, PathLabel.III) else plus
    d = first * rr * charge
    sign = -1.0 if label in (PathLabel.II, PathLabel.VI) else 1.0
    if printed:
        triplet = sign * Delta_R * first / d
    else:
        triplet = -sign * Delta_R / d
    return ClosedFormResult(E_L / d, triplet)


def tau(E_L: float, Delta_L: float, Delta_R: float, U: float = 0.0, *, tol: float = 1e-9) -> float:
    """Triplet coefficient of path I; path IV carries ``-tau``."""
    return path_closed_form(PathLabel.I, E_L, Delta_L, Delta_R, U, tol=tol).triplet0_coeff


def set_sum_closed_form(
    which: str, E_L: float, Delta_L: float, Delta_R: float, U: float, *, tol: float = 1e-9
) -> ClosedFormResult:
    """Combined singlet of paths I+II+III (set ``"A"``) or IV+V+VI (set ``"B"``)."""
    f = _factors(E_L, Delta_L, Delta_R, U)
    scale = _scale(E_L, Delta_L, Delta_R, U)
    which = which.upper()
    if which == "A":
        _guard({k: f[k] for k in ("E_L-Delta_L", "Delta_L^2-Delta_R^2", "E_L^2-Delta_R^2", "2E_L-U")}, tol, scale)
        num = -U * (Delta_R**2 - Delta_L * E_L) - 2 * Delta_L * E_L * (E_L - Delta_L)
        den = (E_L - Delta_L) * f["Delta_L^2-Delta_R^2"] * f["E_L^2-Delta_R^2"] * f["2E_L-U"]
        return ClosedFormResult(num / den, tau(E_L, Delta_L, Delta_R, U, tol=tol))
    if which == "B":
        _guard({k: f[k] for k in ("E_L+Delta_L", "Delta_L^2-Delta_R^2", "E_L^2-Delta_R^2", "2E_L-U")}, tol, scale)
        num = -U * (Delta_R**2 + Delta_L * E_L) + 2 * Delta_L * E_L * (E_L + Delta_L)
        den = (E_L + Delta_L) * f["Delta_L^2-Delta_R^2"] * f["E_L^2-Delta_R^2"] * f["2E_L-U"]
        return ClosedFormResult(num / den, -tau(E_L, Delta_L, Delta_R, U, tol=tol))
    raise ValueError(f"set must be 'A' or 'B', got {which!r}")


def total_singlet_closed_form(
    E_L: float, Delta_L: float, Delta_R: float, U: float, *, tol: float = 1e-9
) -> float:
    """``2 E_L U / ((E_L^2 - Delta_R^2)(E_L^2 - Delta_L^2)(2 E_L - U))``."""
    f = _factors(E_L, Delta_L, Delta_R, U)
    _guard({k: f[k] for k in ("E_L-Delta_L", "E_L+Delta_L", "E_L^2-Delta_R^2", "2E_L-U")}, tol, _scale(E_L, Delta_L, Delta_R, U))
    return 2 * E_L * U / (f["E_L^2-Delta_R^2"] * ((E_L - Delta_L) * (E_L + Delta_L)) * f["2E_L-U"])


def config_args(config: EnergyConfig) -> tuple[float, float, float, float]:
    return (config.E_L, config.Delta_L, config.Delta_R, config.U)


@dataclass
class IdentityReport:
    """Residuals of the path/set/total identities at one configuration."""

    checks: list[tuple[str, float, bool]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(passed for _, _, passed in self.checks)

    @property
    def failures(self) -> list[tuple[str, float]]:
        return [(name, r) for name, r, passed in self.checks if not passed]

    def add(self, name: str, residual: float, limit: float) -> None:
        self.checks.append((name, residual, residual <= limit))

    def __str__(self) -> str:
        return "\n".join(f"{'PASS' if p else 'FAIL'} {n}: residual {r:.3e}" for n, r, p in self.checks)


def cross_check_identities(config: EnergyConfig, rtol: float = 1e-12, atol: float = 1e-15) -> IdentityReport:
    """Check that the per-path, per-set and total closed forms are mutually consistent.

    Singlet residuals are ``|lhs - rhs| / max(|rhs|, atol/rtol)``.  Triplet
    sums vanish identically, so their residuals are taken relative to the
    largest single-path triplet.
    """
    require_valid(config)
    if config.eps_d != 0:
        raise ValueError("closed forms assume eps_d = 0")
    args = config_args(config)
    tol = config.degeneracy_tol
    paths = {lab: path_closed_form(lab, *args, tol=tol) for lab in PathLabel}
    set_a = set_sum_closed_form("A", *args, tol=tol)
    set_b = set_sum_closed_form("B", *args, tol=tol)
    total = total_singlet_closed_form(*args, tol=tol)
    report = IdentityReport()

    def rel(lhs, rhs):
        return abs(lhs - rhs) / max(abs(rhs), atol / rtol)

    path_singlets = [p.singlet_coeff for p in paths.values()]
    report.add("sum(paths) singlet = total", rel(sum(path_singlets), total), rtol)
    report.add("set A + set B singlet = total", rel(set_a.singlet_coeff + set_b.singlet_coeff, total), rtol)
    for name, members, s in (("A", SET_A, set_a), ("B", SET_B, set_b)):
        report.add(
            f"paths of set {name} = set {name} singlet",
            rel(sum(paths[m].singlet_coeff for m in members), s.singlet_coeff),
            rtol,
        )

    triplets = [p.triplet0_coeff for p in paths.values()]
    t_scale = max(abs(v) for v in triplets)
    report.add("sum(paths) triplet = 0", abs(sum(triplets)) / t_scale, rtol)
    for a, b in ((PathLabel.I, PathLabel.IV), (PathLabel.II, PathLabel.III), (PathLabel.V, PathLabel.VI)):
        report.add(f"triplet {a} + {b} = 0", abs(paths[a].triplet0_coeff + paths[b].triplet0_coeff) / t_scale, rtol)

    if abs(2 * config.E_L) >= tol * config.energy_scale:
        free = config.with_(U=0.0)
        a0 = set_sum_closed_form("A", *config_args(free), tol=tol).singlet_coeff
        b0 = set_sum_closed_form("B", *config_args(free), tol=tol).singlet_coeff
        report.add("U=0: set A = -set B", rel(a0, -b0), rtol)
    return report
