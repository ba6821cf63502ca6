"""Command-line front end: ``cotunnel {verify,paths,sweep,evolve}``.

Exit codes: 0 success, 1 a verification check failed, 2 config error,
3 pole, 4 I/O error, 5 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import closedform, fock, oracle, perturbation
from .errors import ConfigError, NumericError, PoleError, RegimeError
from .model import (
    OPPOSITE,
    EnergyConfig,
    SpinPair,
    build_hamiltonian,
    build_registry,
    full_hamiltonian,
    is_pole_violation,
    number_operator,
    validate_config,
)

log = logging.getLogger("cotunnel")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_POLE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5

CONFIG_KEYS = ("E_L", "Delta_L", "Delta_R", "U", "V_L", "V_R1", "V_R2", "eps_d", "degeneracy_tol", "seed")
SWEEP_PARAMS = ("U", "E_L", "Delta_L", "Delta_R")


# --- config files ------------------------------------------------------------


def parse_config(text: str) -> tuple[EnergyConfig, int]:
    """Parse ``key = value`` lines into a validated config and a seed."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} = {value!r} is not a number") from None
        if not math.isfinite(number):
            raise ConfigError(f"line {lineno}: {key} must be finite")
        values[key] = number
    seed = values.pop("seed", 0.0)
    if seed != int(seed):
        raise ConfigError("seed must be an integer")
    config = EnergyConfig.from_mapping(values)
    check_config(config)
    return config, int(seed)


def check_config(config: EnergyConfig) -> None:
    problems = validate_config(config)
    if not problems:
        return
    if all(is_pole_violation(p) for p in problems):
        raise PoleError(problems[0].split(": ", 1)[1])
    raise ConfigError(problems)


def load_config(path: str | Path | None) -> tuple[EnergyConfig, int]:
    if path is None:
        text = resources.files("cotunnel").joinpath("example.cfg").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# --- CSV -----------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, complex):
        x = x.real
    return f"{float(x):.9g}"


def write_csv(header, rows, footer: list[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    for line in footer or []:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list], list[str]]:
    """Parse CSV written by this tool: ``(header, rows, footer_lines)``.

    Numeric cells come back as floats, others as strings.
    """
    lines = text.splitlines()
    footer = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(body)
    header = next(reader)
    rows = []
    for row in reader:
        parsed = []
        for cell in row:
            try:
                parsed.append(float(cell))
            except ValueError:
                parsed.append(cell)
        rows.append(parsed)
    return header, rows, footer


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    with open(out_path, "w", newline="") as fh:
        fh.write(text)


# --- paths ---------------------------------------------------------------------


def rel_diff(a: float, b: float, scale: float) -> float:
    """``|a-b| / max(|a|,|b|)``, falling back to ``scale`` when both are ~0."""
    big = max(abs(a), abs(b))
    if big <= 1e-12 * scale:
        return abs(a - b) / scale if scale else 0.0
    return abs(a - b) / big


PATHS_HEADER = ["label", "singlet_engine", "triplet_engine", "singlet_closedform", "triplet_closedform", "abs_rel_diff"]


def paths_table(config: EnergyConfig, spins: SpinPair) -> list[list]:
    """Engine vs closed form, one row per path plus a TOTAL row.

    For equal spins the triplet columns hold the ``a^dag_{R1s} a^dag_{R2s}``
    coefficient; its closed form is twice the opposite-spin ``T0`` one.
    """
    args = closedform.config_args(config)
    tol = config.degeneracy_tol
    orderings = perturbation.enumerate_orderings(config, spins)
    paths = perturbation.group_into_paths(orderings)

    def triplet(dec):
        if not spins.same:
            return dec.triplet_m0.real
        return (dec.triplet_up if spins.sigma is fock.Spin.UP else dec.triplet_down).real

    entries = []
    for p in paths:
        cf = closedform.path_closed_form(p.label, *args, tol=tol)
        t_cf = 2 * cf.triplet0_coeff if spins.same else cf.triplet0_coeff
        s_cf = 0.0 if spins.same else cf.singlet_coeff
        entries.append((str(p.label), p.singlet_coeff.real, triplet(p.decomposition), s_cf, t_cf))
    total = perturbation.spin_decompose(perturbation.output_state(orderings), build_registry(config))
    s_total = 0.0 if spins.same else closedform.total_singlet_closed_form(*args, tol=tol)
    entries.append(("TOTAL", total.singlet.real, triplet(total), s_total, 0.0))

    scale = max(max(abs(v) for v in e[1:]) for e in entries)
    rows = []
    for label, s_e, t_e, s_c, t_c in entries:
        diff = max(rel_diff(s_e, s_c, scale), rel_diff(t_e, t_c, scale))
        rows.append([label, s_e, t_e, s_c, t_c, diff])
    return rows


def cmd_paths(config_path, spins: SpinPair, out_path=None) -> int:
    config, _ = load_config(config_path)
    text = write_csv(PATHS_HEADER, paths_table(config, spins))
    _emit(text, out_path)
    return EXIT_OK


# --- sweep ---------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {self.parameter!r}")
        if self.steps < 2:
            raise ConfigError("sweep needs steps >= 2")
        if self.start == self.stop:
            raise ConfigError("sweep start and stop must differ")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


SWEEP_HEADER = ["param_value", "singlet_eq14", "singlet_engine", "triplet_engine_residual"]


def sweep_point(config: EnergyConfig, spins: SpinPair):
    """``(closed-form singlet, engine singlet, engine triplet magnitude)`` or a skip reason string."""
    problems = validate_config(config)
    if problems:
        return "; ".join(problems)
    try:
        closed = 0.0 if spins.same else closedform.total_singlet_closed_form(
            *closedform.config_args(config), tol=config.degeneracy_tol
        )
        total = perturbation.total_output(config, spins)
    except PoleError as exc:
        return str(exc)
    return (closed, total.singlet.real, total.triplet_magnitude)


def _sweep_task(args):
    config, spins = args
    return sweep_point(config, spins)


def sweep_rows(config: EnergyConfig, spec: SweepSpec, spins: SpinPair = OPPOSITE, workers: int = 1):
    points = [(float(v), config.with_(**{spec.parameter: float(v)})) for v in spec.values()]
    tasks = [(c, spins) for _, c in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = []
    for (value, _), res in zip(points, results):
        if isinstance(res, str):
            log.warning("skipping %s=%s: %s", spec.parameter, fmt(value), res)
            continue
        rows.append([value, *res])
    return rows


def cmd_sweep(config_path, spec: SweepSpec, out_path, spins: SpinPair = OPPOSITE, workers: int = 1) -> int:
    config, _ = load_config(config_path)
    text = write_csv(SWEEP_HEADER, sweep_rows(config, spec, spins, workers))
    _emit(text, out_path)
    return EXIT_OK


# --- evolve --------------------------------------------------------------------

EVOLVE_HEADER = ["t", "P_singlet", "P_triplet_total", "P_leak", "norm"]


def evolve_table(config: EnergyConfig, spins: SpinPair, t_max: float, steps: int, fit_from: float = 0.0):
    if not t_max > 0:
        raise ConfigError("t_max must be positive")
    if steps < 2:
        raise ConfigError("evolve needs steps >= 2")
    grid = np.linspace(0.0, t_max, steps)
    res = oracle.transition_probabilities(config, spins, grid)
    rows = [list(r) for r in zip(res.times, res.P_singlet, res.P_triplet_total, res.P_leak, res.norm)]
    fit = oracle.fit_quadratic_growth(res, t_min=fit_from)
    predicted = 0.0 if spins.same else oracle.predicted_quadratic_coefficient(config)
    diff = abs(fit.coefficient - predicted) / abs(predicted) if predicted else abs(fit.coefficient)
    footer = [
        f"fit_quadratic_coefficient={fmt(fit.coefficient)}",
        f"predicted_quadratic_coefficient={fmt(predicted)}",
        f"relative_difference={fmt(diff)}",
    ]
    return rows, footer, fit, predicted


def cmd_evolve(config_path, spins: SpinPair, t_max: float, steps: int, out_path, fit_from: float = 0.0) -> int:
    config, _ = load_config(config_path)
    rows, footer, _, _ = evolve_table(config, spins, t_max, steps, fit_from)
    _emit(write_csv(EVOLVE_HEADER, rows, footer), out_path)
    return EXIT_OK


# --- verify --------------------------------------------------------------------


def random_configs(rng: np.random.Generator, n: int, **overrides) -> list[EnergyConfig]:
    """Valid configs with E_L in [-6,-1], Delta_R in [0.5,2], Delta_L in [0, 0.8 Delta_R], U in [0.1,5]."""
    out = []
    while len(out) < n:
        d_r = rng.uniform(0.5, 2.0)
        c = EnergyConfig(
            E_L=rng.uniform(-6.0, -1.0),
            Delta_L=rng.uniform(0.0, 0.8 * d_r),
            Delta_R=d_r,
            U=rng.uniform(0.1, 5.0),
        ).with_(**overrides)
        if not validate_config(c):
            out.append(c)
    return out


def _check_anticommutation(n_modes: int = 10) -> tuple[bool, str]:
    ops = [fock.operator_matrix(n_modes, i, False) for i in range(n_modes)]
    dags = [fock.operator_matrix(n_modes, i, True) for i in range(n_modes)]
    eye = np.ones(1 << n_modes)
    worst = 0.0
    for p in range(n_modes):
        for q in range(n_modes):
            aa = ops[p] @ ops[q] + ops[q] @ ops[p]
            dd = dags[p] @ dags[q] + dags[q] @ dags[p]
            ad = ops[p] @ dags[q] + dags[q] @ ops[p]
            worst = max(worst, abs(aa).max(), abs(dd).max())
            ad = ad.toarray() if p == q else ad
            if p == q:
                worst = max(worst, np.max(np.abs(ad - np.diag(eye))))
            else:
                worst = max(worst, abs(ad).max())
    return worst == 0, f"max deviation {worst:g} over {n_modes}x{n_modes} mode pairs"


def _check_hamiltonian(config: EnergyConfig) -> tuple[bool, str]:
    reg = build_registry(config)
    H = full_hamiltonian(config, reg)
    N = number_operator(len(reg))
    herm = abs(H - H.conj().T).max()
    comm = abs(H @ N - N @ H).max()
    block = 0.0
    for n in range(len(reg) + 1):
        sector = build_hamiltonian(config, reg, n)
        idx = list(sector.basis)
        block = max(block, float(np.max(np.abs(H[idx][:, idx].toarray() - sector.matrix))))
    ok = herm == 0 and comm == 0 and block <= 1e-12 * config.energy_scale
    return ok, f"|H - H^dag| = {herm:g}, |[H, N]| = {comm:g}, sector blocks vs full space {block:g}"


def verification_checks(config: EnergyConfig, seed: int, n_random: int = 200):
    """Yield ``(name, passed, detail)`` for the full invariant suite."""
    rng = np.random.default_rng(seed)
    randoms = random_configs(rng, n_random)

    yield ("fock anticommutation", *_check_anticommutation())
    yield ("hamiltonian hermitian, [H,N]=0", *_check_hamiltonian(config))

    counts = {str(s): len(perturbation.enumerate_orderings(config, s)) for s in (OPPOSITE, SpinPair.parse("uu"))}
    yield ("ordering counts", counts == {"ud": 12, "uu": 4}, f"{counts}")

    worst = 0.0
    for c in [config, *randoms]:
        for spins in (OPPOSITE, SpinPair.parse("uu")):
            orderings = perturbation.enumerate_orderings(c, spins)
            dec = perturbation.spin_decompose(perturbation.output_state(orderings), build_registry(c))
            worst = max(worst, dec.triplet_magnitude / perturbation.max_ordering_magnitude(orderings))
    yield ("triplet cancellation", worst <= 1e-12, f"max |triplet| / max |ordering| = {worst:.3e} over {n_random + 1} configs")

    worst = 0.0
    for c in [config.with_(eps_d=0.0), *randoms]:
        for row in paths_table(c, OPPOSITE):
            worst = max(worst, row[-1])
    yield ("closed-form equivalence", worst <= 1e-10, f"max relative difference {worst:.3e}")

    failures = []
    for c in [config.with_(eps_d=0.0), *randoms]:
        rep = closedform.cross_check_identities(c)
        failures.extend(rep.failures)
    yield ("identity chain", not failures, f"{len(failures)} failures" + (f", first {failures[0]}" if failures else ""))

    match = oracle.oracle_match(config, OPPOSITE)
    ok = match.relative_difference <= 0.02 and match.max_triplet_ratio <= 1e-6
    yield (
        "oracle perturbative match",
        ok,
        f"c_fit/c_pred - 1 = {match.fitted / match.predicted - 1:+.3e}, max P_T/P_S = {match.max_triplet_ratio:.2e}, "
        f"window t in [{oracle.DEFAULT_WINDOW[0]:g}, {oracle.DEFAULT_WINDOW[1]:g}]",
    )


def cmd_verify(config_path) -> int:
    config, seed = load_config(config_path)
    all_ok = True
    for name, passed, detail in verification_checks(config, seed):
        all_ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all_ok else EXIT_FAIL


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cotunnel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spins=True):
        p.add_argument("--config", metavar="PATH", help="key=value config file (default: shipped example)")
        if spins:
            p.add_argument("--spins", choices=("ud", "uu", "du", "dd"), default="ud")

    common(sub.add_parser("verify", help="run the invariant suite"), spins=False)

    p = sub.add_parser("paths", help="per-path engine vs closed-form CSV")
    common(p)
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("sweep", help="sweep one parameter; CSV of total singlet")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("evolve", help="exact evolution; CSV of populations")
    common(p)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--fit-from", type=float, default=0.0, help="only fit points with t >= this")
    p.add_argument("--out", metavar="PATH")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    start = time.perf_counter()
    try:
        if args.command == "verify":
            code = cmd_verify(args.config)
        elif args.command == "paths":
            code = cmd_paths(args.config, SpinPair.parse(args.spins), args.out)
        elif args.command == "sweep":
            spec = SweepSpec(args.param, args.start, args.stop, args.steps)
            code = cmd_sweep(args.config, spec, args.out, SpinPair.parse(args.spins), args.workers)
        else:
            code = cmd_evolve(args.config, SpinPair.parse(args.spins), args.t_max, args.steps, args.out, args.fit_from)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PoleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, RegimeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
