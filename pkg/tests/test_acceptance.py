"""Acceptance criteria, one test and one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import time

import numpy as np

from cotunnel import closedform, oracle
from cotunnel.cli import _check_anticommutation, _check_hamiltonian, load_config, main, read_csv
from cotunnel.model import OPPOSITE, SpinPair, build_registry
from cotunnel.perturbation import enumerate_orderings, max_ordering_magnitude, output_state, spin_decompose

from conftest import sample

TOTAL_SINGLET_EXAMPLE = 0.0214286
# "Machine precision" for a cancellation between ordering amplitudes, each built
# from a sign and three divided denominators: 64 ulp of the largest term.
MACHINE = 64 * np.finfo(float).eps


def total_decomposition(cfg, spins):
    orderings = enumerate_orderings(cfg, spins)
    dec = spin_decompose(output_state(orderings), build_registry(cfg))
    return orderings, dec


def test_1_closed_form_fidelity(capsys, report):
    start = time.perf_counter()
    code = main(["paths"])
    elapsed = time.perf_counter() - start
    _, rows, _ = read_csv(capsys.readouterr().out)
    worst = max(r[-1] for r in rows)
    ok = code == 0 and len(rows) == 7 and rows[-1][0] == "TOTAL" and worst <= 1e-10 and elapsed < 1.0
    assert report(1, "closed-form fidelity", ok, f"max rel diff {worst:.2e} over 6 paths + TOTAL (<= 1e-10), {elapsed:.3f} s (< 1 s)")


def test_2_triplet_cancellation(report):
    configs = sample(1000, seed=2)
    start = time.perf_counter()
    worst = 0.0
    for cfg in configs:
        orderings, dec = total_decomposition(cfg, OPPOSITE)
        worst = max(worst, dec.triplet_magnitude / max_ordering_magnitude(orderings))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 10.0
    assert report(2, "triplet cancellation", ok, f"max |T|/max|ordering| {worst:.2e} (<= 1e-12) over 1000 configs, {elapsed:.2f} s (< 10 s)")


def test_3_charging_free_null(report):
    worst = 0.0
    for cfg in sample(100, seed=3):
        orderings, dec = total_decomposition(cfg.with_(U=0.0), OPPOSITE)
        worst = max(worst, abs(dec.singlet) / max_ordering_magnitude(orderings))
    ok = worst <= MACHINE
    assert report(3, "U=0 null", ok, f"max |S|/max|ordering| {worst:.2e} (<= {MACHINE:.1e}) over 100 configs")


def test_4_same_spin_null(report):
    worst, counts = 0.0, set()
    for cfg in sample(100, seed=4):
        for spins in (SpinPair.parse("uu"), SpinPair.parse("dd")):
            orderings = enumerate_orderings(cfg, spins)
            counts.add(len(orderings))
            amps = [abs(a) for _, a in output_state(orderings).items()]
            worst = max(worst, max(amps, default=0.0) / max_ordering_magnitude(orderings))
    ok = counts == {4} and worst <= MACHINE
    assert report(4, "same-spin null", ok, f"ordering counts {sorted(counts)}, max |output|/max|ordering| {worst:.2e} (<= {MACHINE:.1e}) over 100 configs")


def test_5_total_singlet_value(report):
    cfg, _ = load_config(None)
    _, dec = total_decomposition(cfg, OPPOSITE)
    args = closedform.config_args(cfg)
    sets = closedform.set_sum_closed_form("A", *args).singlet_coeff + closedform.set_sum_closed_form("B", *args).singlet_coeff
    values = (dec.singlet.real, closedform.total_singlet_closed_form(*args), sets)
    ok = all(abs(v - TOTAL_SINGLET_EXAMPLE) <= 1e-7 for v in values)
    assert report(5, "total singlet value", ok, "engine {:.9f}, closed form {:.9f}, set A + set B {:.9f} (target 0.0214286 +/- 1e-7)".format(*values))


def test_6_identity_chain(report):
    worst = 0.0
    for cfg in sample(1000, seed=6):
        args = closedform.config_args(cfg)
        total = closedform.total_singlet_closed_form(*args)
        paths = sum(closedform.path_closed_form(lab, *args).singlet_coeff for lab in closedform.SET_A + closedform.SET_B)
        sets = sum(closedform.set_sum_closed_form(w, *args).singlet_coeff for w in "AB")
        worst = max(worst, abs(paths - total) / abs(total), abs(sets - total) / abs(total))
    ok = worst <= 1e-12
    assert report(6, "identity chain", ok, f"max rel residual {worst:.2e} (<= 1e-12) over 1000 configs")


def test_7_oracle_match(report):
    cfg, _ = load_config(None)
    details, ok = [], True
    for v, tol in ((1e-2, 0.02), (1e-3, 0.005)):
        oracle.propagator.cache_clear()
        m = oracle.oracle_match(cfg.with_(V_L=v, V_R1=v, V_R2=v), OPPOSITE)
        dim = m.result.meta["dimension"]
        ok &= m.relative_difference <= tol and m.max_triplet_ratio <= 1e-6 and m.runtime < 1.0 and dim == 45
        details.append(
            f"V={v:g}: |c_fit/c_pred-1| {m.relative_difference:.2e} (<= {tol:g}), max P_T/P_S {m.max_triplet_ratio:.1e}, {m.runtime:.3f} s"
        )
    assert report(7, "oracle match", ok, "; ".join(details) + f"; dim 45; window t in {oracle.DEFAULT_WINDOW}")


def test_8_u_scaling(report):
    cfg, _ = load_config(None)
    c1 = oracle.oracle_match(cfg.with_(U=1.0), OPPOSITE).fitted
    c2 = oracle.oracle_match(cfg.with_(U=2.0), OPPOSITE).fitted
    target = 0.5714286**2
    rel = abs(c1 / c2 / target - 1)
    assert report(8, "U-scaling via oracle", rel <= 0.01, f"c(U=1)/c(U=2) = {c1 / c2:.6f}, target {target:.6f}, rel dev {rel:.2e} (<= 1e-2)")


def test_9_fock_kernel(report):
    cfg, _ = load_config(None)
    anti_ok, anti = _check_anticommutation(10)
    ham_ok, ham = _check_hamiltonian(cfg)
    assert report(9, "fock kernel", anti_ok and ham_ok, f"anticommutation {anti}; {ham}")


def test_10_determinism(tmp_path, report):
    blobs = []
    for run, workers in enumerate(("1", "1", "4")):
        out = tmp_path / f"run{run}.csv"
        code = main(["sweep", "--param", "U", "--start", "0", "--stop", "4", "--steps", "41", "--workers", workers, "--out", str(out)])
        assert code == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    assert report(10, "determinism", ok, f"3 sweep runs (workers 1, 1, 4), {len(blobs[0])} bytes each, identical={ok}")
