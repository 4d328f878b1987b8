"""End-to-end acceptance criteria, each at its stated tolerance.

Every test appends one ``C<n> PASS|FAIL`` line to the summary printed at the
end of the pytest run, then asserts.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import random_train_pair, wtse_loops
from spiketrack.ann import features
from spiketrack.cli import main
from spiketrack.config import RunConfig
from spiketrack.conversion import SnnModel, SpikingConv
from spiketrack.energy import PUBLISHED_BASELINES, estimate
from spiketrack.engine import MembraneState, SimConfig, SpikeTensor, firing_rate, run_network, step_layer
from spiketrack.schedules import Constant, Phase, TwoStatus, threshold_at
from spiketrack.similarity import HseConfig, hse, pse, tse, wtse
from spiketrack.tensor import ConvSpec
from spiketrack.tracking import generate_sequence, response_agreement, suite_params, track

pytestmark = pytest.mark.acceptance

N_SUITE = 10


def record(cid: str, title: str, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"{cid} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    return ok


@pytest.fixture(scope="module")
def suite():
    return [generate_sequence(suite_params(s)) for s in range(N_SUITE)]


@pytest.fixture(scope="module")
def ann_runs(suite, toy_ann):
    return [track(seq, toy_ann, RunConfig().tracker("ann")) for seq in suite]


def test_c1_conversion_fidelity(toy_ann, toy_calib, toy_snn, toy_stats):
    start = time.perf_counter()
    cfg = SimConfig(T=1000, schedule=Constant(1.0))
    lam = toy_stats.lambda_per_layer[-1]
    errors = []
    for x in toy_calib:
        rate = firing_rate(run_network(toy_snn, x, cfg).output)
        errors.append(np.abs(rate - features(toy_ann, x) / lam).ravel())
    mae = float(np.mean(np.concatenate(errors)))
    elapsed = time.perf_counter() - start
    ok = mae <= 0.05 and elapsed < 10
    record("C1", "conversion fidelity", ok, f"mean |rate - a/lambda| = {mae:.4f} (<= 0.05), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_c2_wtse_oracle():
    rng = np.random.default_rng(2020)
    worst, tau0_exact = 0.0, True
    for _ in range(500):
        T = int(rng.integers(1, 17))
        c = int(rng.integers(1, 3))
        he, we = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        hs, ws = int(rng.integers(he, 4)), int(rng.integers(we, 4))
        tau = int(rng.integers(0, 3))
        z, x = random_train_pair(rng, T, c, he, we, hs - he, ws - we)
        worst = max(worst, float(np.max(np.abs(wtse(z, x, tau) - wtse_loops(z, x, tau)))))
        tau0_exact &= bool(np.array_equal(wtse(z, x, 0), tse(z, x)))
    ok = worst <= 1e-12 and tau0_exact
    record("C2", "windowed estimator vs loop oracle", ok, f"500 pairs, max |diff| = {worst:.2e} (<= 1e-12), tau=0 equals TSE exactly: {tau0_exact}")
    assert ok


def test_c3_worked_example():
    z = np.zeros((4, 1, 1, 1))
    x = np.zeros((4, 1, 1, 1))
    z[[0, 2]] = 1.0
    x[[1, 3]] = 1.0
    z, x = SpikeTensor(z), SpikeTensor(x)
    got = (pse(z, x).item(), tse(z, x).item(), wtse(z, x, 1).item(), hse(z, x, HseConfig(T=4, tau=1, bias=0.0)).item())
    ok = got == (4.0, 0.0, 1.0, 0.3125)
    record("C3", "worked example", ok, f"PSE, TSE, WTSE, HSE = {got} (want (4.0, 0.0, 1.0, 0.3125))")
    assert ok


def test_c4_two_status_invariants():
    rng = np.random.default_rng(44)
    sched = TwoStatus(p=5, alpha=math.inf, beta=0.5)
    unit = ConvSpec(np.ones((1, 1, 1, 1)), np.zeros(1))
    depressed_spikes, worst = 0, 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 61))
        currents = rng.uniform(0.0, 1.5, size=T)
        state = MembraneState.zeros((1, 1, 1), sched)
        emitted = 0.0
        for t in range(1, T + 1):
            mag, state = step_layer(state, unit, np.full((1, 1, 1), currents[t - 1]), sched, t)
            m = mag.item()
            emitted += m
            depressed_spikes += int(m > 0 and sched.depressed(t))
        worst = max(worst, abs(currents.sum() - emitted - state.v_mem.item()))
    ok = depressed_spikes == 0 and worst <= 1e-9
    record("C4", "two-status invariants", ok, f"1000 runs, spikes in depression = {depressed_spikes}, max conservation error = {worst:.1e} (<= 1e-9)")
    assert ok


def test_c5_threshold_schedules():
    ph = Phase(8)
    phase_ok = threshold_at(ph, 1) == 0.5 and threshold_at(ph, 8) == 2.0**-8
    T = 1000
    model = SnnModel([SpikingConv(ConvSpec(np.ones((1, 1, 1, 1)), np.zeros(1)))], (1, 1, 1))
    gaps = {}
    for c in (0.0, 0.25, 0.5, 1.0):
        out = run_network(model, np.full((1, 1, 1), c), SimConfig(T=T, schedule=Constant(1.0))).output
        gaps[c] = abs(firing_rate(out).item() - c)
    ok = phase_ok and all(g <= 1 / T for g in gaps.values())
    record("C5", "threshold schedules", ok, f"phase V(1)=0.5, V(8)=2^-8: {phase_ok}; max |rate - c| = {max(gaps.values()):.4f} (<= {1 / T})")
    assert ok


def test_c6_tracking_degradation(suite, ann_runs, toy_snn):
    start = time.perf_counter()
    cfg = RunConfig()
    snn_runs = [track(seq, toy_snn, cfg.tracker("snn")) for seq in suite]
    ann_err = float(np.mean([r.metrics.mean_center_error for r in ann_runs]))
    snn_err = float(np.mean([r.metrics.mean_center_error for r in snn_runs]))
    # Long-run agreement is measured with rate coding (constant threshold 1).
    long_cfg = cfg.tracker("snn", schedule="constant", T=1000)
    pearsons = []
    for seq, ref in zip(suite, ann_runs):
        pearsons += response_agreement(seq, ref, toy_snn, long_cfg)["pearson"]
    elapsed = time.perf_counter() - start
    ok = snn_err - ann_err <= 2.0 and min(pearsons) >= 0.95 and elapsed < 300
    record(
        "C6",
        "tracking degradation",
        ok,
        f"center error SNN {snn_err:.3f} vs ANN {ann_err:.3f} px (gap <= 2); "
        f"T=1000 min per-frame Pearson {min(pearsons):.4f} (>= 0.95); {elapsed:.0f} s (< 300 s)",
    )
    assert ok


def test_c7_latency_trend(suite, ann_runs, toy_snn):
    cfg = RunConfig()
    rates = {}
    for T in (5, 20, 100):
        tc = cfg.tracker("snn", T=T)
        rates[T] = float(np.mean([response_agreement(s, r, toy_snn, tc)["agreement_rate"] for s, r in zip(suite, ann_runs)]))
    seq = [rates[T] for T in (5, 20, 100)]
    drops = [a - b for a, b in zip(seq, seq[1:]) if b < a]
    ok = len(drops) <= 1 and all(d <= 0.02 for d in drops)
    record("C7", "latency trend", ok, "peak agreement " + ", ".join(f"T={T}: {v:.3f}" for T, v in rates.items()) + f"; inversions {drops}")
    assert ok


def test_c8_energy_arithmetic():
    r = estimate(3.94e8, 20)
    row = (f"{r.power_watts:.2E}", f"{r.wall_ms:g}", f"{r.energy_joules:.2E}")
    row_ok = row == ("9.85E-04", "20", "1.97E-05") and math.isclose(r.energy_joules, 1.97e-5, rel_tol=1e-15)
    off = {}
    for b in PUBLISHED_BASELINES:
        off[b.name] = abs(b.watts * b.ms / 1000 - b.joules) / b.joules
    bad = [name for name, e in off.items() if e > 0.005]
    ok = row_ok and not bad
    record(
        "C8",
        "energy arithmetic",
        ok,
        f"row {row} (want ('9.85E-04', '20', '1.97E-05')); baseline W*s vs J off by "
        + ", ".join(f"{k} {v:.2%}" for k, v in off.items())
        + f" (<= 0.5%); failing rows {bad}",
    )
    assert ok


def _run_all_commands(d):
    """Every subcommand once; returns the bytes of every file it wrote."""
    cmds = [
        ["init-toy", "--out", f"{d}/ann.json", "--calibration", f"{d}/calib", "--n", "4"],
        ["convert", "--ann", f"{d}/ann.json", "--calibration", f"{d}/calib", "--out", f"{d}/snn.json"],
        ["gen-sequence", "--out", f"{d}/seq", "--seed", "7", "--frames", "5"],
        ["track", "--ann", f"{d}/ann.json", "--sequence", f"{d}/seq", "--metrics", f"{d}/ann_metrics.json"],
        ["track", "--snn", f"{d}/snn.json", "--sequence", f"{d}/seq", "--metrics", f"{d}/snn_metrics.json",
         "--dump-response", f"{d}/resp", "--dump-spikes", f"{d}/spikes.txt", "--energy-report", f"{d}/energy.txt"],
        ["compare-coding", "--snn", f"{d}/snn.json", "--sequence", f"{d}/seq", "--schedules", "constant", "two_status",
         "phase", "burst", "--out", f"{d}/coding.json"],
        ["bench-energy", "--snn", f"{d}/snn.json", "--sequence", f"{d}/seq", "--json", f"{d}/bench.json"],
        ["dump-spikes", "--snn", f"{d}/snn.json", "--input", f"{d}/calib/0001.csv", "--out", f"{d}/dump.txt"],
    ]
    for cmd in cmds:
        assert main(cmd) == 0, cmd
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_c9_determinism(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = _run_all_commands(tmp_path / "a")
    out_a = capsys.readouterr().out
    second = _run_all_commands(tmp_path / "b")
    out_b = capsys.readouterr().out
    differing = sorted(k for k in first if first[k] != second.get(k))
    metrics = [k for k in first if k.endswith(".json")]
    for k in metrics:
        json.loads(first[k])
    ok = not differing and first.keys() == second.keys() and out_a == out_b
    record("C9", "determinism", ok, f"{len(first)} files ({len(metrics)} JSON) byte-identical across reruns; differing: {differing}")
    assert ok
