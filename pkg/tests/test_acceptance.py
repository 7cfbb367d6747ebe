"""The twelve acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (run with ``-s`` to
see them inline; they are also echoed in the terminal summary).
"""

import csv
import io
import os
import time
from statistics import fmean

import pytest

from conftest import chain_network, wire_chain
from rplsim.defense import DaoVerdict, DefenseConfig, DefenseMode, LiMsd
from rplsim.experiment import REPLAY_INTERVALS, Cell, matrix, run_cells, runs_rows
from rplsim.messages import GlobalPrefix, NodeAddress
from rplsim.metrics import pdr, plr
from rplsim.scenario import Scenario

REPS = 10
BASE = Scenario()
JOBS = max(1, min(os.cpu_count() or 1, 8))
RESULTS: dict[int, str] = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def static_runs():
    return run_cells(matrix(["static"]), BASE, reps=REPS, base_seed=BASE.base_seed, jobs=JOBS)


@pytest.fixture(scope="module")
def mobile_runs():
    return run_cells(matrix(["mobile"]), BASE, reps=REPS, base_seed=BASE.base_seed, jobs=JOBS)


def cell_values(records, cell: Cell, metric: str) -> list[float]:
    recs = sorted((r for r in records if r.cell == cell), key=lambda r: r.replication)
    assert len(recs) == REPS
    return [r.values[metric] for r in recs]


def mean_of(records, defense, mobility, interval, metric) -> float:
    return fmean(cell_values(records, Cell(defense, mobility, interval), metric))


def fmt(xs) -> str:
    return "[" + ", ".join(f"{x:.4f}" for x in xs) + "]"


def test_criterion_01_algorithm_exact_blacklisting():
    t0 = time.perf_counter()
    d = LiMsd(0, DefenseConfig(mode=DefenseMode.LIMSD, beta=10))
    child = NodeAddress(8)
    got = [d.on_dao(child, GlobalPrefix(8), 200.0 + i) for i in range(30)]
    expected = [DaoVerdict.FORWARD] * 10 + [DaoVerdict.BLACKLIST_AND_DISCARD] \
        + [DaoVerdict.DISCARD] * 19
    post = d.decisions[11:]
    scans_ok = all(x.comparisons == x.n_blacklist == len(d.blacklist) for x in post)
    elapsed = time.perf_counter() - t0
    ok = got == expected and scans_ok and elapsed < 1.0
    verdict(1, ok, f"forwarded {got.count(DaoVerdict.FORWARD)}, blacklisted at #"
                   f"{got.index(DaoVerdict.BLACKLIST_AND_DISCARD) + 1}, post-blacklist "
                   f"scans == |blacklist|: {scans_ok}, {elapsed * 1e3:.1f} ms")


def test_criterion_02_victim_node_differential():
    # root(0) <- A(1) <- B(2) <- C(3); C floods with 1 s replays
    blocked = {}
    elapsed = {}
    for mode in (DefenseMode.LIMSD, DefenseMode.SECRPL):
        t0 = time.perf_counter()
        net = chain_network([0, 1, 2, 3], defense=mode, attackers=[3], replay_interval=1.0)
        m = net.run()
        elapsed[mode] = time.perf_counter() - t0
        blocked[mode] = {t for _, _, t in m.blacklist_events}
    ok = (blocked[DefenseMode.LIMSD] == {3} and 2 in blocked[DefenseMode.SECRPL]
          and max(elapsed.values()) < 5.0)
    verdict(2, ok, f"Li-MSD blacklisted {sorted(blocked[DefenseMode.LIMSD])}, SecRPL blocked "
                   f"{sorted(blocked[DefenseMode.SECRPL])} (A=1, B=2, C=3), "
                   f"max {max(elapsed.values()):.2f} s")


def test_criterion_03_amplification_law():
    induced = {}
    for depth in range(2, 7):
        ids = list(range(depth + 1))
        net = chain_network(ids, tx_range=45.0)
        wire_chain(net, ids)
        net.nodes[depth].send_dao()
        net.sim.run_until(3.0)
        induced[depth] = net.metrics.control.get("dao_induced", 0)
    ok = all(induced[d] == d - 1 for d in induced)
    verdict(3, ok, f"induced DAOs by depth {induced}")


def test_criterion_04_attack_impact(static_runs):
    rpl = mean_of(static_runs, "rpl", "static", None, "pdr")
    ua = [mean_of(static_runs, "underattack", "static", ri, "pdr") for ri in REPLAY_INTERVALS]
    drop_ok = ua[0] < rpl - 0.10
    mono_ok = all(a <= b for a, b in zip(ua, ua[1:]))
    verdict(4, drop_ok and mono_ok,
            f"PDR RPL {rpl:.4f}, UnderAttack 1/2/4/8 s {fmt(ua)}; "
            f"drop at 1 s {100 * (rpl - ua[0]):.2f} pp (need > 10): {drop_ok}; "
            f"monotone: {mono_ok}")


def test_criterion_05_mitigation_band(static_runs):
    rpl = mean_of(static_runs, "rpl", "static", None, "pdr")
    lim = [mean_of(static_runs, "limsd", "static", ri, "pdr") for ri in REPLAY_INTERVALS]
    sec = [mean_of(static_runs, "secrpl", "static", ri, "pdr") for ri in REPLAY_INTERVALS]
    band = all(x >= 0.95 for x in lim)
    near = all(abs(rpl - x) <= 0.03 for x in lim)
    beats = all(a >= b for a, b in zip(lim, sec))
    verdict(5, band and near and beats,
            f"PDR RPL {rpl:.4f}, Li-MSD {fmt(lim)}, SecRPL {fmt(sec)}; >= 0.95: {band}; "
            f"within 3 pp of RPL: {near}; Li-MSD >= SecRPL: {beats}")


def test_criterion_06_delay(static_runs):
    lim = [mean_of(static_runs, "limsd", "static", ri, "ae2ed") for ri in REPLAY_INTERVALS]
    ua = [mean_of(static_runs, "underattack", "static", ri, "ae2ed") for ri in REPLAY_INTERVALS]
    order = all(a < b for a, b in zip(lim, ua))
    band = all(0.1 <= x <= 1.0 for x in lim)
    verdict(6, order and band,
            f"AE2ED s Li-MSD {fmt(lim)}, UnderAttack {fmt(ua)}; Li-MSD < UnderAttack: {order}; "
            f"Li-MSD within [0.1, 1.0] s: {band}")


def test_criterion_07_power(static_runs):
    rpl = cell_values(static_runs, Cell("rpl", "static"), "apc")
    rows = []
    ok = True
    for ri in REPLAY_INTERVALS:
        ua = cell_values(static_runs, Cell("underattack", "static", ri), "apc")
        lim = cell_values(static_runs, Cell("limsd", "static", ri), "apc")
        # matched seeds: replication r of every cell uses seed base + r
        per_seed = all(u > m >= r for u, m, r in zip(ua, lim, rpl))
        ok &= per_seed and fmean(ua) > fmean(lim) >= fmean(rpl)
        rows.append(f"{ri:g}s UA {fmean(ua):.4f} > LiMsd {fmean(lim):.4f} >= RPL {fmean(rpl):.4f}"
                    f" (every seed: {per_seed})")
    verdict(7, ok, "APC mW " + "; ".join(rows))


def test_criterion_08_fpr(static_runs, mobile_runs):
    static_zero = all(v == 0.0 for ri in REPLAY_INTERVALS
                      for v in cell_values(static_runs, Cell("limsd", "static", ri), "fpr"))
    rows = []
    order = True
    for runs, mob in ((static_runs, "static"), (mobile_runs, "mobile")):
        for ri in REPLAY_INTERVALS:
            lim = mean_of(runs, "limsd", mob, ri, "fpr")
            sec = mean_of(runs, "secrpl", mob, ri, "fpr")
            order &= lim <= sec
            rows.append(f"{mob} {ri:g}s {lim:.3f}/{sec:.3f}")
    verdict(8, static_zero and order,
            f"static Li-MSD FPR all zero: {static_zero}; Li-MSD <= SecRPL everywhere: {order}; "
            f"Li-MSD/SecRPL " + ", ".join(rows))


def test_criterion_09_mobile_direction(mobile_runs):
    lim = [mean_of(mobile_runs, "limsd", "mobile", ri, "pdr") for ri in REPLAY_INTERVALS]
    ua = [mean_of(mobile_runs, "underattack", "mobile", ri, "pdr") for ri in REPLAY_INTERVALS]
    ok = all(a > b for a, b in zip(lim, ua))
    verdict(9, ok, f"mobile PDR Li-MSD {fmt(lim)} vs UnderAttack {fmt(ua)}")


def test_criterion_10_work_bound(static_runs, mobile_runs):
    node_max = BASE.effective_node_max
    sweep_ok = True
    for t_child in range(1, node_max + 1):
        d = LiMsd(0, DefenseConfig(mode=DefenseMode.LIMSD, beta=3, node_max=node_max))
        for rnd in range(5):
            for s in range(1, t_child + 1):
                for prefix in (s, 99):
                    d.on_dao(NodeAddress(s), GlobalPrefix(prefix), 200.0 + rnd)
                    sweep_ok &= d.last_comparisons <= d.n_blacklist + d.t_child
    runs = [r for r in (*static_runs, *mobile_runs) if r.cell.defense == "limsd"]
    violations = sum(r.metrics.defense_work_violations for r in runs)
    verdict(10, sweep_ok and violations == 0,
            f"sweep T_child 1..{node_max} within bound: {sweep_ok}; violations over "
            f"{len(runs)} matrix runs: {violations}")


def _csv_bytes(records) -> bytes:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(runs_rows(records))
    return buf.getvalue().encode()


def test_criterion_11_determinism(static_runs, mobile_runs):
    same = {}
    for runs, cell in ((static_runs, Cell("limsd", "static", 1.0)),
                       (mobile_runs, Cell("secrpl", "mobile", 2.0))):
        first = [r for r in runs if r.cell == cell]
        again = run_cells([cell], BASE, reps=REPS, base_seed=BASE.base_seed, jobs=JOBS)
        same[cell.label] = _csv_bytes(first) == _csv_bytes(again)
    verdict(11, all(same.values()), f"byte-identical runs.csv rows on re-run: {same}")


def test_criterion_12_conservation(static_runs, mobile_runs):
    runs = [*static_runs, *mobile_runs]
    ratio = all(pdr(r.metrics) + plr(r.metrics) == 1.0 for r in runs)
    energy = all(led.total_us() == r.metrics.duration_us
                 for r in runs for led in r.metrics.energy.values())
    tally = all(s == d + x for r in runs for s, d, x in r.metrics.tally.values())
    verdict(12, ratio and energy and tally,
            f"{len(runs)} runs: PDR+PLR=1 {ratio}; energy partition {energy}; "
            f"sent=delivered+dropped {tally}")
