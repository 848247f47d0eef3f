"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The full-scale
critical-value simulation (criterion 1) is built once and shared; expect a
few minutes of total runtime.
"""

import json
import math
import os

import numpy as np
import pytest

import lcmtest as lt
from lcmtest import cli
from lcmtest.streams import substream
from oracle_utils import eval_pl_exact, exact_hull_values, quad_gap_norm, step_hull_points

TWO_SEGMENT = lt.PiecewiseAffineCdf.from_knots([(0, 0), (0.5, 0.75), (1, 1)])

TARGET_QUANTILES = {
    (1.0, 0.01): 0.80, (1.0, 0.05): 0.65, (1.0, 0.10): 0.57,
    (2.0, 0.01): 0.91, (2.0, 0.05): 0.74, (2.0, 0.10): 0.66,
    (math.inf, 0.01): 1.68, (math.inf, 0.05): 1.43, (math.inf, 0.10): 1.30,
}
TABLE_TOL = 0.03

# Grid and replication floors from the criterion.  The sup-norm quantile's
# discretization bias grows with grid refinement, so the grid floor is the
# best admissible choice.  Known boundary issue: high-precision side runs
# (two independent 10^6-replication simulations) put the true grid-16384
# value of the (p=inf, alpha=0.01) cell at 1.710-1.711, i.e. 0.030-0.031
# above the published 1.68 (which matches a ~1k grid), so that one cell
# misses the +/-0.03 gate by ~1e-3 regardless of replication count.  The
# check is kept as stated rather than loosened.
TABLE_GRID = 16384
TABLE_REPS = 200_000


def _report(num: int, desc: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {desc}  {detail}")
    assert ok, f"criterion {num} failed: {desc}  {detail}"


@pytest.fixture(scope="session")
def full_table():
    workers = min(4, os.cpu_count() or 1)
    config = lt.SimConfig(
        grid_size=TABLE_GRID, replications=TABLE_REPS, master_seed=lt.DEFAULT_SEED
    )
    print(
        f"\nbuilding full-scale table: grid={TABLE_GRID}, reps={TABLE_REPS}, "
        f"workers={workers} (several minutes; ~0.7 ms/replication/core)"
    )
    return lt.build_critical_table(
        config, alphas=(0.01, 0.05, 0.10), ps=(1.0, 2.0, math.inf), workers=workers
    )


def test_criterion_1_table_reproduction(full_table):
    worst = 0.0
    rows = []
    for (p, alpha), target in TARGET_QUANTILES.items():
        got = full_table.lookup(p, alpha).quantile
        err = abs(got - target)
        worst = max(worst, err)
        rows.append(f"p={lt.p_key(p)},a={alpha:g}: {got:.4f} (target {target})")
    detail = f"max |error|={worst:.4f};  " + "; ".join(rows)
    if worst > TABLE_TOL:
        detail += (
            "  [note: independent 10^6-replication runs put the true grid-16384 "
            "(p=inf, a=0.01) quantile at 1.710-1.711; the published 1.68 matches a "
            "~1k grid, so this cell sits ~1e-3 past the gate at any replication "
            "count and the miss reflects discretization of the sup functional, "
            "not a computation error]"
        )
    _report(
        1,
        f"nine simulated quantiles within +/-{TABLE_TOL} of the published values",
        worst <= TABLE_TOL,
        detail,
    )


def test_criterion_2_rescaling_identity_pathwise():
    worst = 0.0
    for p in (1.0, 2.0, 3.0):
        for i in range(1000):
            gap = lt.verify_rescaling_identity(
                TWO_SEGMENT, p, substream(101, i), grid_size=256
            ).gap
            worst = max(worst, gap)
    _report(
        2,
        "interval-rescaling identity holds pathwise for p in {1,2,3} over 1000 paths",
        worst < 1e-9,
        f"max |lhs-rhs|={worst:.3e}",
    )


def test_criterion_3_dominance_coupling_pathwise():
    iv = lt.extract_intervals(TWO_SEGMENT)
    violations = 0
    worst_norm = -math.inf
    worst_hull = -math.inf
    for p in (1.0, 2.0):
        for i in range(10_000):
            check = lt.verify_dominance_coupling(iv, p, substream(202, i), grid_size=256)
            worst_norm = max(worst_norm, check.lhs - check.rhs)
            worst_hull = max(worst_hull, check.hull_excess)
            violations += check.violation
    _report(
        3,
        "dominance coupling: no norm violations and sub-hull <= full hull at "
        "every grid point, p in {1,2}, 10^4 paths",
        violations == 0 and worst_hull <= 1e-9,
        f"violations={violations}, max lhs-rhs={worst_norm:.3e}, max hull excess={worst_hull:.3e}",
    )


def test_criterion_4_stochastic_dominance_quantiles():
    reps = 20_000
    grid = 1024
    alphas = (0.01, 0.05, 0.10, 0.50)
    iv_two = lt.extract_intervals(TWO_SEGMENT)
    iv_unif = lt.extract_intervals(lt.UniformCdf())
    ok = True
    details = []
    for p in (1.0, 2.0):
        two = np.array(
            [lt.limit_draw_general(iv_two, p, substream(303, i), grid) for i in range(reps)]
        )
        unif = np.array(
            [lt.limit_draw_general(iv_unif, p, substream(404, i), grid) for i in range(reps)]
        )
        q_two = lt.estimate_quantiles(two, alphas)
        q_unif = lt.estimate_quantiles(unif, alphas)
        for a in alphas:
            slack = 2.0 * math.hypot(q_two[a].se, q_unif[a].se)
            excess = q_two[a].quantile - q_unif[a].quantile
            details.append(f"p={p:g},a={a:g}: excess={excess:+.4f} (allowed {slack:.4f})")
            if excess > slack:
                ok = False
    _report(
        4,
        "two-segment limit quantiles never exceed the uniform ones beyond "
        "2 combined MC standard errors",
        ok,
        "; ".join(details),
    )


def test_criterion_5_degenerate_limit_and_shrinking_statistic(rng):
    draw = lt.limit_draw_general(
        lt.extract_intervals(lt.PowerCdf(0.5)), 2.0, substream(505, 0), grid_size=256
    )
    spec = lt.PowerCdf(0.5)
    reps = 500
    small = np.array(
        [
            lt.lp_stat(lt.inverse_cdf_sample(spec, 100, substream(606, i)), 2.0).value
            for i in range(reps)
        ]
    )
    large = np.array(
        [
            lt.lp_stat(lt.inverse_cdf_sample(spec, 10_000, substream(707, i)), 2.0).value
            for i in range(reps)
        ]
    )
    med_small, med_large = float(np.median(small)), float(np.median(large))
    _report(
        5,
        "strictly concave CDF: limit draw is exactly 0 and the statistic's "
        "median shrinks from n=100 to n=10^4",
        draw == 0.0 and med_large < med_small,
        f"draw={draw!r}, median(n=100)={med_small:.4f}, median(n=10^4)={med_large:.4f}",
    )


def test_criterion_6_geometry_oracles(rng):
    cases = 1000
    hull_ok = True
    for case in range(cases):
        n = int(rng.integers(1, 51))
        f = lt.build_ecdf(rng.random(n))
        m = lt.lcm_of_step(f)
        px, py = step_hull_points(f.xs, f.vs)
        oracle = exact_hull_values(px, py)
        for x, want in zip(px, oracle):
            if eval_pl_exact(m.xs, m.ys, x) != want:
                hull_ok = False
                break
        if not hull_ok:
            break

    worst_rel = 0.0
    for case in range(cases):
        n = int(rng.integers(2, 51))
        f = lt.build_ecdf(rng.random(n))
        m = lt.lcm_of_step(f)
        d = lt.diff_segments(m, f, (0.0, float(f.xs[-1])))
        for p in (1.0, 2.0, 2.5, 3.0):
            want = quad_gap_norm(m.xs, m.ys, f.xs, f.vs, p)
            got = lt.lp_norm(d, p)
            if want > 0:
                worst_rel = max(worst_rel, abs(got - want) / want)
    _report(
        6,
        "hull equals the exact pointwise-chord oracle on 1000 random step "
        "functions; closed-form norms match adaptive quadrature to 1e-8 relative",
        hull_ok and worst_rel <= 1e-8,
        f"hull exact={hull_ok}, worst relative norm error={worst_rel:.2e}",
    )


def test_criterion_7_size_at_least_favorable_law(full_table, rng):
    crit = full_table.lookup(2.0, 0.05).quantile
    reps = 2000
    n = 10_000
    rej_unif = 0
    rej_power = 0
    for _ in range(reps):
        u = rng.random(n)
        rej_unif += lt.lp_stat(u, 2.0).value > crit
        rej_power += lt.lp_stat(u**2, 2.0).value > crit  # power(1/2) via inverse CDF
    rate_u = rej_unif / reps
    rate_p = rej_power / reps
    _report(
        7,
        "rejection rate at level 0.05: uniform data in [0.035, 0.065], "
        "strictly concave data at most 0.02 (n=10^4, 2000 repetitions)",
        0.035 <= rate_u <= 0.065 and rate_p <= 0.02,
        f"uniform rate={rate_u:.4f}, power(1/2) rate={rate_p:.4f}, critical={crit:.4f}",
    )


def test_criterion_8_affine_and_bridge_identities(rng):
    grid = lt.uniform_grid(256)
    exact = True
    for i in range(10_000):
        w = lt.sample_wiener(grid, substream(808, i))
        b = lt.to_bridge(w)
        for p in (1.0, 2.0, math.inf):
            if lt.gap_norm(w, p) != lt.gap_norm(b, p):
                exact = False
                break
        if not exact:
            break

    worst = 0.0
    for i in range(1000):
        theta = lt.sample_wiener(grid, substream(909, i)).values
        a0, a1 = rng.normal(size=2)
        shifted = theta + a0 + a1 * grid
        base_gap = lt.concavity_gap(lt.SampledPath(grid, theta))
        shift_gap = lt.concavity_gap(lt.SampledPath(grid, shifted))
        worst = max(worst, float(np.max(np.abs(shift_gap - base_gap))))
    _report(
        8,
        "gap norms of a Wiener path and its bridge agree exactly on 10^4 paths; "
        "adding an affine function leaves the gap unchanged at every grid point",
        exact and worst <= 1e-10,
        f"bridge identity exact={exact}, max affine-shift deviation={worst:.3e}",
    )


def test_criterion_9_counterexample_command(capsys):
    code = cli.main(["counterexample"])
    doc = json.loads(capsys.readouterr().out)
    ok = code == 0
    details = []
    for case in doc["cases"]:
        samples = case["sample"]
        f = lt.build_ecdf(samples)
        m = lt.lcm_of_step(f)
        px, py = step_hull_points(f.xs, f.vs)
        hull_y = [float(v) for v in exact_hull_values(px, py)]
        oracle = math.sqrt(len(samples)) * quad_gap_norm(px, hull_y, f.xs, f.vs, 2.0)
        err = abs(case["value"] - oracle)
        details.append(f"sample={samples}: value={case['value']:.10f}, |err vs oracle|={err:.2e}")
        if err > 1e-10:
            ok = False
    reported = [case["reported_rounded"] for case in doc["cases"]]
    documented = reported == [0.37, 0.29] and "0.408248" in doc["note"]
    _report(
        9,
        "counterexample command matches the independent quadrature oracle to "
        "1e-10 and documents the 0.37/0.29 discrepancy",
        ok and documented,
        "; ".join(details),
    )
