"""Acceptance suite: one pass/fail line per criterion.

Run with ``pytest -m acceptance -s tests/test_acceptance.py`` (or plain
``python tests/test_acceptance.py``). Each test prints its verdict line even
when the assertion fails, then asserts.
"""
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from divfid import bounds, config
from divfid.bounds import DimensionHypothesis
from divfid.channel import SystemConfig, eigen_tail_probability
from divfid.cli import _mapping, main, plan_simulate
from divfid.dimension import cloud_dimension, dyadic_sigmas, effective_dimension, synthetic_cloud
from divfid.mapping import MappingDescriptor

pytestmark = pytest.mark.acceptance

THREADS = 4
SIGMAS = dyadic_sigmas(4, 11)
PRESETS = ("siso_linear", "siso_spiral", "siso_hybrid", "mimo_linear")


def report(capsys, number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    with capsys.disabled():
        print("\n" + line)
    return ok


@pytest.fixture(scope="module")
def preset_runs():
    """Exponent documents per simulate preset, computed once."""
    runs = {}
    for name in PRESETS:
        rc = config.resolve("simulate", {}, {"preset": name})
        t0 = time.perf_counter()
        _, build = plan_simulate(rc, THREADS)
        doc = build()["exponents.json"][1]
        runs[name] = (rc, doc, time.perf_counter() - t0)
    return runs


# 1 ---------------------------------------------------------------------------

def test_c1_figure1_closed_form(capsys):
    t0 = time.perf_counter()
    curves = {c.label: c for c in bounds.figure1_curves()}
    opt = dict(curves["optimal"].points)
    anchors = {0: 16, 3: 9, 6: 4, 9: 1, 12: 0}
    ok = all(opt[Fraction(f)] == d for f, d in anchors.items())
    ok &= all(not flag for (f, _), flag in zip(curves["optimal"].points, curves["optimal"].interpolated)
              if f.denominator == 1 and f % 3 == 0)
    worst = 0.0
    for b in (1, 2, 3, 4):
        pts = curves[f"thm1 beta={b}"].points
        want = [(0, (5 - b) ** 2), (3 * b, 0)]
        got = [pts[0], pts[-1]]
        worst = max(worst, max(abs(float(g[i]) - w[i]) for g, w in zip(got, want) for i in (0, 1)))
    elapsed = time.perf_counter() - t0
    ok &= worst <= 1e-12 and elapsed < 1.0
    assert report(capsys, 1, ok, f"Figure-1 anchors exact, max endpoint error {worst:.1e}, {elapsed:.3f}s (< 1s)")


# 2 ---------------------------------------------------------------------------

def test_c2_corollary_gap(capsys):
    t0 = time.perf_counter()
    cfg = bounds.figure1_config()
    best = None
    for beta in [Fraction(k, 2) for k in range(1, 9)]:
        hyp = DimensionHypothesis.fixed(beta)
        g = bounds.corollary_gap(cfg, hyp, bounds.interior_grid(cfg, hyp, Fraction(1, 4)))
        if best is None or g.gap < best[0]:
            best = (g.gap, beta, g.f)
    elapsed = time.perf_counter() - t0
    gap, beta, f = best
    ok = gap > 0 and elapsed < 1.0
    assert report(
        capsys, 2, ok,
        f"min gap d*(f) - bound = {float(gap):.6g} at beta={beta}, f={f} (needs > 0), {elapsed:.3f}s",
    )


# 3 ---------------------------------------------------------------------------

def test_c3_dimension_calibration(capsys):
    t0 = time.perf_counter()
    n = 10**6
    checks = []
    for name, target, tol in (("segment", 1.0, 0.05), ("square", 2.0, 0.1)):
        est = cloud_dimension(synthetic_cloud(name, n, seed=31), 1.0, SIGMAS, threads=THREADS)
        checks.append((name, est.slope, target, tol))
    est = effective_dimension(MappingDescriptor.spiral(4.0), 1.0, SIGMAS, n, seed=32, threads=THREADS)
    checks.append(("spiral", est.slope, 1.0, 0.15))
    mix = synthetic_cloud("mixture", n, seed=33)
    checks.append(("mixture c=0.9", cloud_dimension(mix, 0.9, SIGMAS, threads=THREADS).slope, 0.0, 0.05))
    checks.append(("mixture c=0.99", cloud_dimension(mix, 0.99, SIGMAS, threads=THREADS).slope, 1.0, 0.15))
    elapsed = time.perf_counter() - t0
    ok = all(abs(s - t) <= tol for _, s, t, tol in checks) and elapsed < 120
    detail = ", ".join(f"{name} {s:.3f} ({t}±{tol})" for name, s, t, tol in checks)
    assert report(capsys, 3, ok, f"{detail}; {elapsed:.1f}s (< 120s)")


# 4 ---------------------------------------------------------------------------

def test_c4_siso_line(capsys, preset_runs):
    rc, doc, elapsed = preset_runs["siso_linear"]
    assert len(rc["snr_grid"]) == 8 and rc["n_channels"] == 10**5
    d = {e["f"]: e["slope"] for e in doc["exponents"]}
    ok = 0.85 <= d[0.0] <= 1.15 and 0.35 <= d[0.5] <= 0.65 and d[1.2] <= 0.2 and elapsed < 300
    assert report(
        capsys, 4, ok,
        f"d(0)={d[0.0]:.3f} [0.85,1.15], d(0.5)={d[0.5]:.3f} [0.35,0.65], d(1.2)={d[1.2]:.3f} (<= 0.2); {elapsed:.1f}s",
    )


# 5 ---------------------------------------------------------------------------

def test_c5_eigen_tail(capsys):
    t0 = time.perf_counter()
    snrs = list(np.logspace(2, 4, 5))
    slopes = {}
    for nt, beta in ((1, 1), (2, 2)):
        cfg = SystemConfig(nt, nt, snr_grid=snrs, master_seed=51)
        k = nt - beta + 1
        slopes[f"{nt}x{nt}"] = eigen_tail_probability(cfg, k, n_draws=10**6, threads=THREADS).fit().slope
    elapsed = time.perf_counter() - t0
    ok = all(0.8 <= s <= 1.2 for s in slopes.values()) and elapsed < 300
    detail = ", ".join(f"{k} slope {s:.3f}" for k, s in slopes.items())
    assert report(capsys, 5, ok, f"{detail} (in [0.8, 1.2]); {elapsed:.1f}s")


# 6 ---------------------------------------------------------------------------

def test_c6_thm1_inequality(capsys, preset_runs):
    lines, ok = [], True
    for name in PRESETS:
        rc, doc, _ = preset_runs[name]
        mp = _mapping(rc)
        cfg = SystemConfig(rc["nt"], rc["nr"], rc["m"], rc["n"])
        beta_hat = effective_dimension(mp, 0.9, SIGMAS, 10**6, seed=61, threads=THREADS).beta_hat
        hyp = DimensionHypothesis.fixed(Fraction(beta_hat))
        ceiling = float(bounds.thm2_fidelity_ceiling(cfg.eta, hyp.beta))
        for e in doc["exponents"]:
            f = e["f"]
            # beyond the fidelity ceiling no mapping has positive diversity
            bound = float(bounds.thm1_upper(cfg, hyp, f)) if f <= ceiling else 0.0
            good = e["slope"] <= bound + 2 * e["stderr"]
            ok &= good
            lines.append(f"{name} f={f}: {e['slope']:.3f} <= {bound:.3f}+2*{e['stderr']:.3f}"
                         + ("" if good else " VIOLATED"))
    assert report(capsys, 6, ok, "; ".join(lines))


# 7 ---------------------------------------------------------------------------

RUNS_7 = {
    "simulate": ["simulate", "--kind", "spiral", "--stretch", "2", "--f_grid", "0,0.5",
                 "--snr_grid", "10,100", "--n_channels", "1200", "--grid_step", "0.002",
                 "--threshold_scale", "0.04", "--seed", "71"],
    "dimension": ["dimension", "--preset", "mixture", "--n_samples", "300000", "--seed", "72"],
    "eigen": ["eigen", "--n_draws", "200000", "--seed", "73"],
}


def test_c7_determinism(capsys, tmp_path):
    same = {}
    for name, argv in RUNS_7.items():
        outputs = []
        for threads in (1, 4, 16):
            d = tmp_path / f"{name}-{threads}"
            code = main(argv + ["--threads", str(threads), "--out", str(d)])
            assert code in (0, 3)
            outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        # the manifest re-runs to the same bytes
        d = tmp_path / f"{name}-manifest"
        main([name, "--config", str(tmp_path / f"{name}-1" / "manifest.json"), "--out", str(d)])
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        same[name] = all(o == outputs[0] for o in outputs)
    ok = all(same.values())
    assert report(capsys, 7, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
                  + " across threads {1,4,16} and manifest rerun")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
