"""End-to-end acceptance experiments, one test (or parametrized group) per criterion.

Each test records its criterion number and a one-line measurement; the
conftest prints a pass/fail line per criterion after the run.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from smooth import Smooth
from youngfbm.catalog import coefficient_field
from youngfbm.cli import run
from youngfbm.fbm import FbmSpec, covariance_matrix, kernel_constant, sample_path, sample_paths
from youngfbm.gauss import DeterministicIntegrand, qf
from youngfbm.holder import GridPath, estimate_holder_exponent
from youngfbm.mc import BOUND_STATISTIC, ExperimentSpec, dominance_report, resolution_stability
from youngfbm.sde import default_config, solve
from youngfbm.young import HolderData, level_terms, young_integrate

pytestmark = pytest.mark.slow


@pytest.fixture
def criterion(record_property):
    """``criterion(n, detail)`` tags the test and prints the measurement."""
    def tag(number, detail):
        record_property("criterion", number)
        record_property("detail", detail)
        print(f"criterion {number}: {detail}")
    return tag


def grid(func, level):
    return GridPath.from_function(func, 0.0, 1.0, level)


# ---- dyadic integral --------------------------------------------------------

def test_criterion_01_dyadic_sum_against_quadrature(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = -math.inf
    ok = 0
    for _ in range(25):
        f, g = Smooth(rng), Smooth(rng)
        oracle, _ = integrate.quad(lambda t: f(t) * g.deriv(t), 0, 1, epsabs=1e-13, limit=200)
        res = young_integrate(grid(f, 16), grid(g, 16), 0.0, 1.0, depth=16,
                              holder=HolderData(1.0, f.lipschitz(), 1.0, g.lipschitz()))
        slack = abs(res.value - oracle) - (res.truncation_bound + 1e-8)
        worst = max(worst, slack)
        ok += slack <= 0
    elapsed = time.perf_counter() - start
    criterion(1, f"{ok}/25 within bound + 1e-8 (worst slack {worst:.2e}), {elapsed:.1f} s")
    assert ok == 25
    assert elapsed < 10


@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_criterion_02_level_terms_decay_geometrically(criterion, alpha):
    spec = FbmSpec(alpha, 1.0, 16, 202)
    mags, exps = [], []
    for i in range(20):
        g = sample_path(spec, i)
        exps.append(estimate_holder_exponent(g))
        mags.append([abs(float(np.sum(t))) for t in level_terms(g, g, 0, g.n_cells, 16)])
    mean = np.mean(mags, axis=0)
    ks = np.arange(4, 17)
    rate = -np.polyfit(ks, np.log2(mean[ks - 1]), 1)[0]
    expected = 2 * float(np.mean(exps)) - 1
    criterion(2, f"alpha={alpha}: fitted rate {rate:.3f} vs beta+gamma-1 = {expected:.3f}")
    assert abs(rate - expected) <= 0.1


def test_criterion_03_midpoint_additivity(criterion):
    rng = np.random.default_rng(303)
    ok = 0
    for _ in range(100):
        f, g = Smooth(rng), Smooth(rng)
        fp, gp = grid(f, 10), grid(g, 10)
        holder = HolderData(1.0, f.lipschitz(), 1.0, g.lipschitz())
        k = int(rng.integers(2, 11))
        width = 2**k
        i_s = int(rng.integers(0, 1024 // width)) * width
        s, m, t = i_s / 1024, (i_s + width // 2) / 1024, (i_s + width) / 1024
        d1, d2, d3 = (int(v) for v in rng.integers(0, k, 3))
        whole = young_integrate(fp, gp, s, t, depth=d1, holder=holder)
        left = young_integrate(fp, gp, s, m, depth=min(d2, k - 1), holder=holder)
        right = young_integrate(fp, gp, m, t, depth=min(d3, k - 1), holder=holder)
        defect = abs(left.value + right.value - whole.value)
        ok += defect <= whole.truncation_bound + left.truncation_bound + right.truncation_bound
    criterion(3, f"{ok}/100 cases within the three truncation bounds")
    assert ok == 100


def test_criterion_04_chain_rule_on_fbm(criterion):
    start = time.perf_counter()
    spec = FbmSpec(0.7, 1.0, 14, 2024)
    rel = []
    for i in range(50):
        g = sample_path(spec, i)
        integral = young_integrate(g, g, 0.0, 1.0).value
        defect = abs(g.values[-1] ** 2 - g.values[0] ** 2 - 2 * integral)
        rel.append(defect / float(np.max(np.abs(g.values))) ** 2)
    elapsed = time.perf_counter() - start
    ok = int(np.sum(np.array(rel) <= 1e-2))
    criterion(4, f"{ok}/50 paths with relative defect <= 1e-2 (need 48; "
                 f"median {np.median(rel):.2e}, worst {max(rel):.2e}), {elapsed:.1f} s")
    assert elapsed < 60
    assert ok >= 48


# ---- fBm sampler ------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_criterion_05_sampler_moments(criterion, alpha):
    n, level = 10_000, 8
    start = time.perf_counter()
    x = sample_paths(FbmSpec(alpha, 1.0, level, 505), n)
    emp = x.T @ x / n
    elapsed = time.perf_counter() - start
    cov = covariance_matrix(alpha, np.linspace(0, 1, 2**level + 1))
    d = np.diag(cov)
    se = np.sqrt((np.outer(d, d) + cov**2) / n)
    mask = se > 0
    z = np.abs(emp - cov)[mask] / se[mask]
    var_z = abs(np.mean(x[:, -1] ** 2) - 2 * kernel_constant(alpha)) / (
        2 * kernel_constant(alpha) * math.sqrt(2 / n))
    criterion(5, f"alpha={alpha}: max entry deviation {z.max():.2f} SE (limit 4), "
                 f"Var xi(1) off by {var_z:.2f} SE (limit 3), {elapsed:.1f} s")
    assert z.max() <= 4
    assert var_z <= 3
    assert elapsed < 60


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_criterion_06_holder_exponent(criterion, alpha):
    spec = FbmSpec(alpha, 1.0, 14, 606)
    est = np.mean([estimate_holder_exponent(sample_path(spec, i)) for i in range(100)])
    target = (1 + alpha) / 2
    criterion(6, f"alpha={alpha}: mean estimate {est:.4f} vs {target:.2f} (tol 0.07)")
    assert abs(est - target) <= 0.07


# ---- SDE solver -------------------------------------------------------------

LINEAR_NOISE = coefficient_field("constant:c=0", "linear:a=1")
A0, SIGMA0, X0_VOC = 0.8, 0.3, 5.0
AFFINE_DRIFT = coefficient_field(f"linear:a={A0}", f"constant:c={SIGMA0}")


@pytest.fixture(scope="module")
def sde_runs():
    spec = FbmSpec(0.7, 1.0, 14, 707)
    config = default_config(0.7)
    runs = []
    for i in range(20):
        g = sample_path(spec, i)
        runs.append({
            "g": g,
            "linear": solve(1.0, 1.0, LINEAR_NOISE, g, config),
            "ramp": solve(1.0, 1.0, LINEAR_NOISE, g, config, init="ramp"),
            "affine": solve(X0_VOC, 1.0, AFFINE_DRIFT, g, config),
        })
    return runs


def test_criterion_07_sde_exact_solutions(criterion, sde_runs):
    lin, voc = [], []
    for r in sde_runs:
        g = r["g"]
        exact = math.exp(g.values[-1] - g.values[0])
        lin.append(abs(r["linear"].path.values[-1] - exact) / exact)
        weight = grid(lambda t: np.exp(-A0 * t), g.level)
        exact = math.exp(A0) * (X0_VOC + SIGMA0 * young_integrate(weight, g, 0.0, 1.0).value)
        voc.append(abs(r["affine"].path.values[-1] - exact) / abs(exact))
    criterion(7, f"sigma=x worst rel error {max(lin):.2e}, "
                 f"variation of constants worst {max(voc):.2e} (tol 1e-2, 20 drivers)")
    assert max(lin) <= 1e-2
    assert max(voc) <= 1e-2


def test_criterion_08_contraction_certificate(criterion, sde_runs):
    checked = violations = 0
    for r in sde_runs:
        for sol in (r["linear"], r["affine"]):
            for st in sol.steps:
                if math.isnan(st.contraction):
                    continue
                checked += 1
                violations += st.contraction > st.lam
    criterion(8, f"{checked} steps with a measured ratio, {violations} above the coefficient")
    assert checked > 0
    assert violations == 0


def test_criterion_09_uniqueness(criterion, sde_runs):
    tol = default_config(0.7).picard_tol
    gaps = [float(np.max(np.abs(r["linear"].path.values - r["ramp"].path.values)))
            for r in sde_runs]
    criterion(9, f"largest gap between starts {max(gaps):.2e} (limit {2 * tol:.0e}, 20 drivers)")
    assert max(gaps) <= 2 * tol


# ---- q_f --------------------------------------------------------------------

def test_criterion_10_qf_closed_form(criterion):
    rng = np.random.default_rng(1010)
    one = DeterministicIntegrand(lambda t: np.ones_like(t))
    errs = []
    for _ in range(20):
        s, t = np.sort(rng.uniform(0, 1, 2))
        alpha = float(rng.uniform(0.05, 0.95))
        exact = 2 * kernel_constant(alpha) * (t - s) ** (1 + alpha)
        errs.append(abs(qf(one, s, t, alpha) - exact) / exact)
    criterion(10, f"worst relative error {max(errs):.2e} over 20 cases (tol 1e-6)")
    assert max(errs) <= 1e-6


# ---- Monte Carlo dominance --------------------------------------------------

SLEPIAN = ExperimentSpec("driver-max", 0.5, 10, 10**5, 1111, (1.5, 2.0, 2.5, 3.0),
                         bound={"r": 1.0})
FERNIQUE = ExperimentSpec("driver-max", 0.5, 10, 10**5, 1111, (2.5, 3.0, 4.0),
                          bound={"m": 2})
SERIES = ExperimentSpec("state-dependent-integrand", 0.7, 12, 10**4, 1313, (3.0, 5.0),
                        integrand="affine:c0=1,cx=0.1", normalization="rescaled",
                        bound={"gamma": 0.75})
EXPERIMENTS = {"slepian": SLEPIAN, "fernique": FERNIQUE, "maxf": SERIES}


@pytest.fixture(scope="module")
def reports():
    out = {}
    for kind, spec in EXPERIMENTS.items():
        start = time.perf_counter()
        out[kind] = (dominance_report(spec, kind), time.perf_counter() - start)
    return out


def describe(report):
    return ", ".join(f"lam={lam:g}: {a:.3g} vs {ci:.3g}"
                     for lam, a, ci in zip(report.lambdas, report.analytic, report.ci_upper))


def test_criterion_11_slepian_dominance(criterion, reports):
    rep, elapsed = reports["slepian"]
    criterion(11, f"bound vs CI upper {describe(rep)}; {elapsed:.1f} s")
    assert rep.verdict == ["pass"] * 4
    assert elapsed < 300


def test_criterion_12_fernique_dominance(criterion, reports):
    rep, _ = reports["fernique"]
    criterion(12, f"bound vs CI upper {describe(rep)}")
    assert rep.verdict == ["pass"] * 3


def test_criterion_13_series_bound_dominance(criterion, reports):
    rep, _ = reports["maxf"]
    criterion(13, f"rescaled drivers, bound vs CI upper {describe(rep)}")
    assert rep.verdict == ["pass"] * 2


@pytest.mark.parametrize("kind", ["slepian", "fernique", "maxf"])
def test_criterion_14_resolution_stability(criterion, kind):
    spec = EXPERIMENTS[kind]
    res = resolution_stability(spec, BOUND_STATISTIC[kind], delta_level=2)
    changes = ", ".join(f"{c:.3%}" for c in res["rel_change"])
    criterion(14, f"{kind} level {res['levels'][0]}->{res['levels'][1]}: {changes}")
    assert res["max_rel_change"] < 0.2


def test_criterion_15_determinism(criterion, reports, tmp_path):
    same = {kind: dominance_report(spec, kind).to_json() == reports[kind][0].to_json()
            for kind, spec in EXPERIMENTS.items()}

    def artifacts(tag):
        d = tmp_path / tag
        d.mkdir()
        g = d / "g.csv"
        assert run(["fbm-sample", "--alpha", "0.7", "--level", "13", "--seed", "15",
                    "--out", str(g)]) == 0
        assert run(["solve", "--g", str(g), "--alpha", "0.7", "--x0", "1",
                    "--sigma", "linear:a=1", "--out", str(d / "x.csv")]) == 0
        spec = d / "exp.json"
        spec.write_text(json.dumps({**SLEPIAN.to_dict(), "n_paths": 2000, "level": 8,
                                    "bound_kind": "slepian"}))
        assert run(["mc-validate", "--spec", str(spec)]) == 0
        return {p.name: p.read_bytes().replace(str(d).encode(), b"<dir>")
                for p in sorted(d.iterdir())}

    first, second = artifacts("a"), artifacts("b")
    same["cli"] = first == second
    criterion(15, "byte-identical reruns: " + ", ".join(f"{k} {'yes' if v else 'NO'}"
                                                       for k, v in same.items()))
    assert all(same.values())
