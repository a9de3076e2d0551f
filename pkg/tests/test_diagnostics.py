"""Limit-structure diagnostics: regimes, M0, partitions, cornerstone, ledger.

Test plan
---------
classify_regimes:  synthetic label patterns, component bookkeeping, frozen-
                   time flagging, shape validation, and the structure of an
                   actual rescaled run (elastic B head, then one A stretch)
eval_M0:           regime conventions, and the defect product D*Dstar as the
                   scalar minimum of the viscous quadratic over the
                   viscosity parameter
constants:         domain validation and closed-form cross-checks
node_curve:        bundles exactly the solver's node data
variations:        index validation and sign structure
cornerstone_check: pair/admissibility counts on a frozen partition, slack
                   nonnegativity, and sensitivity to an injected energy
                   corruption (the check must actually be able to fail)
mediesci:          degenerate profiles, validation, random profiles against
                   a brute-force re-check plus the termination bound
ledger:            global identity, interval taxonomy, sub-partition flags
"""

import numpy as np
import numpy.testing as npt
import pytest

import oracles
from bvsim.diagnostics import (
    THETA_STAB,
    classify_regimes,
    cornerstone_check,
    curvature_constant,
    eval_M0,
    lower_inequality_ledger,
    mediesci_inequality,
    mediesci_partition,
    node_curve,
    stability_constant,
    variations,
)
from bvsim.materials import W_curvature_bound, elastic_tensor_eigenvalues
from bvsim.reparam import arclength, rescale
from bvsim.solver import SolverOptions, run


@pytest.fixture(scope="module")
def tiny_bundle(tiny_model):
    traj = run(tiny_model, SolverOptions(tau=2e-2))
    return tiny_model, traj, node_curve(tiny_model, traj)


class TestClassifyRegimes:
    def test_synthetic_components(self):
        s = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        t = np.array([0.0, 0.5, 0.5, 0.5, 1.0])
        dstar = np.array([0.0, 1.0, 1.0, 1.0, 0.0])
        rep = classify_regimes(s, t, dstar, theta_stab=0.5)
        assert [c.kind for c in rep.components] == ["B", "A", "B"]
        a = rep.jump_components()[0]
        assert (a.lo, a.hi) == (1, 3)
        assert (a.s_lo, a.s_hi) == (1.0, 3.0)
        npt.assert_array_equal(rep.labels, [False, True, True, True, False])

    def test_frozen_time_flagging(self):
        s = np.arange(4.0)
        t = np.array([0.0, 0.1, 0.5, 0.6])
        dstar = np.array([0.0, 1.0, 1.0, 0.0])
        rep = classify_regimes(s, t, dstar, theta_stab=0.5, theta_frozen=0.1)
        bad = rep.frozen_violations()
        assert len(bad) == 1 and bad[0].t_drift == pytest.approx(0.4)
        rep2 = classify_regimes(s, t, dstar, theta_stab=0.5, theta_frozen=1.0)
        assert rep2.frozen_violations() == []

    def test_all_stable_single_component(self):
        n = 10
        rep = classify_regimes(np.arange(n), np.arange(n), np.zeros(n))
        assert len(rep.components) == 1
        c = rep.components[0]
        assert c.kind == "B" and c.lo == 0 and c.hi == n - 1
        assert rep.jump_components() == []

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="identical shapes"):
            classify_regimes(np.zeros(3), np.zeros(2), np.zeros(3))

    def test_rescaled_run_structure(self, tiny_bundle):
        # the scenario starts elastic (stable head) and then evolves; the
        # coarse run keeps a finite stability gap for the rest
        model, traj, _ = tiny_bundle
        rt = rescale(model, traj, n_samples=256)
        rep = classify_regimes(rt.s, rt.t, rt.Dstar)
        assert rep.components[0].kind == "B"
        assert len(rep.jump_components()) == 1


class TestEvalM0:
    def test_regime_conventions(self):
        # moving in real time while stable: rate-independent terms only
        assert eval_M0(0.5, 3.0, 0.0, 0.2, 0.3) == 0.5
        # moving in real time while unstable: incompatible with the limit
        assert eval_M0(0.5, 3.0, 1.0, 0.2, 0.3) == np.inf
        # instantaneous stretch: defect product on top
        npt.assert_allclose(eval_M0(0.0, 3.0, 2.0, 0.2, 0.3), 0.5 + 6.0)

    def test_defect_product_is_scalar_minimum(self):
        # min over lam > 0 of (lam/2) D^2 + Dstar^2/(2 lam) equals D * Dstar,
        # which is what the instantaneous branch charges
        rng = np.random.default_rng(3)
        lam = np.geomspace(1e-4, 1e4, 20001)
        for _ in range(25):
            D, Ds = rng.uniform(0.05, 5.0, size=2)
            grid_min = np.min(0.5 * lam * D**2 + Ds**2 / (2.0 * lam))
            val = eval_M0(0.0, D, Ds, 0.0, 0.0)
            # the log-grid quantizes the minimizer to ~5e-4 relative, which
            # enters the value quadratically
            npt.assert_allclose(val, grid_min, rtol=1e-6)
            assert val <= grid_min + 1e-12  # exact minimum lies below any grid


class TestConstants:
    def test_stability_constant_value(self, tiny_bundle):
        model = tiny_bundle[0]
        lo, hi = elastic_tensor_eigenvalues(model.params)
        npt.assert_allclose(stability_constant(model, 0.5), hi / (0.5 * lo), rtol=1e-14)
        npt.assert_allclose(stability_constant(model, 1.0), hi / lo, rtol=1e-14)

    def test_stability_constant_validation(self, tiny_bundle):
        model = tiny_bundle[0]
        for bad in (0.0, -0.3, 1.5):
            with pytest.raises(ValueError, match="m0"):
                stability_constant(model, bad)

    def test_curvature_constant_matches_bound(self, tiny_bundle):
        model = tiny_bundle[0]
        npt.assert_allclose(
            curvature_constant(model, 0.4),
            W_curvature_bound(model.params, 0.4),
            rtol=1e-14,
        )
        with pytest.raises(ValueError):
            curvature_constant(model, 0.0)


class TestNodeCurve:
    def test_bundles_exact_node_data(self, tiny_bundle):
        model, traj, curve = tiny_bundle
        assert curve.n_nodes == traj.n_nodes
        npt.assert_array_equal(curve.s, arclength(traj, model))
        npt.assert_array_equal(curve.t, traj.ts)
        npt.assert_array_equal(curve.E, traj.E)
        npt.assert_array_equal(curve.d_z, traj.d_z)
        npt.assert_allclose(curve.dstar, np.hypot(traj.d_z, traj.d_p), rtol=1e-15)
        k = curve.n_nodes // 2
        npt.assert_allclose(curve.phi[k], model.phi(traj.zs[k]), rtol=1e-14)
        st = curve.state(k)
        assert st.t == traj.ts[k]
        npt.assert_array_equal(st.z, traj.zs[k])

    def test_unstable_thresholding(self, tiny_bundle):
        _, _, curve = tiny_bundle
        npt.assert_array_equal(curve.unstable, curve.dstar > THETA_STAB)
        # the run genuinely has both regimes
        assert 0 < curve.unstable.sum() < curve.n_nodes


class TestVariations:
    def test_index_validation(self, tiny_bundle):
        _, _, curve = tiny_bundle
        K_W = curvature_constant(curve.model, 0.5)
        for i, j in ((3, 3), (5, 2), (-1, 4), (0, curve.n_nodes)):
            with pytest.raises(ValueError, match="n_nodes"):
                variations(curve, i, j, K_W)

    def test_sign_structure(self, tiny_bundle):
        _, _, curve = tiny_bundle
        m0 = float(min(z.min() for z in curve.zs))
        K_W = curvature_constant(curve.model, m0)
        rng = np.random.default_rng(11)
        for _ in range(20):
            i = int(rng.integers(0, curve.n_nodes - 1))
            j = int(rng.integers(i + 1, curve.n_nodes))
            v = variations(curve, i, j, K_W)
            assert v["HV"] >= 0.0
            assert v["RV"] >= 0.0
            # augmented release variation: nonnegative up to roundoff
            assert v["ARV"] >= -1e-12
            assert v["dz_inf"] >= 0.0 and v["dz_l1"] >= 0.0


class TestCornerstone:
    def test_partition_counts_and_slacks(self, tiny_bundle):
        _, _, curve = tiny_bundle
        recs = cornerstone_check(curve, n_partition=16)
        assert len(recs) == 120  # C(16, 2) ordered pairs
        adm = [r for r in recs if r["admissible"]]
        assert len(adm) == 72
        assert all(r["kind"] in ("BB", "AA", "mixed") for r in recs)
        slacks = np.array([r["slack"] for r in adm])
        assert slacks.min() >= -1e-12

    def test_detects_injected_energy_corruption(self, tiny_bundle):
        # bump the stored energy at one partition node: several admissible
        # pairs must now violate the estimate by about the injected amount
        model, traj, _ = tiny_bundle
        curve = node_curve(model, traj)
        curve.E = curve.E.copy()
        curve.E[27] += 0.05
        recs = cornerstone_check(curve, n_partition=16)
        bad = [r for r in recs if r["admissible"] and r["slack"] < -1e-2]
        assert len(bad) >= 1
        assert min(r["slack"] for r in bad) == pytest.approx(-0.05, abs=5e-3)


class TestMediesciPartition:
    def test_constant_profile(self):
        psi = np.full(40, 0.7)
        part = mediesci_partition(psi, eta=0.1)
        npt.assert_array_equal(part.indices, [0, 39])
        assert part.rounds == 1
        assert part.n_intervals == 1
        ok, worst = mediesci_inequality(psi, part)
        assert ok and worst >= 0.1 - 1e-15

    def test_single_sample(self):
        part = mediesci_partition(np.array([2.0]), eta=0.5)
        npt.assert_array_equal(part.indices, [0])
        assert part.rounds == 0

    def test_validation(self):
        with pytest.raises(ValueError, match="nonempty"):
            mediesci_partition(np.empty(0), eta=0.1)
        with pytest.raises(ValueError, match="nonempty"):
            mediesci_partition(np.zeros((3, 3)), eta=0.1)
        with pytest.raises(ValueError, match="finite"):
            mediesci_partition(np.array([1.0, np.inf]), eta=0.1)
        with pytest.raises(ValueError, match="positive"):
            mediesci_partition(np.ones(4), eta=0.0)

    def test_random_profiles_dominate_and_terminate(self):
        # the defining property at every interior sample, re-checked both by
        # the library and by a brute-force oracle, plus the round bound
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(5, 250))
            psi = rng.uniform(0.0, 1.0, size=n) * rng.uniform(0.5, 3.0)
            eta = float(rng.uniform(0.02, 0.4))
            part = mediesci_partition(psi, eta)
            ok, _ = mediesci_inequality(psi, part)
            assert ok
            assert oracles.mediesci_inequality_ok(
                psi, part.indices, eta * (1.0 + 1e-12) + 1e-12
            )
            assert part.indices[0] == 0 and part.indices[-1] == n - 1
            assert np.all(np.diff(part.indices) > 0)
            assert part.rounds <= max(psi[0], psi[-1]) / eta + 1.0


class TestLowerInequalityLedger:
    def test_global_inequality_and_identity(self, tiny_bundle):
        _, _, curve = tiny_bundle
        led = lower_inequality_ledger(curve, n_partition=16)
        assert led["ok"]
        assert led["slack"] >= 0.0
        npt.assert_allclose(led["rhs"] - led["lhs"], led["slack"], rtol=0, atol=0)
        lhs = led["F_WE"] + led["E_start"]
        rhs = (
            led["E_end"]
            + led["F_HV"]
            + led["R_total"]
            + led["slope_total"]
            + led["dd_int"]
            + led["eta_slack"]
            + led["F_REM"]
            + led["flank_total"]
        )
        npt.assert_allclose(led["lhs"], lhs, rtol=1e-14)
        npt.assert_allclose(led["rhs"], rhs, rtol=1e-14)

    def test_interval_taxonomy_and_subpartitions(self, tiny_bundle):
        _, _, curve = tiny_bundle
        led = lower_inequality_ledger(curve, n_partition=16)
        kinds = [r["kind"] for r in led["intervals"]]
        assert set(kinds) <= {"DIN1", "DIN2", "DIN3", "mixed"}
        assert kinds.count("DIN2") >= 1 and kinds.count("DIN1") >= 1
        # intervals tile the curve
        assert led["intervals"][0]["lo"] == 0
        assert led["intervals"][-1]["hi"] == curve.n_nodes - 1
        for a, b in zip(led["intervals"], led["intervals"][1:]):
            assert a["hi"] == b["lo"]
        # every sub-partitioned interval must certify its slope domination
        flags = [r["subpart_ok"] for r in led["intervals"] if "subpart_ok" in r]
        assert len(flags) >= 1 and all(flags)
        assert led["rem_bound_ok"]

    def test_eta_and_constants(self, tiny_bundle):
        _, _, curve = tiny_bundle
        led = lower_inequality_ledger(curve, n_partition=16)
        npt.assert_allclose(led["eta"], 0.05 * curve.dstar.max(), rtol=1e-14)
        cons = led["constants"]
        m0 = float(min(z.min() for z in curve.zs))
        npt.assert_allclose(cons["m0_observed"], m0, rtol=0)
        npt.assert_allclose(cons["K_C"], stability_constant(curve.model, m0), rtol=1e-14)
        npt.assert_allclose(cons["K_W"], curvature_constant(curve.model, m0), rtol=1e-14)
        assert cons["K_M"] > 0.0

    def test_single_node_core_interval(self, tiny_model):
        # tau = 1e-2 on the 4x4 mesh produces a mixed interval whose unstable
        # interior is one lone node; the reduction must fold it into the flank
        # instead of sub-partitioning a zero-length core
        traj = run(tiny_model, SolverOptions(tau=1e-2))
        curve = node_curve(tiny_model, traj)
        led = lower_inequality_ledger(curve, n_partition=16)
        singles = [
            r
            for r in led["intervals"]
            if "core" in r and r["core"][0] == r["core"][1]
        ]
        assert len(singles) >= 1
        for rec in singles:
            assert "sub_nodes" not in rec
            assert np.isfinite(rec["flank"])
        assert led["ok"]
