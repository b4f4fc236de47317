"""Smoke tests for the enkfmc extension module.

The heavy correctness checks live in the C++ suites; this only verifies that
the bindings are importable, shapes and dtypes come through, and a small
end-to-end run behaves.
"""

import numpy as np

import enkfmc


def test_integrate_shapes_and_start_column():
    x0 = np.full(40, 8.0)
    x0[0] += 0.01
    traj = enkfmc.integrate(x0, 5)
    assert traj.shape == (40, 6)
    assert np.array_equal(traj[:, 0], x0)
    # the unperturbed equilibrium stays put
    eq = enkfmc.integrate(np.full(40, 8.0), 3)
    assert np.max(np.abs(eq - 8.0)) < 1e-12


def test_estimate_precision_is_symmetric_positive_definite():
    rng = np.random.default_rng(7)
    members = rng.normal(size=(20, 50))
    binv = enkfmc.estimate_precision(members, zeta=2)
    assert binv.shape == (20, 20)
    assert np.max(np.abs(binv - binv.T)) < 1e-10
    assert np.linalg.eigvalsh(binv).min() > 0.0
    # zeta 0 keeps nothing but the diagonal
    diag_only = enkfmc.estimate_precision(members, zeta=0)
    assert np.max(np.abs(diag_only - np.diag(np.diag(diag_only)))) == 0.0


def test_analysis_formulations_agree():
    rng = np.random.default_rng(8)
    members = rng.normal(size=(12, 25)) + 3.0
    indices = [0, 3, 7, 10]
    y = members[indices, :].mean(axis=1) + 0.1
    r = np.full(len(indices), 0.2)
    out = {
        f: enkfmc.analyze_enkf_mc(members, y, indices, r, zeta=2, formulation=f, seed=5)
        for f in ("incremental", "primal", "dual")
    }
    assert out["incremental"].shape == (12, 25)
    scale = np.max(np.abs(out["incremental"]))
    for f in ("primal", "dual"):
        assert np.max(np.abs(out[f] - out["incremental"])) / scale < 1e-8


def test_letkf_and_schur_run():
    rng = np.random.default_rng(9)
    members = rng.normal(size=(10, 15)) + 1.0
    indices = [1, 4, 8]
    y = np.array([1.2, 0.8, 1.1])
    r = np.full(3, 0.3)
    letkf = enkfmc.analyze_letkf(members, y, indices, r, zeta=2, inflation=1.05)
    schur = enkfmc.analyze_enkf_schur(members, y, indices, r, zeta=2, seed=11)
    assert letkf.shape == members.shape
    assert schur.shape == members.shape
    # an analysis with observations moves the observed rows
    assert not np.array_equal(letkf[1], members[1])
    assert not np.array_equal(schur[1], members[1])


def test_run_experiment_improves_on_background_and_is_deterministic():
    result = enkfmc.run_experiment(enkfmc.default_config_text())
    bg = np.asarray(result["rmse_background"])
    an = np.asarray(result["rmse_analysis"])
    assert bg.shape == (30,) and an.shape == (30,)
    assert an.mean() < bg.mean()
    assert np.asarray(result["final_ensemble"]).shape == (40, 30)
    assert int(np.sum(result["rank_counts"])) == 30 * 40
    again = enkfmc.run_experiment(enkfmc.default_config_text())
    assert np.array_equal(an, np.asarray(again["rmse_analysis"]))


def test_rmse_helper():
    ref = np.array([[3.0], [4.0]])
    traj = np.zeros((2, 1))
    assert abs(enkfmc.rmse(ref, traj) - 5.0) < 1e-12


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
