"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The desk-scale inversion
and the multimodal comparison are the slow entries (minutes); everything
else finishes in seconds.
"""

import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from gwlatent import diagnostics, esmda, fields, flowsim, varinv
from gwlatent import generator as gl

SIGMA = 0.02
BC = flowsim.BoundarySpec(0.0, -10.0)


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# --- flow solver -------------------------------------------------------------

def test_flow_solver_analytic_profile():
    grid = flowsim.PAPER_GRID
    t0 = time.perf_counter()
    heads = flowsim.solve_steady_heads(np.ones(grid.shape), grid, BC, flowsim.SourceSpec())
    dt = time.perf_counter() - t0
    expected = BC.west_head + (BC.east_head - BC.west_head) * np.arange(96) / 95.0
    dev = np.abs(heads - expected[None, :]).max()
    _report("flow-analytic", dev <= 1e-8 and dt < 1.0,
            f"max deviation {dev:.2e} m, solve {dt*1e3:.0f} ms")


def test_flow_mass_balance_50_fields():
    grid = flowsim.PAPER_GRID
    worst_cell, worst_global = 0.0, 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        K = 10.0 ** rng.uniform(-1, 1, grid.shape)
        if seed % 2 == 0:
            src = flowsim.SourceSpec()
        else:
            src = flowsim.SourceSpec(recharge=0.001, wells=((48, 48, -50.0),))
        heads = flowsim.solve_steady_heads(K, grid, BC, src)
        bal = flowsim.cell_balance(K, grid, BC, src, heads)
        worst_cell = max(worst_cell,
                         np.abs(bal["interior_net"]).max() / bal["max_face_flux"])
        # over the interior: west inflow + sources = east outflow
        scale = max(abs(bal["west_inflow"]), abs(bal["east_outflow"]),
                    abs(bal["source_total"]), 1e-300)
        worst_global = max(
            worst_global,
            abs(bal["east_outflow"] - bal["west_inflow"] - bal["source_total"]) / scale,
        )
    _report("flow-mass-balance", worst_cell <= 1e-8 and worst_global <= 1e-6,
            f"worst cell residual {worst_cell:.2e}, worst global {worst_global:.2e}")


# --- ES-MDA core -------------------------------------------------------------

def test_linear_gaussian_oracle():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((20, 10))
    z_true = rng.standard_normal(10)
    sigma = 0.1
    d_obs = A @ z_true + rng.normal(0, sigma, 20)
    model = esmda.ObservationModel.from_sigma(d_obs, sigma)
    # brute-force oracle: direct Gaussian conditioning for prior z ~ N(0, I)
    S = A @ A.T + np.diag(model.error_var)
    gain = A.T @ np.linalg.inv(S)
    mean_true = gain @ d_obs
    var_true = np.diag(np.eye(10) - gain @ A)

    t0 = time.perf_counter()
    rec = esmda.run_esmda(lambda K: A @ K, lambda z: z, 10, model,
                          n_a=8, n_real=5000, seed=1)
    dt = time.perf_counter() - t0
    Z = rec.ensembles[-1]
    mean_rel = (np.abs(Z.mean(axis=1) - mean_true) / np.abs(mean_true)).max()
    var_rel = (np.abs(Z.var(axis=1, ddof=1) - var_true) / var_true).max()
    _report("linear-gaussian-oracle",
            mean_rel <= 0.05 and var_rel <= 0.10 and dt < 30.0,
            f"mean within {mean_rel:.1%}, variance within {var_rel:.1%}, {dt:.1f} s")


def test_truncation_rule():
    out = esmda.truncated_pseudo_inverse(np.diag([4.0, 1.0, 1e-12]),
                                         esmda.TruncationPolicy(energy=0.99))
    exact = np.allclose(out, np.diag([0.25, 0.0, 0.0]), atol=1e-15)

    rng = np.random.default_rng(3)
    B = rng.standard_normal((5, 5))
    M = B @ B.T + 5.0 * np.eye(5)
    full = esmda.truncated_pseudo_inverse(M, esmda.TruncationPolicy(energy=1.0))
    inv_dev = np.abs(full - np.linalg.inv(M)).max()
    _report("truncation-rule", exact and inv_dev <= 1e-10,
            f"diag case exact={exact}, dense-inverse deviation {inv_dev:.2e}")


# --- desk-scale end-to-end inversion -----------------------------------------

def _desk_setup():
    grid = flowsim.AquiferGrid(48, 48)
    exp = flowsim.ExperimentSpec(
        mode="tomography", grid=grid, boundary=BC,
        sources=flowsim.SourceSpec(recharge=0.001),
        layout=flowsim.lattice_layout(grid, 4, pumping=True), pumping_rate=50.0,
    )
    n_latent = 36
    # fixed random linear latent->field map built from GRF basis fields,
    # scaled so log10-K stays in the paper's [-1, 1] working range (3 sigma)
    basis = fields.grf_sample(fields.GrfParams(), grid.shape, n_latent, seed=99)
    basis = basis.reshape(n_latent, -1).T / np.sqrt(n_latent) / 3.0

    def gen(z):
        return (basis @ np.asarray(z, dtype=np.float64)).reshape(grid.shape)

    def forward(field):
        return flowsim.run_forward(10.0 ** field, exp)

    return gen, forward, n_latent


def _desk_run(seed: int):
    import threadpoolctl

    threadpoolctl.threadpool_limits(1)
    gen, forward, n_latent = _desk_setup()
    z_true = np.random.default_rng((seed, 77)).standard_normal(n_latent)
    d_obs = flowsim.add_noise(forward(gen(z_true)), SIGMA, seed=seed)
    model = esmda.ObservationModel.from_sigma(d_obs, SIGMA)
    rec = esmda.run_esmda(forward, gen, n_latent, model, n_a=8, n_real=200, seed=seed)
    means = rec.misfit_summary()[:, 0]
    monotone = bool(np.all(np.diff(means) <= 1e-12 * max(1.0, means[0])))
    return monotone, float(means[-1])


def test_desk_scale_end_to_end_inversion():
    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_desk_run, range(20)))
    dt = time.perf_counter() - t0
    n_monotone = sum(1 for mono, _ in results if mono)
    finals = np.array([final for _, final in results])
    ok = n_monotone >= 18 and finals.mean() <= 3 * SIGMA and dt < 300.0
    _report("desk-scale-inversion", ok,
            f"monotone {n_monotone}/20, mean final fit {finals.mean():.4f} m "
            f"(3 sigma = {3*SIGMA}), max {finals.max():.4f} m, {dt:.0f} s")


# --- multimodal surface: ES-MDA vs variational ---------------------------------

def _multimodal_problem():
    grid = flowsim.AquiferGrid(16, 16)
    exp = flowsim.ExperimentSpec(
        mode="static-heads", grid=grid, boundary=BC,
        sources=flowsim.SourceSpec(recharge=0.001),
        layout=flowsim.lattice_layout(grid, 3),
    )
    P = fields.grf_sample(fields.GrfParams(range_we=10, range_ns=8),
                          grid.shape, 4, seed=7) * 0.3

    def gen(z):
        # two-slope kinks per coordinate; negative branches mix in an
        # off-direction pattern, so their basins cannot fit the data exactly
        a = z[0] * P[0] if z[0] >= 0 else (-0.6 * z[0]) * (0.8 * P[0] + 0.6 * P[2])
        b = z[1] * P[1] if z[1] >= 0 else (-0.6 * z[1]) * (0.8 * P[1] + 0.6 * P[3])
        return a + b

    def forward(field):
        return flowsim.run_forward(10.0 ** field, exp)

    d_obs = flowsim.add_noise(forward(gen(np.array([1.2, 0.8]))), SIGMA, seed=42)
    spec = varinv.ObjectiveSpec(d_obs=d_obs, error_var=np.full(9, SIGMA**2))
    return gen, forward, d_obs, spec


def test_multimodal_esmda_beats_variational():
    gen, forward, d_obs, spec = _multimodal_problem()
    fwd_z = lambda z: forward(gen(z))

    scan = diagnostics.objective_surface((0, 1), np.zeros(2), spec, fwd_z)
    V = scan.values
    inner = V[1:-1, 1:-1]
    n_minima = int(np.sum((inner < V[:-2, 1:-1]) & (inner < V[2:, 1:-1])
                          & (inner < V[1:-1, :-2]) & (inner < V[1:-1, 2:])))

    model = esmda.ObservationModel.from_sigma(d_obs, SIGMA)
    es_mean_L, var_finals = [], []
    for k in range(20):
        z0 = np.random.default_rng((k, 5)).standard_normal(2)
        traj = varinv.run_variational(z0, spec, fwd_z,
                                      varinv.InversionPolicy(max_iterations=25))
        var_finals.append(traj.final_objective)
        rec = esmda.run_esmda(forward, gen, 2, model, n_a=8, n_real=200, seed=k)
        Z = rec.ensembles[-1]
        es_mean_L.append(np.mean([varinv.objective(Z[:, j], spec, fwd_z)
                                  for j in range(Z.shape[1])]))
    es_final = float(np.mean(es_mean_L))
    var_median = float(np.median(var_finals))
    _report("multimodal-esmda-vs-variational",
            n_minima >= 2 and es_final <= var_median,
            f"{n_minima} local minima; esmda mean L {es_final:.1f} "
            f"vs variational median L {var_median:.1f}")


# --- objective surface scan -----------------------------------------------------

def test_objective_surface_scan():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((240, 36))  # surrogate forward
    axis = diagnostics.scan_axis()
    z_ref = np.zeros(36)
    z_ref[3], z_ref[4] = axis[68], axis[37]  # on-grid reference coordinates
    d_obs = A @ z_ref  # noise-free data at the reference
    spec = varinv.ObjectiveSpec(d_obs=d_obs, error_var=np.full(240, SIGMA**2),
                                prior_center=z_ref)
    t0 = time.perf_counter()
    scan = diagnostics.objective_surface((3, 4), z_ref, spec, lambda z: A @ z)
    dt = time.perf_counter() - t0
    low, (a, b) = scan.minimum()
    at_ref = (scan.axis_i[a] == z_ref[3]) and (scan.axis_j[b] == z_ref[4])
    _report("objective-surface-scan",
            scan.values.shape == (101, 101) and low == 0.0 and at_ref and dt < 300.0,
            f"grid {scan.values.shape}, min L {low}, at reference {at_ref}, {dt:.1f} s")


# --- generative statistics -------------------------------------------------------

def test_grf_semivariogram_statistics():
    p = fields.GrfParams()
    draws = fields.grf_sample(p, (96, 96), 200, seed=42)
    sv = diagnostics.mean_semivariogram(draws, max_lag=40)
    model = fields.spherical_semivariogram(p, sv.lags)
    rel = np.abs(sv.gamma[1:] - model[1:]) / model[1:]
    _report("grf-semivariogram", rel.max() <= 0.15,
            f"max relative deviation {rel.max():.1%} over lags 1..40")


def test_nn_two_sample_calibration():
    draws = fields.grf_sample(fields.GrfParams(), (96, 96), 2000, seed=17)
    perm = np.random.default_rng(18).permutation(2000)
    acc = diagnostics.nn_two_sample_accuracy(list(draws[perm[:1000]]),
                                             list(draws[perm[1000:]]))
    _report("nn-two-sample-calibration", 0.45 <= acc <= 0.55, f"accuracy {acc:.3f}")


def test_generator_inference_invariants():
    ok, detail = True, []
    for name, spec, n_tconv in (("table1", gl.gaussian_generator(), 4),
                                ("table2", gl.channel_generator(), 5)):
        sizes = [s for (_, s, _) in spec.layer_shapes()]
        doubling = all(b == 2 * a for a, b in zip(sizes[:-1], sizes[1:])
                       if b != a) and sizes[-1] == 96
        spatial = [s for (c, s, _), layer in zip(spec.layer_shapes()[1:], spec.layers)
                   if isinstance(layer, gl.TransposedConv)]
        assert len(spatial) == n_tconv
        for seed in (0, 1, 2):
            w = gl.WeightStore.random(spec, seed=seed)
            z = np.random.default_rng(seed + 100).standard_normal(spec.n_latent)
            out = gl.generate(spec, w, z)
            inside = out.shape == (96, 96) and out.min() > 0.0 and out.max() < 1.0
            ok = ok and inside and doubling
            detail.append(f"{name}/s{seed} [{out.min():.3f},{out.max():.3f}]")
    _report("generator-inference-invariants", ok, "; ".join(detail[:3]) + " ...")
