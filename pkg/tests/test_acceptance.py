"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""
import time

import numpy as np
import pytest
from scipy.integrate import fixed_quad

from conftest import slow_mode, undamped_arm
from softcc.config import build_scenarios, preset
from softcc.dynamics import SoftRobotModel, segment_elastic_energy
from softcc.identification import PAPER_PARAMS, add_measurement_noise, identify, synthesize_step_data
from softcc.robot import FixedBase, paper_arm
from softcc.simulation import Scenario, ZeroController, l2_error, run_scenario
from softcc.validation import (check_actuation_identity, check_frames, check_inertia_spd, check_jacobians,
                               check_mass_midpoint)

HARDWARE_L2 = {"I_q=0": 0.1311, "I_q=0.08": 0.0965, "I_q=0.3": 0.0861}  # reference only
TRANSIENT_S = 2.0


def hierarchy_cfg(**controller):
    cfg = preset("hierarchy-demo")
    return cfg.model_copy(update={"controller": cfg.controller.model_copy(update=controller)})


@pytest.fixture(scope="module")
def hierarchy_run():
    (_, sc), = build_scenarios(preset("hierarchy-demo"))
    return run_scenario(sc)


def test_ac01_kinematic_equivalence(acceptance):
    t0 = time.perf_counter()
    worst = check_frames(paper_arm(5), n_samples=1000)
    seconds = time.perf_counter() - t0
    ok = acceptance("kinematic_equivalence", worst, 1e-10, worst <= 1e-10 and seconds < 5.0,
                    runtime_s=f"{seconds:.2f}")
    assert ok


def test_ac02_mass_at_chord_midpoint(acceptance):
    worst = check_mass_midpoint(paper_arm(5), n_samples=1000)
    assert acceptance("mass_at_chord_midpoint", worst, 1e-10, worst <= 1e-10)


def test_ac03_jacobian_stack(acceptance):
    worst = check_jacobians(paper_arm(5), n_samples=200)
    assert acceptance("jacobians_vs_central_differences", worst, 1e-5, worst <= 1e-5)


def test_ac04_dynamics_properties(acceptance):
    robot = undamped_arm(5, gravity=(0.0, -9.81), base=FixedBase((0.0, 0.0, np.pi / 2)))
    model = SoftRobotModel(robot)
    min_eig = check_inertia_spd(robot, n_samples=1000)

    ts = run_scenario(Scenario(robot, ZeroController(model), duration=1.0, dt=1e-4, control_period=0.01,
                               integrator="energy", plant_mismatch=1.0, q0=slow_mode(robot, 0.3)))
    E = np.array([model.energy(q, qd) for q, qd in zip(ts.q, ts.qd)])
    drift = float(np.abs(E - E[0]).max() / abs(E[0]))

    h = 1e-6
    skew = 0.0
    for q, qd in zip(ts.q, ts.qd):
        speed = np.linalg.norm(qd)
        if speed == 0.0:
            continue
        v = qd / speed
        dBdt = speed * (model.evaluate(q + h * v, qd).B - model.evaluate(q - h * v, qd).B) / (2 * h)
        skew = max(skew, abs(qd @ (dBdt - 2 * model.evaluate(q, qd).C) @ qd))

    ok = min_eig > 0 and skew <= 1e-6 and drift <= 1e-6
    assert acceptance("inertia_spd_skew_energy", max(skew, drift), 1e-6, ok,
                      min_eig=f"{min_eig:.3e}", skew=f"{skew:.2e}", drift=f"{drift:.2e}")


def test_ac05_actuation_identity(acceptance):
    worst = check_actuation_identity(paper_arm(5), n_samples=200)
    assert acceptance("actuation_map_identity", worst, 1e-9, worst <= 1e-9)


def test_ac06_elastic_closed_forms(acceptance):
    rng = np.random.default_rng(6)
    worst = 0.0
    for kappa, delta in zip(rng.uniform(0.1, 5e3, 50), rng.uniform(1e-3, 0.05, 50)):
        K_num = fixed_quad(lambda s: 2.0 * kappa * s * s, -delta, delta, n=8)[0]
        worst = max(worst, abs(4.0 / 3.0 * kappa * delta ** 3 - K_num))
        for q in rng.uniform(-np.pi, np.pi, 5):
            E_num = fixed_quad(lambda s: kappa * (s * q) ** 2, -delta, delta, n=8)[0]
            worst = max(worst, abs(segment_elastic_energy(kappa, delta, q) - E_num),
                        abs(2.0 / 3.0 * kappa * delta ** 3 * q * q - E_num))
    assert acceptance("elastic_closed_forms", worst, 1e-10, worst <= 1e-10)


def test_ac07_curvature_tracking_trend(acceptance):
    cfg = preset("curvature-tracking")
    t0 = time.perf_counter()
    errors = {}
    for label, sc in build_scenarios(cfg):
        ts = run_scenario(sc)
        errors[label] = l2_error(ts.q[:-1] - ts.extras["qref"][:-1], dt=ts.period)
    seconds = time.perf_counter() - t0
    values = [errors[k] for k in ("I_q=0", "I_q=0.08", "I_q=0.3")]
    ok = values[0] > values[1] > values[2] and seconds < 30.0
    assert acceptance("curvature_l2_strictly_decreasing", values[2], values[1], ok,
                      l2="/".join(f"{v:.4f}" for v in values), hardware="/".join(map(str, HARDWARE_L2.values())),
                      runtime_s=f"{seconds:.1f}")


def test_ac08_surface_following(acceptance):
    (_, sc), = build_scenarios(preset("surface-follow"))
    t0 = time.perf_counter()
    ts = run_scenario(sc)
    seconds = time.perf_counter() - t0
    switches = [(a, b) for _, a, b in ts.events["phase_switches"]]
    explore = switches.count(("Approaching", "Exploring"))
    back = sum(1 for _, b in switches if b == "Approaching")
    final = ts.window(ts.t[-1] - 1.0, np.inf) | (ts.t >= ts.t[-1] - 1e-12)
    contact_held = bool(ts.contact[final].all())
    err = float(ts.extras["tangential_error"][-1, 0])
    onset = ts.events.get("contact_onset")
    ok = onset is not None and explore == 1 and back == 0 and contact_held and err <= 0.01 and seconds < 30.0
    assert acceptance("surface_following", err, 0.01, ok, onset_s=onset, switches=len(switches),
                      contact_final_1s=contact_held, runtime_s=f"{seconds:.1f}")


def test_ac09_nullspace_annihilation(acceptance, hierarchy_run):
    annihilation = float(hierarchy_run.extras["annihilation"].max())

    def tip(sigma):
        cfg = hierarchy_cfg(inject_sigma=sigma)
        cfg = cfg.model_copy(update={"disturbances": [],
                                     "simulation": cfg.simulation.model_copy(update={"duration_s": 5.0})})
        (_, sc), = build_scenarios(cfg)
        return run_scenario(sc).tip

    base, injected = tip(0.0), tip(0.005)
    deviation = float(np.linalg.norm(injected - base, axis=1).max())
    ok = annihilation <= 1e-8 and deviation <= 1e-3
    assert acceptance("nullspace_annihilation", annihilation, 1e-8, ok, tip_deviation_m=f"{deviation:.2e}")


def test_ac10_hierarchy_trend(acceptance, hierarchy_run):
    ts = hierarchy_run
    err = np.asarray(ts.extras["err_tip_position"]).ravel()
    dist = preset("hierarchy-demo").disturbances[0]
    d_end = dist.start_s + dist.duration_s
    steady = ts.window(TRANSIENT_S, dist.start_s)
    band = float(err[steady].max())  # envelope over a full base cycle before the push
    after = ts.t >= d_end - 1e-12
    inside = np.flatnonzero(after & (err <= band))
    reentry = float(ts.t[inside[0]]) if inside.size else np.inf
    recovery = reentry - d_end
    settled = steady | (ts.t >= reentry - 1e-12)
    worst_settled = float(err[settled].max())
    outside = ts.t[after & (err > band)]
    stays = float(outside[-1] + ts.period - d_end) if outside.size else 0.0
    ok = worst_settled < 0.02 and recovery <= 3.0
    assert acceptance("hierarchy_tip_error_and_recovery", worst_settled, 0.02, ok,
                      band_m=f"{band:.4f}", recovery_s=f"{recovery:.2f}", from_onset_s=f"{reentry - dist.start_s:.2f}",
                      stays_in_band_s=f"{stays:.2f}", peak_m=f"{err[ts.t >= dist.start_s].max():.4f}")


def test_ac11_identification_round_trip(acceptance):
    t0 = time.perf_counter()
    data = synthesize_step_data(PAPER_PARAMS)
    clean = identify(data)
    clean_err = max(abs(clean.k / PAPER_PARAMS.k - 1), abs(clean.d / PAPER_PARAMS.d - 1))
    noisy_err = 0.0
    for seed in range(20):
        est = identify(add_measurement_noise(data, 1e-3, seed))  # same draws as synthesize(noise, seed)
        noisy_err = max(noisy_err, abs(est.k / PAPER_PARAMS.k - 1), abs(est.d / PAPER_PARAMS.d - 1))
    seconds = time.perf_counter() - t0
    ok = clean_err <= 1e-6 and noisy_err <= 0.05 and seconds < 60.0
    assert acceptance("identification_round_trip", noisy_err, 0.05, ok, noiseless=f"{clean_err:.2e}",
                      runtime_s=f"{seconds:.1f}")


def test_ac12_rk4_order(acceptance):
    robot = undamped_arm(5)
    model = SoftRobotModel(robot)
    q0 = slow_mode(robot, 0.3)

    def final(h):
        ts = run_scenario(Scenario(robot, ZeroController(model), duration=0.1, dt=h, control_period=0.1,
                                   integrator="rk4", plant_mismatch=1.0, q0=q0))
        return np.concatenate([ts.q[-1], ts.qd[-1]])

    y = [final(2e-5 / 2 ** k) for k in range(4)]
    diffs = [np.linalg.norm(a - b) for a, b in zip(y, y[1:])]
    orders = [float(np.log2(a / b)) for a, b in zip(diffs, diffs[1:])]
    assert acceptance("rk4_convergence_order", min(orders), 3.5, min(orders) >= 3.5,
                      orders="/".join(f"{o:.2f}" for o in orders))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
