import numpy as np
import pytest

from hexgait import posectrl as pc
from hexgait import transforms
from hexgait.model import SequenceSpec

from oracles import plane_fit_svd


# ---------------------------------------------------------------------------
# manual posing

def test_manual_zero_velocity_unchanged(insectoid):
    poser = pc.ManualPoser(insectoid)
    h0 = poser.update(np.zeros(6), 0.005)
    for _ in range(100):
        h = poser.update(np.zeros(6), 0.005)
    assert np.array_equal(h, h0)
    assert np.array_equal(h, np.eye(4))


def test_manual_saturates_at_limits(insectoid):
    poser = pc.ManualPoser(insectoid)
    for _ in range(5000):
        poser.update([0, 0, 0.1, 0, 0, 0], 0.01)
    assert poser.offset[2] == pytest.approx(insectoid.max_translation[2])
    h = poser.update(np.zeros(6), 0.01)
    assert h[2, 3] == pytest.approx(insectoid.max_translation[2])


def test_manual_integration_symmetry(insectoid):
    poser = pc.ManualPoser(insectoid)
    v = np.array([0.01, -0.005, 0.004, 0.02, -0.01, 0.03])
    for _ in range(50):
        poser.update(v, 0.01)
    for _ in range(50):
        poser.update(-v, 0.01)
    assert np.max(np.abs(poser.offset)) < 1e-12


def test_manual_never_exceeds_limits_fuzzed(insectoid):
    poser = pc.ManualPoser(insectoid)
    lims = np.concatenate([insectoid.max_translation, insectoid.max_rotation])
    rng = np.random.default_rng(83)
    for _ in range(2000):
        poser.update(rng.uniform(-1, 1, 6), 0.01)
        assert np.all(np.abs(poser.offset) <= lims + 1e-15)


# ---------------------------------------------------------------------------
# imu posing

def test_imu_level_gives_zero(insectoid):
    poser = pc.ImuPoser(insectoid)
    h = poser.update(0.0, 0.0, 0.01)
    assert np.allclose(h, np.eye(4))


def test_imu_pid_settles_on_constant_disturbance(insectoid):
    # closed loop: measured tilt = disturbance + correction
    poser = pc.ImuPoser(insectoid)
    disturbance = np.deg2rad(5.0)
    dt = 0.01
    correction = 0.0
    for _ in range(int(10.0 / dt)):
        measured = disturbance + correction
        h = poser.update(measured, 0.0, dt)
        correction = poser.offset[0]
    assert abs(correction + disturbance) < np.deg2rad(0.1)
    measured = disturbance + correction
    assert abs(measured) < np.deg2rad(0.1)


def test_imu_output_clamped(insectoid):
    poser = pc.ImuPoser(insectoid)
    for _ in range(3000):
        poser.update(1.0, -1.0, 0.01)  # way beyond the configured envelope
    assert abs(poser.offset[0]) <= insectoid.max_rotation[0] + 1e-12
    assert abs(poser.offset[1]) <= insectoid.max_rotation[1] + 1e-12


# ---------------------------------------------------------------------------
# inclination posing

def test_inclination_level_is_identity():
    assert np.allclose(pc.inclination_pose(0.0, 0.0, 0.3), np.eye(4))


def test_inclination_magnitude_matches_tan():
    h = pc.inclination_pose(0.0, np.deg2rad(10.0), 0.3)
    assert abs(h[0, 3]) == pytest.approx(0.3 * np.tan(np.deg2rad(10.0)), abs=1e-9)
    assert h[1, 3] == pytest.approx(0.0, abs=1e-12)


def test_inclination_shifts_uphill():
    # nose-down pitch (positive about +y) means downhill is +x: shift -x
    h = pc.inclination_pose(0.0, np.deg2rad(10.0), 0.3)
    assert h[0, 3] < 0
    # roll: +roll drops the +y side, downhill +y (gravity spills to -y?)
    h2 = pc.inclination_pose(np.deg2rad(10.0), 0.0, 0.3)
    g_body = (transforms.rot_x(np.deg2rad(10.0)))[:3, :3].T @ [0, 0, -1]
    assert np.sign(h2[1, 3]) == -np.sign(g_body[1])


def test_inclination_rejects_vertical():
    with pytest.raises(ValueError):
        pc.inclination_pose(0.0, np.pi / 2, 0.3)


# ---------------------------------------------------------------------------
# walk plane

def test_walk_plane_flat_ground(insectoid):
    poser = pc.WalkPlanePoser(insectoid)
    pts = [leg.default_tip + [0, 0, 0.2 - 0.2] for leg in insectoid.legs]
    pts = [np.array([p[0], p[1], 0.0]) for p in pts]
    pose = poser.update(pts, 0.005)
    assert np.allclose(poser.normal(), [0, 0, 1], atol=1e-12)
    assert np.allclose(pose, transforms.translation([0, 0, insectoid.body_clearance]),
                       atol=1e-12)


def test_walk_plane_exact_fit_coplanar(insectoid):
    poser = pc.WalkPlanePoser(insectoid)
    pts = [np.array([x, y, 0.1 * x]) for x, y in
           [(0.3, 0.2), (-0.3, 0.2), (0.0, -0.4), (0.2, -0.1)]]
    poser.update(pts, 0.005)
    n = poser.normal()
    expected = np.array([-0.1, 0.0, 1.0]) / np.linalg.norm([-0.1, 0.0, 1.0])
    assert np.allclose(n, expected, atol=1e-12)


def test_walk_plane_noisy_regression(insectoid):
    rng = np.random.default_rng(89)
    a_true, b_true, c_true = 0.08, -0.05, 0.01
    poser = pc.WalkPlanePoser(insectoid)
    for _ in range(4000):
        pts = rng.uniform(-0.4, 0.4, size=(6, 2))
        z = a_true * pts[:, 0] + b_true * pts[:, 1] + c_true \
            + rng.normal(0, 0.002, 6)
        cloud = np.column_stack([pts, z])
        poser.update(cloud, 0.005)
    true_n = np.array([-a_true, -b_true, 1.0])
    true_n = true_n / np.linalg.norm(true_n)
    angle = np.arccos(np.clip(poser.normal() @ true_n, -1, 1))
    assert angle < np.deg2rad(1.0)


def test_walk_plane_least_squares_optimal(insectoid):
    # the fitted plane beats any 1-degree tilt of itself in squared residual
    rng = np.random.default_rng(97)
    pts = np.column_stack([rng.uniform(-0.4, 0.4, (8, 2)),
                           rng.normal(0, 0.05, 8)])
    poser = pc.WalkPlanePoser(insectoid)
    a, b, c = poser.fit(pts)

    def ssr(aa, bb, cc):
        return float(np.sum((pts[:, 2] - aa * pts[:, 0] - bb * pts[:, 1] - cc) ** 2))

    base = ssr(a, b, c)
    for da, db in [(0.0175, 0), (-0.0175, 0), (0, 0.0175), (0, -0.0175)]:
        assert ssr(a + da, b + db, c) >= base
    # cross-check against the explicit normal-equations solution
    amat = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
    ref = np.linalg.solve(amat.T @ amat, amat.T @ pts[:, 2])
    assert np.allclose([a, b, c], ref, atol=1e-9)
    # and on noise-free coplanar points the total-least-squares plane agrees
    flat = np.column_stack([pts[:, :2], 0.07 * pts[:, 0] - 0.02 * pts[:, 1] + 0.01])
    n_ref, _ = plane_fit_svd(flat)
    af, bf, cf = poser.fit(flat)
    n_fit = np.array([-af, -bf, 1.0]) / np.linalg.norm([-af, -bf, 1.0])
    assert np.arccos(np.clip(n_fit @ n_ref, -1, 1)) < 1e-6


def test_walk_plane_collinear_keeps_previous(insectoid):
    poser = pc.WalkPlanePoser(insectoid)
    good = [np.array([x, y, 0.05 * x]) for x, y in
            [(0.3, 0.2), (-0.3, 0.2), (0.0, -0.4)]]
    poser.update(good, 1000.0)
    before = poser.coeffs.copy()
    collinear = [np.array([t, 0.0, 0.0]) for t in (-0.2, 0.0, 0.2)]
    poser.update(collinear, 0.005)
    assert np.array_equal(poser.coeffs, before)
    poser.update([np.zeros(3)], 0.005)  # fewer than 3 points
    assert np.array_equal(poser.coeffs, before)


# ---------------------------------------------------------------------------
# auto pose

def test_auto_pose_zero_amplitude_identity():
    spec = pc.AutoPoseSpec()
    for f in np.linspace(0, 1, 7):
        assert np.allclose(pc.auto_pose(spec, f), np.eye(4))


def test_auto_pose_periodic_with_gait():
    spec = pc.AutoPoseSpec(amplitudes=np.array([0.0, 0, 0.01, 0.02, 0, 0]),
                           phases=np.zeros(6), cycles=1)
    for f in np.linspace(0, 1, 9):
        assert np.allclose(pc.auto_pose(spec, f), pc.auto_pose(spec, f + 1.0),
                           atol=1e-12)


def test_auto_pose_roll_extremes():
    amp = np.deg2rad(2.0)
    phase = 0.2
    spec = pc.AutoPoseSpec(amplitudes=np.array([0, 0, 0, amp, 0, 0]),
                           phases=np.array([0, 0, 0, phase, 0, 0]), cycles=1)
    fracs = np.linspace(0, 1, 2001)
    rolls = [transforms.to_xyz_rpy(pc.auto_pose(spec, f))[1][0] for f in fracs]
    assert max(rolls) == pytest.approx(amp, abs=1e-6)
    assert min(rolls) == pytest.approx(-amp, abs=1e-6)
    # peak sits where the sinusoid says it should
    peak = fracs[int(np.argmax(rolls))]
    assert peak == pytest.approx((0.25 - phase) % 1.0, abs=1e-3)


# ---------------------------------------------------------------------------
# composition

def test_compose_identity_subposes_returns_walk_plane(insectoid):
    ctrl = pc.PoseController(insectoid)
    p_walk = transforms.translation([0, 0, insectoid.body_clearance])
    state = ctrl.compose(np.eye(4), np.eye(4), np.eye(4), p_walk)
    assert np.array_equal(state.body, p_walk)


def test_compose_single_factor(insectoid):
    ctrl = pc.PoseController(insectoid)
    p_walk = transforms.translation([0, 0, insectoid.body_clearance])
    h_man = transforms.translation([0, 0, 0.02])
    state = ctrl.compose(h_man, np.eye(4), np.eye(4), p_walk)
    expected = p_walk.copy()
    expected[2, 3] += 0.02
    assert np.allclose(state.body, expected, atol=1e-12)


def test_compose_order_matches_matrix_product(insectoid):
    ctrl = pc.PoseController(insectoid)
    rng = np.random.default_rng(101)
    for _ in range(20):
        h_man = transforms.from_xyz_rpy(rng.uniform(-0.01, 0.01, 3),
                                        rng.uniform(-0.05, 0.05, 3))
        h_inc = transforms.translation(rng.uniform(-0.01, 0.01, 3))
        h_ai = transforms.from_xyz_rpy([0, 0, 0], rng.uniform(-0.05, 0.05, 3))
        p_walk = transforms.from_xyz_rpy([0, 0, insectoid.body_clearance],
                                         rng.uniform(-0.02, 0.02, 3))
        state = ctrl.compose(h_man, h_inc, h_ai, p_walk)
        # independent composition (offsets small: no clamping active)
        ref = np.eye(4) @ h_ai @ h_inc @ h_man @ p_walk
        assert np.allclose(state.body, ref, atol=1e-9)


def test_compose_clamps_combined_offset(insectoid):
    ctrl = pc.PoseController(insectoid)
    p_walk = transforms.translation([0, 0, insectoid.body_clearance])
    h_man = transforms.translation([0, 0, insectoid.max_translation[2]])
    h_inc = transforms.translation([0, 0, insectoid.max_translation[2]])
    state = ctrl.compose(h_man, h_inc, np.eye(4), p_walk)
    assert state.offset6[2] == pytest.approx(insectoid.max_translation[2])


def test_mode_switch_blends_smoothly(insectoid):
    ctrl = pc.PoseController(insectoid)
    ctrl.set_auto_pose(pc.AutoPoseSpec(
        amplitudes=np.array([0, 0, 0.02, 0, 0, 0]), phases=np.zeros(6)))
    dt = 0.01
    flat = [leg.default_tip for leg in insectoid.legs]
    for _ in range(10):
        ctrl.update(np.zeros(6), (0.05, 0.0), flat, 0.25, dt)
    ctrl.set_ai_mode("auto")
    z_prev = None
    for _ in range(int(pc.BLEND_TIME / dt) + 5):
        state = ctrl.update(np.zeros(6), (0.05, 0.0), flat, 0.25, dt)
        z = state.imu_auto[2, 3]
        if z_prev is not None:
            assert abs(z - z_prev) < 0.02 * dt / pc.BLEND_TIME + 2e-3
        z_prev = z
    assert ctrl._blend["imu"] == 0.0 and ctrl._blend["auto"] == 1.0


# ---------------------------------------------------------------------------
# tip pose combination

def test_combine_tip_identity(insectoid):
    p_default = transforms.translation([0, 0, insectoid.body_clearance])
    tip = np.array([0.3, -0.2, -0.2])
    out = pc.combine_tip_pose(p_default, p_default, tip)
    assert np.allclose(out, tip, atol=1e-12)


def test_combine_tip_raised_body(insectoid):
    p_default = transforms.translation([0, 0, insectoid.body_clearance])
    p_body = transforms.translation([0, 0, insectoid.body_clearance + 0.01])
    tip = np.array([0.3, -0.2, -0.2])
    out = pc.combine_tip_pose(p_body, p_default, tip)
    assert out[2] == pytest.approx(tip[2] - 0.01, abs=1e-12)


def test_combine_tip_yawed_body(insectoid):
    yaw = np.deg2rad(5.0)
    p_default = transforms.translation([0, 0, insectoid.body_clearance])
    p_body = transforms.from_xyz_rpy([0, 0, insectoid.body_clearance],
                                     [0, 0, yaw])
    tip = np.array([0.3, -0.2, -0.2])
    out = pc.combine_tip_pose(p_body, p_default, tip)
    ref = transforms.rot_z(-yaw)[:3, :3] @ tip
    assert np.allclose(out, ref, atol=1e-12)


def test_combine_tip_round_trip(insectoid):
    rng = np.random.default_rng(103)
    p_default = transforms.translation([0, 0, insectoid.body_clearance])
    for _ in range(50):
        p_body = transforms.from_xyz_rpy(rng.uniform(-0.03, 0.03, 3)
                                         + [0, 0, insectoid.body_clearance],
                                         rng.uniform(-0.1, 0.1, 3))
        tip = rng.uniform(-0.4, 0.4, 3)
        out = pc.combine_tip_pose(p_body, p_default, tip)
        rel = transforms.invert(p_default) @ p_body
        back = transforms.apply(rel, out)
        assert np.max(np.abs(back - tip)) < 1e-12


def test_combine_tip_walkspace_clamp(insectoid):
    import hexgait.workspace as wsp
    walk = wsp.Walkspace(-0.2, np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2]),
                         np.array([0.05, 0.05, 0.05, 0.05]))
    p_default = transforms.translation([0, 0, insectoid.body_clearance])
    p_body = transforms.translation([0.2, 0, insectoid.body_clearance])
    tip0 = insectoid.legs[0].default_tip
    out = pc.combine_tip_pose(p_body, p_default, tip0, walkspace=walk,
                              default_tip=tip0)
    assert np.hypot(*(out[:2] - tip0[:2])) <= 0.05 + 1e-9


# ---------------------------------------------------------------------------
# sequences

def test_sequence_zero_motion(insectoid):
    start = {leg.id: leg.home_angles() for leg in insectoid.legs}
    seq = SequenceSpec("noop", [({leg.id: list(leg.home_angles())
                                  for leg in insectoid.legs}, 1.0)])
    runner = pc.SequenceRunner(seq, insectoid, start)
    while not runner.done:
        targets = runner.step(0.05)
        for leg in insectoid.legs:
            assert np.allclose(targets[leg.id], leg.home_angles())


def test_sequence_linear_midpoint(insectoid):
    start = {leg.id: np.zeros(leg.joint_count) for leg in insectoid.legs}
    target = {leg.id: 0.2 * np.ones(leg.joint_count) for leg in insectoid.legs}
    seq = SequenceSpec("move", [({lid: list(v) for lid, v in target.items()}, 2.0)])
    runner = pc.SequenceRunner(seq, insectoid, start)
    out = None
    for _ in range(int(1.0 / 0.005)):
        out = runner.step(0.005)
    for leg in insectoid.legs:
        assert np.allclose(out[leg.id], 0.1 * np.ones(leg.joint_count), atol=1e-9)


def test_sequence_stretches_for_velocity_limits(insectoid):
    # 1.5 rad jump requested in 0.1 s: must stretch to respect 3.5 rad/s
    start = {leg.id: np.zeros(leg.joint_count) for leg in insectoid.legs}
    tgt = {leg.id: [0.9, 0.0, 1.5, -1.5, 0.0] for leg in insectoid.legs}
    seq = SequenceSpec("fast", [(tgt, 0.1)])
    runner = pc.SequenceRunner(seq, insectoid, start)
    dt = 0.002
    prev = start
    peak = 0.0
    while not runner.done:
        out = runner.step(dt)
        for leg in insectoid.legs:
            peak = max(peak, float(np.max(np.abs(out[leg.id] - prev[leg.id]) / dt)))
        prev = out
    vmax = insectoid.legs[0].velocity_limits()[0]
    assert peak <= vmax + 1e-6
    assert peak == pytest.approx(vmax, rel=0.01)


def test_startup_sequence_continuous_and_velocity_bounded(insectoid):
    seq = insectoid.sequences["startup"]
    start = {leg.id: leg.packed_angles() for leg in insectoid.legs}
    runner = pc.SequenceRunner(seq, insectoid, start)
    dt = 0.005
    prev = {lid: q.copy() for lid, q in start.items()}
    while not runner.done:
        out = runner.step(dt)
        for leg in insectoid.legs:
            step = np.abs(out[leg.id] - prev[leg.id])
            assert np.all(step <= leg.velocity_limits() * dt + 1e-9)
        prev = out
    for leg in insectoid.legs:
        assert np.allclose(prev[leg.id], leg.home_angles(), atol=1e-9)
