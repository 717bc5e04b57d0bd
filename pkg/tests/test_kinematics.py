"""Arms: forward/inverse kinematics, torque transport, collision gauntlet."""

from __future__ import annotations

import math

import numpy as np
import pytest

from platelift.geometry import PlateModel, Pose, rot_z
from platelift.grasp_db import RConf, load_grasp_db, generate_grasp_db, to_world
from platelift.kinematics import (Capsule, DualArm, Environment, ObstacleBox,
                                  arm_capsules, arms_from_doc, arms_to_doc,
                                  capsules_cross, clear_of_world, default_arm,
                                  geometric_feasible, hand_capsules,
                                  joint_torques)


def _arm(name="left", x=-0.55, hand="grip"):
    return default_arm(name, Pose(np.eye(3), np.array([x, 0.0, 0.0])),
                       hand=hand)


def test_fk_home_is_finite_and_within_reach():
    arm = _arm()
    E = arm.fk(arm.home)
    assert np.all(np.isfinite(E.rotation)) and np.all(np.isfinite(E.translation))
    base_to_tcp = np.linalg.norm(E.translation - arm.base.translation)
    assert base_to_tcp <= arm.reach() + 1e-9


def test_jacobian_matches_finite_difference_fk():
    arm = _arm()
    rng = np.random.default_rng(47)
    h = 1e-7
    for _ in range(10):
        q = rng.uniform(arm.lower * 0.5, arm.upper * 0.5)
        J = arm.jacobian(q)
        assert J.shape == (6, arm.dof)
        for i in range(arm.dof):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            dp = (arm.fk(qp).translation - arm.fk(qm).translation) / (2 * h)
            assert np.allclose(J[:3, i], dp, atol=1e-5)


def test_ik_recovers_fk_targets():
    arm = _arm()
    rng = np.random.default_rng(53)
    hits = 0
    for _ in range(20):
        q = rng.uniform(arm.lower * 0.4, arm.upper * 0.4)
        target = arm.fk(q)
        sol = arm.ik(target)
        if sol is None:
            continue
        hits += 1
        E = arm.fk(sol)
        assert np.linalg.norm(E.translation - target.translation) <= 1e-4
        assert E.almost_equal(target, tol=1e-3)
        assert np.all(sol >= arm.lower - 1e-9)
        assert np.all(sol <= arm.upper + 1e-9)
    assert hits >= 16


def test_ik_rejects_unreachable_targets():
    arm = _arm()
    far = Pose(np.eye(3), arm.base.translation + np.array([0.0, 0.0, 5.0]))
    assert arm.ik(far) is None


def test_ik_accept_filter_is_honored():
    arm = _arm()
    target = arm.fk(arm.home * 0.5)
    assert arm.ik(target) is not None
    assert arm.ik(target, accept=lambda q: False) is None


def test_joint_torques_are_jacobian_transpose():
    arm = _arm()
    rng = np.random.default_rng(59)
    for _ in range(10):
        q = rng.uniform(arm.lower * 0.5, arm.upper * 0.5)
        w = rng.normal(size=6)
        assert np.allclose(joint_torques(arm, q, w),
                           arm.jacobian(q).T @ w, atol=1e-12)


def test_arm_capsules_trace_the_links():
    arm = _arm()
    caps = arm_capsules(arm, arm.home)
    assert len(caps) >= 3
    for c in caps:
        assert c.radius == arm.link_radius
        assert np.linalg.norm(c.p1 - c.p0) > 1e-4


def test_hand_capsules_clear_the_plate_body():
    """Pads touch, but no capsule wedges into the plate itself."""
    plate = PlateModel(length=0.3, width=0.3, height=0.04, mass=4.0)
    rest = Pose(np.eye(3), np.array([0.0, 0.0, plate.half[2]]))
    plate_box = ObstacleBox(rest, plate.half)
    no_table = Environment(table_height=-10.0, obstacles=[])
    for p in load_grasp_db(generate_grasp_db(plate), plate):
        world = to_world(RConf((p,)), rest).placements[0]
        caps = hand_capsules(world)
        assert caps
        assert clear_of_world(caps, plate_box, no_table, world.points)


def test_capsules_cross_toggles_with_distance():
    a = [Capsule(np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), 0.05)]
    near = [Capsule(np.array([0.5, 0.08, 0]), np.array([0.5, 1.0, 0]), 0.05)]
    far = [Capsule(np.array([0.5, 0.3, 0]), np.array([0.5, 1.0, 0]), 0.05)]
    assert capsules_cross(a, near)
    assert not capsules_cross(a, far)


def test_clear_of_world_flags_table_and_obstacles():
    env = Environment(table_height=0.0, obstacles=[])
    above = [Capsule(np.array([0.0, 0, 0.2]), np.array([0.1, 0, 0.2]), 0.03)]
    sunk = [Capsule(np.array([0.0, 0, 0.02]), np.array([0.1, 0, 0.02]), 0.03)]
    far_box = ObstacleBox(Pose(np.eye(3), np.array([10.0, 10.0, 10.0])),
                          np.array([0.01, 0.01, 0.01]))
    exempt = np.zeros((0, 3))
    assert clear_of_world(above, far_box, env, exempt)
    assert not clear_of_world(sunk, far_box, env, exempt)
    blocked = Environment(table_height=0.0, obstacles=[
        ObstacleBox(Pose(np.eye(3), np.array([0.05, 0.0, 0.2])),
                    np.array([0.05, 0.05, 0.05]))])
    assert not clear_of_world(above, far_box, blocked, exempt)


def test_geometric_feasible_on_a_resting_plate():
    """On the bundled cell, rim hands reach a resting plate; bottom pushes
    would have to come through the table and never pass."""
    from platelift.scenario import resolve_scenario

    scn = resolve_scenario("ab1")
    rest = scn.initial_pose
    plate_box = ObstacleBox(rest, scn.plate.half)
    outcomes = {}
    for p in scn.placements:
        world = to_world(RConf((p,)), rest)
        qs = geometric_feasible(scn.arms, world, plate_box, scn.env)
        outcomes[p.placement_id] = qs
        if qs is not None:
            assert set(qs) == {p.hand}
            E = scn.arms.arms[p.hand].fk(qs[p.hand])
            assert E.almost_equal(world.placements[0].pose, tol=1e-3)
    feasible = {pid for pid, qs in outcomes.items() if qs is not None}
    # flat on the table only top pushes work: a grip's lower jaw and a
    # bottom push's stick would both have to pass through the table
    assert any(pid.startswith("pt") for pid in feasible)
    assert not any(pid.startswith("g") for pid in feasible)
    assert not any(pid.startswith("pb") for pid in feasible)


def test_planner_states_replay_through_the_gauntlet(ab1_outcome):
    """Every hand placement the plan commits to is re-checkable."""
    scn = ab1_outcome.scenario
    hit_hands = set()
    for nid in ab1_outcome.result.node_ids:
        node = ab1_outcome.msg.nodes[nid]
        if not node.rconf.placements:
            continue
        pose = node.contact.pose
        world = to_world(node.rconf, pose)
        qs = geometric_feasible(scn.arms, world, ObstacleBox(pose,
                                                             scn.plate.half),
                                scn.env)
        assert qs is not None
        assert set(qs) == {p.hand for p in node.rconf.placements}
        hit_hands |= set(qs)
    assert hit_hands  # the path really uses the hands somewhere


def test_arms_doc_round_trip():
    arms = DualArm({"grip": _arm("grip", -0.55, "grip"),
                    "push": _arm("push", 0.55, "push")})
    doc = arms_to_doc(arms)
    again = arms_from_doc(doc)
    assert set(again.arms) == {"grip", "push"}
    for name, arm in arms.arms.items():
        other = again.arms[name]
        assert other.base.almost_equal(arm.base, tol=1e-12)
        assert np.allclose(other.offsets, arm.offsets, atol=1e-12)
        assert np.allclose(other.axes, arm.axes, atol=1e-12)
        assert other.tool.almost_equal(arm.tool, tol=1e-12)
        rng = np.random.default_rng(61)
        q = rng.uniform(arm.lower * 0.3, arm.upper * 0.3)
        assert other.fk(q).almost_equal(arm.fk(q), tol=1e-9)
