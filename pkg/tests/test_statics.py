"""Contact force distribution: cones, equilibrium, ranks, lift shares."""

from __future__ import annotations

import math

import numpy as np
import pytest

from platelift.geometry import PlateModel, Pose
from platelift.statics import (ContactSpec, ForceLimits, ObjectiveWeights,
                               assemble_system, frame_from_z, grasp_map,
                               restraint_rank, solve_socp, verify_solution)

UP = np.array([0.0, 0.0, 1.0])
DOWN = np.array([0.0, 0.0, -1.0])


def _ab_plate() -> PlateModel:
    return PlateModel(length=0.3, width=0.3, height=0.04, mass=4.0)


def _corner_supports(plate: PlateModel) -> list:
    rest = Pose(np.eye(3), np.array([0.0, 0.0, plate.half[2]]))
    specs = []
    for i, v in enumerate(plate.bottom_corners()):
        specs.append(ContactSpec(f"env_v{i}", "env",
                                 rest.transform_point(v), frame_from_z(UP),
                                 mu=0.3))
    return specs


def _suction_spec(max_force: float, z: float = 0.04,
                  pad_radius: float = 0.02) -> ContactSpec:
    # the pad pulls the plate up: positive normal is +z at the top surface
    return ContactSpec("suction", "suction", np.array([0.0, 0.0, z]),
                       frame_from_z(UP), mu=0.5, pad_radius=pad_radius,
                       kappa=40.0)


def test_frame_from_z_is_orthonormal():
    rng = np.random.default_rng(31)
    for _ in range(50):
        z = rng.normal(size=3)
        R = frame_from_z(z)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert math.isclose(np.linalg.det(R), 1.0, abs_tol=1e-12)
        assert np.allclose(R[:, 2], z / np.linalg.norm(z), atol=1e-12)


def test_grasp_map_transports_wrenches():
    """G [f; tau] equals the same wrench expressed about the reference."""
    rng = np.random.default_rng(37)
    for _ in range(50):
        R = frame_from_z(rng.normal(size=3))
        r = rng.normal(size=3)
        G = grasp_map(R, r)
        local = rng.normal(size=6)
        f_w = R @ local[:3]
        tau_w = R @ local[3:] + np.cross(r, f_w)
        assert np.allclose(G @ local, np.concatenate([f_w, tau_w]), atol=1e-12)


def test_restraint_rank_against_svd_oracle():
    rng = np.random.default_rng(41)
    for _ in range(60):
        k = int(rng.integers(0, 7))
        pos = rng.normal(size=(k, 3))
        nrm = rng.normal(size=(k, 3))
        nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-9)
        c = rng.normal(size=3)
        got = restraint_rank(pos, nrm, c)
        if k == 0:
            assert got == 0
            continue
        rows = np.array([np.r_[n, np.cross(p - c, n)]
                         for p, n in zip(pos, nrm)])
        assert got == np.linalg.matrix_rank(rows, tol=1e-8)
        # independent of the chosen reference point
        assert got == restraint_rank(pos, nrm, rng.normal(size=3))


def test_restraint_rank_face_edge_vertex_none():
    plate = _ab_plate()
    corners = plate.bottom_corners()
    normals = np.tile(UP, (4, 1))
    assert restraint_rank(corners, normals, np.zeros(3)) == 3
    assert restraint_rank(corners[:2], normals[:2], np.zeros(3)) == 2
    assert restraint_rank(corners[:1], normals[:1], np.zeros(3)) == 1
    assert restraint_rank(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(3)) == 0


def test_resting_plate_splits_weight_evenly():
    """Four corner supports carry mg/4 = 9.81 N each; hands and cup idle."""
    plate = _ab_plate()
    system = assemble_system(_corner_supports(plate), plate.mass,
                             np.array([0.0, 0.0, plate.half[2]]))
    sol = solve_socp(system)
    assert sol.feasible
    assert abs(sol.f_gp_plus) <= 1e-6 and abs(sol.f_s_plus) <= 1e-6
    for i in range(4):
        w = sol.wrenches[f"env_v{i}"]
        assert abs(w.force[2] - 9.81) <= 0.01
    report = verify_solution(system, sol)
    assert report["ok"]
    assert report["equilibrium_residual"] <= 1e-6


def test_suction_only_lift_shares():
    """20 N cup cannot hold 39.24 N; 60 N cup can, at f_s+ = 39.24."""
    plate = _ab_plate()
    com = np.array([0.0, 0.0, plate.half[2]])

    weak = assemble_system([_suction_spec(20.0)], plate.mass, com)
    sol = solve_socp(weak, limits=ForceLimits(15.0, 20.0))
    assert not sol.feasible

    strong = assemble_system([_suction_spec(60.0)], plate.mass, com)
    sol = solve_socp(strong, limits=ForceLimits(15.0, 60.0))
    assert sol.feasible
    assert abs(sol.f_s_plus - 39.24) <= 0.01
    assert abs(sol.f_gp_plus) <= 1e-6
    report = verify_solution(strong, sol, limits=ForceLimits(15.0, 60.0))
    assert report["ok"]


def _hand_specs() -> list:
    """A rim grip (finger pads squeezing from above and below) plus a
    bottom-face stick push near the opposite rim."""
    specs = []
    for k, (z, n) in enumerate(((0.04, DOWN), (0.0, UP))):
        specs.append(ContactSpec(f"g.{k}", "grip", np.array([0.13, 0.0, z]),
                                 frame_from_z(n), mu=0.8, eps=0.01))
    specs.append(ContactSpec("p.0", "push", np.array([-0.13, 0.0, 0.0]),
                             frame_from_z(UP), mu=0.4))
    return specs


def test_airborne_with_hands_meets_budget():
    """Hands top up what a 20 N cup cannot carry, within the 15 N budget."""
    plate = _ab_plate()
    com = np.array([0.0, 0.0, plate.half[2]])
    specs = [_suction_spec(20.0)] + _hand_specs()
    system = assemble_system(specs, plate.mass, com)
    limits = ForceLimits(15.0, 20.0)
    sol = solve_socp(system, limits=limits)
    assert sol.feasible
    report = verify_solution(system, sol, limits=limits)
    assert report["ok"]
    assert report["equilibrium_residual"] <= 1e-6
    assert min(report["margins"].values()) >= -1e-6
    assert sol.f_gp_plus <= 15.0 + 1e-6
    assert sol.f_s_plus <= 20.0 + 1e-6
    # the cup caps at 20 N, so the hands carry at least mg - 20 = 19.24 N
    hand_up = sum((s.rotation @ sol.wrenches[s.label].force)[2]
                  for s in specs if s.kind in ("grip", "push"))
    assert hand_up >= 19.24 - 1e-4


def test_objective_weights_trade_hand_against_cup():
    """Weighting the cup bound heavily pushes load onto the hands."""
    plate = _ab_plate()
    com = np.array([0.0, 0.0, plate.half[2]])
    system = assemble_system([_suction_spec(60.0)] + _hand_specs(),
                             plate.mass, com)
    limits = ForceLimits(15.0, 60.0)
    cheap_cup = solve_socp(system, ObjectiveWeights(k_gp=10.0, k_s=0.01),
                           limits)
    dear_cup = solve_socp(system, ObjectiveWeights(k_gp=0.01, k_s=10.0),
                          limits)
    assert cheap_cup.feasible and dear_cup.feasible
    assert cheap_cup.f_s_plus > dear_cup.f_s_plus
    assert cheap_cup.f_gp_plus < dear_cup.f_gp_plus


def test_every_feasible_solve_passes_the_recheck():
    """Random single-hand + cup systems: solver output survives the oracle."""
    plate = _ab_plate()
    rng = np.random.default_rng(43)
    limits = ForceLimits(15.0, 60.0)
    feasible = 0
    for _ in range(40):
        com = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                        plate.half[2]])
        specs = [_suction_spec(60.0,
                               pad_radius=float(rng.uniform(0.015, 0.03)))]
        if rng.random() < 0.7:
            x = float(rng.uniform(0.08, 0.14)) * (1 if rng.random() < 0.5
                                                  else -1)
            y = float(rng.uniform(-0.1, 0.1))
            if rng.random() < 0.5:  # rim grip: a finger pad on each face
                for k, (z, n) in enumerate(((0.04, DOWN), (0.0, UP))):
                    specs.append(ContactSpec(f"hand.{k}", "grip",
                                             np.array([x, y, z]),
                                             frame_from_z(n), mu=0.8,
                                             eps=0.01))
            else:  # stick push against the bottom face
                specs.append(ContactSpec("hand.0", "push",
                                         np.array([x, y, 0.0]),
                                         frame_from_z(UP), mu=0.4))
        system = assemble_system(specs, plate.mass, com)
        sol = solve_socp(system, limits=limits)
        if not sol.feasible:
            continue
        feasible += 1
        report = verify_solution(system, sol, limits=limits)
        assert report["ok"], report
        assert report["equilibrium_residual"] <= 1e-6
    assert feasible >= 20


def test_suction_bend_cap_rejects_offset_com():
    """A far CoM needs more pad moment than pi*r*kappa allows."""
    plate = PlateModel(length=0.6, width=0.4, height=0.02, mass=4.0)
    # cup at the plate center, CoM pushed 10 cm off: moment 0.1*39.24 ≈ 3.9 Nm
    # against a cap of pi*0.02*40/sqrt(2) ≈ 1.8 Nm
    system = assemble_system([_suction_spec(60.0, z=0.02)], plate.mass,
                             np.array([0.1, 0.0, 0.0]))
    sol = solve_socp(system, limits=ForceLimits(15.0, 60.0))
    assert not sol.feasible


def test_env_contacts_cannot_pull():
    """A hanging load with only table contacts has no equilibrium."""
    plate = _ab_plate()
    specs = _corner_supports(plate)
    # demand equilibrium with gravity reversed: table would need adhesion
    system = assemble_system(specs, plate.mass,
                             np.array([0.0, 0.0, plate.half[2]]),
                             gravity=-9.81)
    sol = solve_socp(system)
    assert not sol.feasible
