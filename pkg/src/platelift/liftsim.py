"""Cooperative lift-up simulation: follower controller and compliant plant.

The vacuum lifter is the leader (a scripted cable-speed profile standing in
for a human on the lifter switch); both robot hands follow it through a
velocity-form impedance law driven by the force error on the pushing hand.
The plant is the smallest model that shows the real coupling: a rigid plate
with heave/roll/pitch freedom, a linear spring-damper suction pad to the
cable tip, and a spring-damper contact per hand whose reaction force is the
"sensor" reading.  Everything is linearized about the optimized terminal
force state, so the simulation starts in exact equilibrium.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PlateModel
from .grasp_db import PUSH, SuctionConfig


@dataclass(frozen=True)
class ControllerParams:
    """Velocity-form impedance gains: M_d vdot + B_d (V-V_d) + K_d integral = E."""

    m_d: float = 1.0
    b_d: float = 2.0
    k_d: float = 1.0
    v_d: float = 0.0
    dt: float = 0.008
    v_floor: float | None = 0.0          # None disables the clamp
    integral_limit: float | None = 0.5   # None disables the clamp

    def __post_init__(self):
        if self.m_d <= 0 or self.b_d < 0 or self.k_d < 0 or self.dt <= 0:
            raise ValueError("controller gains out of range")


@dataclass(frozen=True)
class ControllerState:
    v: float = 0.0
    integral: float = 0.0
    last_e: float = 0.0


def controller_step(state: ControllerState, e: float,
                    params: ControllerParams) -> tuple:
    """One explicit first-order step of the impedance law.

    Returns (v_out, new_state).  The velocity state itself sits on the
    floor whenever the law pushes below it, so there is no wind-down to
    climb out of when the error turns positive again; with v_floor=None
    the integrator matches the continuous equation.
    """
    vdot = (e - params.b_d * (state.v - params.v_d)
            - params.k_d * state.integral) / params.m_d
    v = state.v + params.dt * vdot
    if params.v_floor is not None and v < params.v_floor:
        v = params.v_floor      # hold the state at the floor: no wind-down
    integral = state.integral + params.dt * (v - params.v_d)
    lim = params.integral_limit
    if lim is not None:
        integral = min(max(integral, -lim), lim)
    return v, ControllerState(v, integral, e)


@dataclass(frozen=True)
class LifterProfile:
    """Piecewise-constant cable speed segments, optionally jittered."""

    segments: tuple    # ((duration_s, speed_m_s), ...)
    jitter_sigma: float = 0.0

    def __post_init__(self):
        segs = tuple((float(d), float(s)) for d, s in self.segments)
        if any(d <= 0 for d, _ in segs):
            raise ValueError("profile segment durations must be positive")
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return sum(d for d, _ in self.segments)

    def speed_at(self, t: float) -> float:
        acc = 0.0
        for d, s in self.segments:
            acc += d
            if t < acc:
                return s
        return 0.0


def zero_profile(duration: float = 3.0) -> LifterProfile:
    return LifterProfile(((duration, 0.0),))


def default_profile() -> LifterProfile:
    """Uneven start-stop lifting, the shape a human makes on the up switch.

    Bursts stay slow (<= 0.045 m/s) so the pad keeps tension margin while the
    hands chase; the long final idle lets the stack settle to equilibrium.
    """
    return LifterProfile(((0.4, 0.0), (0.25, 0.02), (0.25, 0.04), (0.2, 0.02),
                          (0.3, 0.0), (0.25, 0.03), (0.25, 0.045), (0.2, 0.02),
                          (0.3, 0.0), (0.25, 0.025), (0.25, 0.04), (0.2, 0.02),
                          (0.35, 0.0), (0.25, 0.03), (0.25, 0.045),
                          (0.2, 0.025), (0.3, 0.0), (0.2, 0.03), (0.25, 0.04),
                          (0.2, 0.02), (1.8, 0.0)),
                         jitter_sigma=0.002)


def profile_from_doc(doc: dict) -> LifterProfile:
    return LifterProfile(tuple((seg[0], seg[1]) for seg in doc["segments"]),
                         jitter_sigma=float(doc.get("jitter_sigma", 0.0)))


@dataclass(frozen=True)
class PlantParams:
    """Spring-damper constants of the lifter-plate-hands assembly."""

    plate: PlateModel
    suction: SuctionConfig
    k_pad: float = 5000.0
    c_pad: float = 50.0
    k_hand: float = 20000.0
    c_hand: float = 100.0
    k_rot: float = 50.0     # pad bending stiffness against plate tilt
    c_rot: float = 5.0
    noise_sigma: float = 0.2
    seed: int = 0
    vacuum_limit: float | None = None   # defaults to suction.max_force
    transient_window: float = 0.25      # tolerated over-tension time (s)
    substep: float = 0.001

    @property
    def limit(self) -> float:
        return self.suction.max_force if self.vacuum_limit is None \
            else self.vacuum_limit


def red_line(plate: PlateModel, suction: SuctionConfig,
             gravity: float = 9.81) -> float:
    """Minimum hand-force sum: plate weight beyond what the cup can carry."""
    return max(0.0, plate.mass * gravity - suction.max_force)


def target_forces(terminal_node) -> dict:
    """Per-hand vertical force target from the terminal node's optimization."""
    sol = getattr(terminal_node, "solution", None)
    if sol is None or not sol.feasible:
        raise ValueError("terminal node carries no feasible force solution")
    by_label = {c.label: c for c in terminal_node.contacts}
    out = {}
    for p in terminal_node.rconf.placements:
        total = 0.0
        for k in range(len(p.points)):
            c = by_label[f"{p.placement_id}.{k}"]
            w = sol.wrenches[c.label]
            total += float((c.rotation @ w.force)[2])
        out[p.hand] = total
    return out


def suction_share(terminal_node) -> float:
    """Vertical force the pad carries in the terminal solution."""
    by_label = {c.label: c for c in terminal_node.contacts}
    c = by_label["suction"]
    w = terminal_node.solution.wrenches["suction"]
    return float((c.rotation @ w.force)[2])


@dataclass
class _HandChannel:
    name: str
    lever: np.ndarray   # attach point minus CoM, plate frame at the NC pose
    f0: float           # equilibrium vertical force
    unilateral: bool


@dataclass
class Trace:
    time: np.ndarray
    f_push: np.ndarray
    f_grip: np.ndarray
    f_sum: np.ndarray
    v_out: np.ndarray
    lifter_height: np.ndarray
    pad_tension: np.ndarray
    red_line: float
    status: str                 # 'success' | 'detached'
    failure_time: float | None
    targets: dict               # hand -> F_goal

    def to_csv(self) -> str:
        lines = ["time,F_push,F_grip,F_sum,V_out,lifter_height,pad_tension,red_line"]
        for i in range(len(self.time)):
            row = (self.time[i], self.f_push[i], self.f_grip[i], self.f_sum[i],
                   self.v_out[i], self.lifter_height[i], self.pad_tension[i],
                   self.red_line)
            lines.append(",".join(format(x, ".9g") for x in row))
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        doc = {"status": self.status, "red_line": self.red_line,
               "targets": {k: float(v) for k, v in sorted(self.targets.items())},
               "steps": int(len(self.time))}
        if self.failure_time is not None:
            doc["failure_time"] = float(self.failure_time)
        return doc


def _hand_channels(terminal_node) -> list:
    targets = target_forces(terminal_node)
    com = terminal_node.contact.com_world
    channels = []
    for p in terminal_node.rconf.placements:
        pts = [c.position for c in terminal_node.contacts
               if c.label.startswith(p.placement_id + ".")]
        attach = np.mean(np.asarray(pts), axis=0)
        channels.append(_HandChannel(p.hand, attach - com, targets[p.hand],
                                     p.hand == PUSH))
    return channels


def simulate_lift(terminal_node, profile: LifterProfile,
                  controller: ControllerParams, plant: PlantParams,
                  duration: float | None = None) -> Trace:
    """Fixed-step closed-loop lift from the terminal manipulation state.

    Each control period: read the pushing hand's (noisy) force, form the
    error against its optimized target, take one controller step, and drive
    both hand height commands with the output speed while the cable follows
    the profile.  The plate is substepped between control instants.  Pad
    tension above the vacuum limit for longer than the transient window ends
    the run as a detachment failure.
    """
    if duration is None:
        duration = profile.duration
    if duration <= 0:
        raise ValueError("duration must be positive")
    channels = _hand_channels(terminal_node)
    if not channels:
        raise ValueError("terminal node has no hand placements to follow")
    follow = next((ch for ch in channels if ch.name == PUSH), channels[0])

    plate = plant.plate
    suction = plant.suction
    m = plate.mass
    inertia = plate.box_inertia()
    ix, iy = float(inertia[0]), float(inertia[1])
    com = terminal_node.contact.com_world
    pad_lever = terminal_node.contact.pose.transform_point(suction.position) - com
    t0 = suction_share(terminal_node)
    rng = np.random.default_rng(plant.seed)

    n = int(round(duration / controller.dt))
    sub = max(1, int(round(controller.dt / plant.substep)))
    h = controller.dt / sub

    # plate state: heave u, roll phi, pitch theta (deviations from start)
    u = du = phi = dphi = theta = dtheta = 0.0
    cable = 0.0      # cable tip travel
    cmd = 0.0        # shared hand command travel
    state = ControllerState(v=0.0, integral=0.0, last_e=0.0)
    over_since: float | None = None
    status, failure_time = "success", None

    def point_height(lever, u, phi, theta):
        return u + phi * lever[1] - theta * lever[0]

    def point_rate(lever, du, dphi, dtheta):
        return du + dphi * lever[1] - dtheta * lever[0]

    def forces(cable_rate, cmd_rate):
        pad_h = point_height(pad_lever, u, phi, theta)
        pad_r = point_rate(pad_lever, du, dphi, dtheta)
        tension = t0 + plant.k_pad * (cable - pad_h) \
            + plant.c_pad * (cable_rate - pad_r)
        hand_f = []
        for ch in channels:
            hh = point_height(ch.lever, u, phi, theta)
            hr = point_rate(ch.lever, du, dphi, dtheta)
            f = ch.f0 + plant.k_hand * (cmd - hh) + plant.c_hand * (cmd_rate - hr)
            if ch.unilateral and f < 0.0:
                f = 0.0
            hand_f.append(f)
        return tension, hand_f

    rows = {k: [] for k in ("t", "fp", "fg", "fs", "v", "lh", "pt")}

    speed = 0.0
    v_out = 0.0
    # The force gauges integrate over each control period (anti-aliased
    # reading); at k=0 there is no previous period, so sample in place.
    acc_t = 0.0
    acc_f = [0.0] * len(channels)
    nacc = 0
    for k in range(n + 1):
        t = k * controller.dt
        if nacc == 0:
            tension, hand_f = forces(speed, v_out)
        else:
            tension = acc_t / nacc
            hand_f = [a / nacc for a in acc_f]
        # both sensor draws happen every step so traces stay reproducible
        # when a hand is absent
        noise = rng.normal(0.0, plant.noise_sigma, size=2) \
            if plant.noise_sigma > 0 else np.zeros(2)
        true_f = {"push": 0.0, "grip": 0.0}
        for ch, f in zip(channels, hand_f):
            true_f[ch.name] = f
        sensed = true_f[follow.name] + noise[0 if follow.name == PUSH else 1]
        e = follow.f0 - sensed
        v_out, state = controller_step(state, e, controller)

        rows["t"].append(t)
        rows["fp"].append(true_f["push"])
        rows["fg"].append(true_f["grip"])
        rows["fs"].append(true_f["push"] + true_f["grip"])
        rows["v"].append(v_out)
        rows["lh"].append(cable)
        rows["pt"].append(tension)
        if k == n or status != "success":
            break

        speed = profile.speed_at(t)
        if profile.jitter_sigma > 0 and speed != 0.0:
            # winch speed wobbles while driving; the brake holds at rest
            speed += rng.normal(0.0, profile.jitter_sigma)
        acc_t = 0.0
        acc_f = [0.0] * len(channels)
        nacc = 0
        for _ in range(sub):
            tension, hand_f = forces(speed, v_out)
            acc_t += tension
            for i, f in enumerate(hand_f):
                acc_f[i] += f
            nacc += 1
            fz = (tension - t0) + sum(f - ch.f0
                                      for ch, f in zip(channels, hand_f))
            tx = (tension - t0) * pad_lever[1] - plant.k_rot * phi \
                - plant.c_rot * dphi
            ty = -(tension - t0) * pad_lever[0] - plant.k_rot * theta \
                - plant.c_rot * dtheta
            for ch, f in zip(channels, hand_f):
                tx += (f - ch.f0) * ch.lever[1]
                ty -= (f - ch.f0) * ch.lever[0]
            du += h * fz / m
            dphi += h * tx / ix
            dtheta += h * ty / iy
            u += h * du
            phi += h * dphi
            theta += h * dtheta
            cable += h * speed
            cmd += h * v_out
            tt = t + h
            if tension > plant.limit:
                if over_since is None:
                    over_since = tt
                elif tt - over_since > plant.transient_window:
                    status, failure_time = "detached", over_since
                    break
            else:
                over_since = None

    targets = {ch.name: ch.f0 for ch in channels}
    return Trace(np.array(rows["t"]), np.array(rows["fp"]),
                 np.array(rows["fg"]), np.array(rows["fs"]),
                 np.array(rows["v"]), np.array(rows["lh"]),
                 np.array(rows["pt"]),
                 red_line(plate, suction), status, failure_time, targets)
