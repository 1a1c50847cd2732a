"""
Planar kinematics and constrained dynamics of the hopper.

The closed chain through the pneumatic cylinders is removed by coordinate reduction:
the cylinder length ``d`` is an analytic function of the knee angle, so the pneumatic
force enters through ``B_p = (dd/dq)^T`` and only the foot contact appears as a
constraint.
"""

import math

import numpy as np

from error import SingularConfigurationError
from schema.enums import ContactMode
from schema.robot import DynamicsTerms, LegKinematics, RobotModel, RobotState


SINGULAR_LEVER = 1e-6


def _down(theta: float) -> np.ndarray:
    """Unit vector at angle theta from the downward vertical."""
    return np.array([math.sin(theta), -math.cos(theta)])


def _down_prime(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def projected_mass(boom_inertia: float, boom_radius: float, robot_mass: float) -> float:
    """
    Effective translational mass of the robot plus boom at the hip.

    :param float boom_inertia: Boom inertia about its pivot (kg m^2).
    :param float boom_radius: Pivot-to-hip radius (m).
    :param float robot_mass: Robot mass (kg).
    :return float: m~ = robot_mass + boom_inertia / boom_radius^2.
    """
    if boom_radius <= 0.0 or robot_mass <= 0.0 or boom_inertia < 0.0:
        raise ValueError("boom radius and robot mass must be positive, boom inertia non-negative")
    return robot_mass + boom_inertia / boom_radius**2


def pneumatic_length(model: RobotModel, q_knee: float) -> tuple[float, float]:
    """
    Distance between the pneumatic mounts and its derivative in the knee angle.

    :param RobotModel model: The robot.
    :param float q_knee: Knee angle (rad).
    :return tuple[float, float]: ``(d, dd/dq_knee)``.
    """
    u_t, w_t = model.thigh_attach
    u_s, w_s = model.shank_attach
    s, c = math.sin(q_knee), math.cos(q_knee)
    delta = np.array([u_s * s + w_s * c - w_t, -model.thigh_length - u_s * c + w_s * s + u_t])
    delta_prime = np.array([u_s * c - w_s * s, u_s * s + w_s * c])
    d = float(np.linalg.norm(delta))
    return d, float(delta @ delta_prime) / d


def joint_compression(model: RobotModel, q_knee: float) -> tuple[float, float]:
    """Prismatic joint compression from full leg extension and its knee derivative."""
    d_ext, _ = pneumatic_length(model, model.knee_min)
    d, slope = pneumatic_length(model, q_knee)
    return d_ext - d, -slope


def leg_length(model: RobotModel, q_knee: float) -> float:
    l_t, l_s = model.thigh_length, model.shank_length
    return math.sqrt(l_t * l_t + l_s * l_s + 2.0 * l_t * l_s * math.cos(q_knee))


def knee_for_length(model: RobotModel, length: float) -> float:
    """Knee angle giving leg length ``length`` (inverse law of cosines)."""
    l_t, l_s = model.thigh_length, model.shank_length
    cosine = (length * length - l_t * l_t - l_s * l_s) / (2.0 * l_t * l_s)
    return math.acos(min(max(cosine, -1.0), 1.0))


def leg_range(model: RobotModel) -> tuple[float, float, float]:
    """
    Leg length range and joint compression range over the knee limits.

    :param RobotModel model: The robot.
    :return tuple[float, float, float]: ``(L_min, L_max, x_joint_max)``.
    """
    x_max, _ = joint_compression(model, model.knee_max)
    return leg_length(model, model.knee_max), leg_length(model, model.knee_min), x_max


def point_mass_transmission(model: RobotModel) -> float:
    """Joint compression per unit leg shortening, averaged over the leg range."""
    leg_min, leg_max, x_max = leg_range(model)
    return x_max / (leg_max - leg_min)


def nominal_leg_lever(model: RobotModel) -> float:
    """|dL/dq_knee| at the middle of the knee range (m/rad)."""
    q_knee = 0.5 * (model.knee_min + model.knee_max)
    length = leg_length(model, q_knee)
    return model.thigh_length * model.shank_length * math.sin(q_knee) / length


def foot_position(model: RobotModel, q: np.ndarray) -> np.ndarray:
    theta1, theta2 = q[2], q[2] + q[3]
    return q[:2] + model.thigh_length * _down(theta1) + model.shank_length * _down(theta2)


def leg_kinematics(model: RobotModel, q: np.ndarray) -> LegKinematics:
    """
    Leg length, leg angle, pneumatic length and their gradients.

    :param RobotModel model: The robot.
    :param np.ndarray q: Generalized coordinates.
    :return LegKinematics: Outputs with gradients; ``singular`` flags a straight leg.
    """
    l_t, l_s = model.thigh_length, model.shank_length
    q_knee = q[3]
    length = leg_length(model, q_knee)
    phi = math.atan2(l_s * math.sin(q_knee), l_t + l_s * math.cos(q_knee))
    d, dd_dknee = pneumatic_length(model, q_knee)
    dL_dknee = -l_t * l_s * math.sin(q_knee) / length
    dphi_dknee = (l_t * l_s * math.cos(q_knee) + l_s * l_s) / (length * length)
    return LegKinematics(
        L=length,
        q_leg=q[2] + phi,
        d=d,
        dL_dq=[0.0, 0.0, 0.0, dL_dknee],
        dqleg_dq=[0.0, 0.0, 1.0, dphi_dknee],
        dd_dq=[0.0, 0.0, 0.0, dd_dknee],
        singular=abs(dL_dknee) < SINGULAR_LEVER,
    )


def task_jacobian(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Jacobian of ``y = [q_leg, L]`` with respect to ``[q_hip, q_knee]``."""
    kin = leg_kinematics(model, q)
    return np.array([kin.dqleg_dq[2:], kin.dL_dq[2:]])


def foot_jacobian(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """
    Jacobian of the hip position relative to the foot with respect to ``[q_hip, q_knee]``.

    Joint torques ``J_f^T @ F`` produce the force ``F`` on the hip while the foot is
    pinned.
    """
    theta1, theta2 = q[2], q[2] + q[3]
    shank = model.shank_length * _down_prime(theta2)
    return -np.column_stack([model.thigh_length * _down_prime(theta1) + shank, shank])


def _point_jacobians(model: RobotModel, q: np.ndarray, qdot: np.ndarray):
    """Translational (mass, J, Jdot) triples and rotational (inertia, J_omega) pairs."""
    theta1, theta2 = q[2], q[2] + q[3]
    w1, w2 = qdot[2], qdot[2] + qdot[3]
    l_t = model.thigh_length
    c_t, c_s = model.thigh_com, model.shank_com

    body = np.zeros((2, 4))
    body[:, :2] = np.eye(2)

    thigh = body.copy()
    thigh[:, 2] = c_t * _down_prime(theta1)
    thigh_dot = np.zeros((2, 4))
    thigh_dot[:, 2] = -c_t * _down(theta1) * w1

    shank = body.copy()
    shank[:, 2] = l_t * _down_prime(theta1) + c_s * _down_prime(theta2)
    shank[:, 3] = c_s * _down_prime(theta2)
    shank_dot = np.zeros((2, 4))
    shank_dot[:, 2] = -l_t * _down(theta1) * w1 - c_s * _down(theta2) * w2
    shank_dot[:, 3] = -c_s * _down(theta2) * w2

    translational = [
        (model.body_mass, body, np.zeros((2, 4))),
        (model.thigh_mass, thigh, thigh_dot),
        (model.shank_mass, shank, shank_dot),
    ]
    rotational = [
        (model.thigh_inertia, np.array([0.0, 0.0, 1.0, 0.0])),
        (model.shank_inertia, np.array([0.0, 0.0, 1.0, 1.0])),
    ]
    return translational, rotational


def contact_jacobian(model: RobotModel, q: np.ndarray, qdot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Foot position Jacobian and the drift term ``Jdot @ qdot``."""
    theta1, theta2 = q[2], q[2] + q[3]
    w1, w2 = qdot[2], qdot[2] + qdot[3]
    l_t, l_s = model.thigh_length, model.shank_length
    jac = np.zeros((2, 4))
    jac[:, :2] = np.eye(2)
    jac[:, 2] = l_t * _down_prime(theta1) + l_s * _down_prime(theta2)
    jac[:, 3] = l_s * _down_prime(theta2)
    drift = -l_t * _down(theta1) * w1 * w1 - l_s * _down(theta2) * w2 * w2
    return jac, drift


def _mass_terms(model: RobotModel, q: np.ndarray, qdot: np.ndarray):
    """``(M, M_dot, C, G)`` assembled from the link Jacobians."""
    translational, rotational = _point_jacobians(model, q, qdot)
    mass = np.zeros((4, 4))
    mass_dot = np.zeros((4, 4))
    coriolis = np.zeros((4, 4))
    gravity = np.zeros(4)
    weight = np.array([0.0, model.gravity])
    for m, jac, jac_dot in translational:
        mass += m * jac.T @ jac
        coriolis += m * jac.T @ jac_dot
        mass_dot += m * (jac_dot.T @ jac + jac.T @ jac_dot)
        gravity += m * jac.T @ weight
    for inertia, omega in rotational:
        mass += inertia * np.outer(omega, omega)
    return mass, mass_dot, coriolis, gravity


def _actuation(model: RobotModel) -> np.ndarray:
    actuation = np.zeros((4, 2))
    actuation[2, 0] = 1.0
    actuation[3, 1] = model.knee_transmission
    return actuation


def dynamics_terms(model: RobotModel, state: RobotState) -> DynamicsTerms:
    """
    Mass matrix, bias, gravity, actuation maps and contact rows at ``state``.

    :param RobotModel model: The robot.
    :param RobotState state: The state; stance adds the two foot contact rows.
    :return DynamicsTerms: The dynamics terms.
    """
    q, qdot = state.q, state.qdot
    mass, mass_dot, coriolis, gravity = _mass_terms(model, q, qdot)
    actuation = _actuation(model)
    _, dd_dknee = pneumatic_length(model, q[3])

    if state.mode is ContactMode.STANCE:
        jac_h, drift = contact_jacobian(model, q, qdot)
    else:
        jac_h, drift = np.zeros((0, 4)), np.zeros(0)

    return DynamicsTerms(
        M=mass,
        M_dot=mass_dot,
        C=coriolis,
        bias=coriolis @ qdot,
        G=gravity,
        B_m=actuation,
        B_p=[0.0, 0.0, 0.0, dd_dknee],
        J_h=jac_h,
        J_h_dot_qdot=drift,
    )


def knee_stop_torque(model: RobotModel, q_knee: float, q_knee_dot: float) -> float:
    """Unilateral spring-damper torque outside the knee range; never pulls into the stop."""
    if q_knee < model.knee_min:
        torque = model.knee_stop_stiffness * (model.knee_min - q_knee) - model.knee_stop_damping * q_knee_dot
        return max(torque, 0.0)
    if q_knee > model.knee_max:
        torque = -model.knee_stop_stiffness * (q_knee - model.knee_max) - model.knee_stop_damping * q_knee_dot
        return min(torque, 0.0)
    return 0.0


def motor_torque_limits(model: RobotModel, motor_speed: float) -> tuple[float, float]:
    """
    Torque–speed envelope of one motor.

    Driving torque falls linearly to zero at the no-load speed and the motor coasts
    beyond it; braking torque is capped at stall.

    :param RobotModel model: The robot.
    :param float motor_speed: Motor shaft speed (rad/s).
    :return tuple[float, float]: Lowest and highest admissible torque (N m).
    """
    ratio = motor_speed / model.motor_speed_limit
    stall = model.motor_torque_limit
    high = stall * min(max(1.0 - ratio, 0.0), 1.0)
    low = -stall * min(max(1.0 + ratio, 0.0), 1.0)
    return low, high


def motor_speeds(model: RobotModel, qdot: np.ndarray) -> np.ndarray:
    """Hip and knee motor shaft speeds."""
    return np.array([qdot[2], qdot[3] * model.belt_ratio])


def generalized_force(
    model: RobotModel,
    terms: DynamicsTerms,
    state: RobotState,
    tau_m: np.ndarray,
    f_pneu: float,
) -> np.ndarray:
    """Right-hand side ``B_m*tau + B_p*F + stop torque - C*qdot - G``."""
    rhs = terms.B_m @ np.asarray(tau_m, dtype=float) + terms.B_p * f_pneu - terms.bias - terms.G
    rhs[3] += knee_stop_torque(model, state.q[3], state.qdot[3])
    return rhs


def _solve_contact(
    mass: np.ndarray, rhs: np.ndarray, jac_h: np.ndarray, drift: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    rows = jac_h.shape[0]
    if rows == 0:
        return np.linalg.solve(mass, rhs), np.zeros(0)
    if np.linalg.matrix_rank(jac_h) < rows:
        raise SingularConfigurationError("contact Jacobian is rank deficient")
    kkt = np.zeros((4 + rows, 4 + rows))
    kkt[:4, :4] = mass
    kkt[:4, 4:] = -jac_h.T
    kkt[4:, :4] = jac_h
    solution = np.linalg.solve(kkt, np.concatenate([rhs, -drift]))
    return solution[:4], solution[4:]


def constrained_accel(
    model: RobotModel,
    state: RobotState,
    tau_m: np.ndarray,
    f_pneu: float,
    terms: DynamicsTerms | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Solve the contact-constrained equations of motion.

    :param RobotModel model: The robot.
    :param RobotState state: The state; aerial states have no contact rows.
    :param np.ndarray tau_m: Motor torques ``[hip, per-knee-motor]`` (N m).
    :param float f_pneu: Lumped pneumatic joint force (N).
    :param DynamicsTerms terms: Precomputed terms at ``state``.
    :return tuple: ``(qddot, F_h)`` with ``F_h`` the ground reaction on the foot.
    :raises SingularConfigurationError: If the contact rows are rank deficient.
    """
    terms = terms or dynamics_terms(model, state)
    rhs = generalized_force(model, terms, state, tau_m, f_pneu)
    return _solve_contact(terms.M, rhs, terms.J_h, terms.J_h_dot_qdot)


def equations_of_motion(
    model: RobotModel,
    q: np.ndarray,
    qdot: np.ndarray,
    stance: bool,
    tau_m: np.ndarray,
    f_pneu: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Array-level ``constrained_accel`` for the integrator's inner loop.

    :return tuple: ``(qddot, F_h, stop_torque)``.
    """
    mass, _, coriolis, gravity = _mass_terms(model, q, qdot)
    _, dd_dknee = pneumatic_length(model, q[3])
    stop = knee_stop_torque(model, q[3], qdot[3])
    rhs = _actuation(model) @ tau_m - coriolis @ qdot - gravity
    rhs[3] += dd_dknee * f_pneu + stop
    if stance:
        jac_h, drift = contact_jacobian(model, q, qdot)
    else:
        jac_h, drift = np.zeros((0, 4)), np.zeros(0)
    qddot, force = _solve_contact(mass, rhs, jac_h, drift)
    return qddot, force, stop


def solve_impact(mass: np.ndarray, jac: np.ndarray, qdot_pre: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Plastic impact: ``M*(qdot+ - qdot-) = J^T*F``, ``J*qdot+ = 0``.

    :param np.ndarray mass: Mass matrix.
    :param np.ndarray jac: Constraint Jacobian.
    :param np.ndarray qdot_pre: Pre-impact velocity.
    :return tuple: ``(qdot_post, impulse)``.
    :raises SingularConfigurationError: If the block system is singular.
    """
    n, rows = mass.shape[0], jac.shape[0]
    block = np.zeros((n + rows, n + rows))
    block[:n, :n] = mass
    block[:n, n:] = -jac.T
    block[n:, :n] = jac
    rhs = np.concatenate([mass @ qdot_pre, np.zeros(rows)])
    try:
        solution = np.linalg.solve(block, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError("impact block system is singular") from exc
    return solution[:n], solution[n:]


def impact_map(model: RobotModel, state_pre: RobotState) -> tuple[np.ndarray, np.ndarray]:
    """Post-touchdown velocity and contact impulse for ``state_pre``."""
    stance = state_pre.model_copy(update={"mode": ContactMode.STANCE})
    terms = dynamics_terms(model, stance)
    return solve_impact(terms.M, terms.J_h, state_pre.qdot)


def kinetic_energy(model: RobotModel, state: RobotState) -> float:
    terms = dynamics_terms(model, state.model_copy(update={"mode": ContactMode.AERIAL}))
    return 0.5 * float(state.qdot @ terms.M @ state.qdot)


def potential_energy(model: RobotModel, state: RobotState) -> float:
    q = state.q
    theta1, theta2 = q[2], q[2] + q[3]
    z_thigh = q[1] - model.thigh_com * math.cos(theta1)
    z_shank = q[1] - model.thigh_length * math.cos(theta1) - model.shank_com * math.cos(theta2)
    return model.gravity * (model.body_mass * q[1] + model.thigh_mass * z_thigh + model.shank_mass * z_shank)
