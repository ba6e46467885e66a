//! The upper-body cascade for one control tick: task-space wrench per hand,
//! joint-space projection and blending, clamped integration.
//!
//! The robot is position controlled; joint positions are assumed to track
//! the previous command exactly, so `q` is always the last `q_c`.

use nalgebra::{Vector3, Vector6};

use crate::choreography::SignalAction;
use crate::error::{Error, Result};
use crate::jointspace::{
    command_velocity, integrate_command, joint_impedance, project_with_jacobians, update_blend, JointCommandState,
    JointGains,
};
use crate::model::{forward_kinematics, pose_and_jacobian, HandId, JointVector, KinematicModel, Pose, Twist};
use crate::taskspace::{impedance_wrench, task_wrench, update_fade, FadeState, TaskGains, Wrench};

/// Per-hand quantities computed during a tick.
#[derive(Clone, Debug, PartialEq)]
pub struct HandOutput {
    pub pose: Pose,
    pub twist: Twist,
    pub setpoint: Pose,
    pub pose_error: Vector6<f64>,
    pub velocity_error: Twist,
    pub measured: Wrench,
    pub applied: Wrench,
    pub impedance: Wrench,
    pub virtual_wrench: Wrench,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub hands: Vec<HandOutput>,
    /// Joint positions at the start of the tick.
    pub q: JointVector,
    pub q_desired: JointVector,
    pub tau_admittance: JointVector,
    pub tau_impedance: JointVector,
}

#[derive(Clone, Debug)]
pub struct UpperBodyController {
    model: KinematicModel,
    task_gains: TaskGains,
    joint_gains: JointGains,
    fade: FadeState,
    command: JointCommandState,
    /// Measured joint velocity (realized change of the command per tick).
    qdot: JointVector,
    hold_poses: Vec<Pose>,
    prev_setpoints: Vec<Vector3<f64>>,
    torso_yaw_index: Option<usize>,
}

impl UpperBodyController {
    /// Starts at rest in the model's hold posture, holding each hand at its
    /// hold pose.
    pub fn new(model: KinematicModel, task_gains: TaskGains, joint_gains: JointGains) -> Result<Self> {
        task_gains.validate()?;
        joint_gains.validate()?;
        if joint_gains.stiffness.len() != model.dof() {
            return Err(Error::config("joint gains do not match the model"));
        }
        let q = model.hold_posture().clone();
        let hold_poses = model
            .hands()
            .map(|h| forward_kinematics(&model, &q, h))
            .collect::<Result<Vec<_>>>()?;
        let torso_yaw_index = model.joint_index("torso_yaw").or_else(|| model.torso_range().next());
        Ok(UpperBodyController {
            fade: FadeState::new(model.hand_count()),
            command: JointCommandState::at_rest(q.clone(), &joint_gains),
            qdot: JointVector::zeros(model.dof()),
            prev_setpoints: hold_poses.iter().map(|p| p.position).collect(),
            hold_poses,
            torso_yaw_index,
            model,
            task_gains,
            joint_gains,
        })
    }

    pub fn model(&self) -> &KinematicModel {
        &self.model
    }

    pub fn task_gains(&self) -> &TaskGains {
        &self.task_gains
    }

    pub fn joint_gains(&self) -> &JointGains {
        &self.joint_gains
    }

    pub fn fade(&self) -> &FadeState {
        &self.fade
    }

    pub fn command(&self) -> &JointCommandState {
        &self.command
    }

    pub fn q(&self) -> &JointVector {
        &self.command.q_c
    }

    pub fn qdot(&self) -> &JointVector {
        &self.qdot
    }

    /// Hold pose of `hand`, the unshifted setpoint.
    pub fn hold_pose(&self, hand: HandId) -> &Pose {
        &self.hold_poses[hand.index()]
    }

    /// Current hand pose and twist in the base frame.
    pub fn hand_state(&self, hand: HandId) -> Result<(Pose, Twist)> {
        let (pose, jac) = pose_and_jacobian(&self.model, &self.command.q_c, hand)?;
        Ok((
            pose,
            Twist::from_vector(&(jac * &self.qdot).fixed_rows::<6>(0).into_owned()),
        ))
    }

    /// Runs one tick with base-frame `measured` wrenches and the current
    /// signal outputs.
    pub fn step(&mut self, measured: &[Wrench], action: &SignalAction, dt: f64) -> Result<TickOutput> {
        let n_h = self.model.hand_count();
        if measured.len() != n_h || action.applied.len() != n_h {
            return Err(Error::config(format!("controller expects {n_h} hands")));
        }
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::config("timestep must be > 0"));
        }
        let q = self.command.q_c.clone();
        let mut jacobians = Vec::with_capacity(n_h);
        let mut hands = Vec::with_capacity(n_h);
        let mut wrenches = Vec::with_capacity(n_h);
        for hand in self.model.hands() {
            let i = hand.index();
            let (pose, jac) = pose_and_jacobian(&self.model, &q, hand)?;
            let twist = Twist::from_vector(&(&jac * &self.qdot).fixed_rows::<6>(0).into_owned());
            let setpoint = self.hold_poses[i].translated(&action.setpoint_offset[i]);
            let setpoint_velocity = (setpoint.position - self.prev_setpoints[i]) / dt;
            self.prev_setpoints[i] = setpoint.position;
            let pose_error = pose.difference(&setpoint);
            let velocity_error = Twist {
                linear: twist.linear - setpoint_velocity,
                angular: twist.angular,
            };
            let fade = update_fade(
                &self.task_gains,
                &self.fade.hands[i],
                &measured[i],
                &action.applied_axes[i],
                dt,
            );
            let virtual_wrench = task_wrench(
                &self.task_gains,
                &fade,
                &measured[i],
                &pose_error,
                &velocity_error,
                &action.applied[i],
            );
            let impedance = impedance_wrench(&self.task_gains, &fade, &pose_error, &velocity_error);
            self.fade.hands[i] = fade;
            wrenches.push(virtual_wrench);
            jacobians.push(jac);
            hands.push(HandOutput {
                pose,
                twist,
                setpoint,
                pose_error,
                velocity_error,
                measured: measured[i],
                applied: action.applied[i],
                impedance,
                virtual_wrench,
            });
        }

        let tau_admittance = project_with_jacobians(&jacobians, &wrenches)?;
        let over: Vec<bool> = self.fade.hands.iter().map(|h| h.over_threshold).collect();
        self.command = update_blend(&self.joint_gains, &self.command, &over, dt);

        let mut q_desired = self.model.hold_posture().clone();
        if let Some(i) = self.torso_yaw_index {
            q_desired[i] += action.torso_yaw_offset;
        }
        let tau_impedance = joint_impedance(&self.joint_gains, &(&q - &q_desired), &self.qdot);
        let qdot_c = command_velocity(&self.joint_gains, &self.command, &tau_admittance, &tau_impedance);
        self.command = integrate_command(&self.model, &self.command, &qdot_c, dt);
        self.qdot = (&self.command.q_c - &q) / dt;

        Ok(TickOutput {
            hands,
            q,
            q_desired,
            tau_admittance,
            tau_impedance,
        })
    }
}
