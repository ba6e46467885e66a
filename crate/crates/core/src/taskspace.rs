//! Per-hand virtual wrench: admittance on the measured wrench, a Cartesian
//! impedance toward the hand setpoint, and a scheduled applied wrench.
//!
//! The impedance term is scaled by two faded quantities. `lambda` drops to
//! zero while the measured wrench is over threshold (contact yields to the
//! human) and `mu` drops to zero per axis while an applied wrench is being
//! ramped up on that axis, so the impedance does not cancel it.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Twist;

/// Six-axis selection in the order fx, fy, fz, mx, my, mz.
pub type AxisMask = [bool; 6];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Wrench {
            force,
            moment: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Wrench {
            force: Vector3::new(v[0], v[1], v[2]),
            moment: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }

    /// Axes carrying a nonzero component.
    pub fn active_axes(&self) -> AxisMask {
        let v = self.to_vector();
        std::array::from_fn(|i| v[i] != 0.0)
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            moment: self.moment + rhs.moment,
        }
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force - rhs.force,
            moment: self.moment - rhs.moment,
        }
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench {
            force: -self.force,
            moment: -self.moment,
        }
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, s: f64) -> Wrench {
        Wrench {
            force: self.force * s,
            moment: self.moment * s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskGains {
    /// Diagonal admittance gains (dimensionless).
    pub admittance: [f64; 6],
    /// Diagonal stiffness, N/m then N·m/rad.
    pub stiffness: [f64; 6],
    /// Diagonal damping, N·s/m then N·m·s/rad.
    pub damping: [f64; 6],
    /// Contact threshold on the measured force norm (N).
    pub force_threshold: f64,
    /// Contact threshold on the measured moment norm (N·m).
    pub moment_threshold: f64,
    /// Time for a full 0↔1 swing of the fade values (s).
    pub fade_duration: f64,
}

impl Default for TaskGains {
    fn default() -> Self {
        TaskGains {
            admittance: [0.05; 6],
            stiffness: [300.0, 300.0, 300.0, 10.0, 10.0, 10.0],
            damping: [0.1, 0.1, 0.1, 0.05, 0.05, 0.05],
            force_threshold: 5.0,
            moment_threshold: 1.5,
            fade_duration: 0.5,
        }
    }
}

impl TaskGains {
    pub fn validate(&self) -> Result<()> {
        let all = self.admittance.iter().chain(&self.stiffness).chain(&self.damping);
        if !all.clone().all(|g| g.is_finite() && *g >= 0.0) {
            return Err(Error::config("task gains must be finite and >= 0"));
        }
        if !(self.force_threshold > 0.0 && self.moment_threshold > 0.0) {
            return Err(Error::config("wrench thresholds must be > 0"));
        }
        if !(self.fade_duration > 0.0 && self.fade_duration.is_finite()) {
            return Err(Error::config("fade_duration must be > 0"));
        }
        Ok(())
    }

    /// Force norm and moment norm are tested separately; either one over
    /// its threshold counts as contact.
    pub fn is_over_threshold(&self, measured: &Wrench) -> bool {
        measured.force.norm() >= self.force_threshold || measured.moment.norm() >= self.moment_threshold
    }
}

/// Fade values for one hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandFade {
    /// Impedance scale in [0, 1]; 0 while the hand is in contact.
    pub lambda: f64,
    /// Per-axis impedance scale in [0, 1]; 0 on applied-wrench axes.
    pub mu: [f64; 6],
    /// Contact flag from the most recent update.
    pub over_threshold: bool,
    /// Time since `over_threshold` last changed (s).
    pub since_transition: f64,
}

impl Default for HandFade {
    fn default() -> Self {
        HandFade {
            lambda: 1.0,
            mu: [1.0; 6],
            over_threshold: false,
            since_transition: 0.0,
        }
    }
}

/// Fade values for every hand, owned by the control loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadeState {
    pub hands: Vec<HandFade>,
}

impl FadeState {
    pub fn new(hand_count: usize) -> Self {
        FadeState {
            hands: vec![HandFade::default(); hand_count],
        }
    }

    pub fn any_over_threshold(&self) -> bool {
        self.hands.iter().any(|h| h.over_threshold)
    }
}

pub(crate) fn ramp_toward(value: f64, target: f64, max_step: f64) -> f64 {
    if value < target {
        (value + max_step).min(target)
    } else {
        (value - max_step).max(target)
    }
}

/// `G_T ∘ measured`.
pub fn admittance_wrench(gains: &TaskGains, measured: &Wrench) -> Wrench {
    let g = Vector6::from(gains.admittance);
    Wrench::from_vector(&g.component_mul(&measured.to_vector()))
}

/// `−λ·μ∘(K_P ∘ pose_err) − λ·μ∘(K_D ∘ vel_err)`.
pub fn impedance_wrench(gains: &TaskGains, fade: &HandFade, pose_err: &Vector6<f64>, vel_err: &Twist) -> Wrench {
    let scale = Vector6::from(fade.mu) * fade.lambda;
    let kp = Vector6::from(gains.stiffness).component_mul(&scale);
    let kd = Vector6::from(gains.damping).component_mul(&scale);
    let w = -kp.component_mul(pose_err) - kd.component_mul(&vel_err.to_vector());
    Wrench::from_vector(&w)
}

/// Advances one hand's fade values by `dt`. `applied_axes` marks the axes on
/// which an applied wrench is currently being asserted.
pub fn update_fade(
    gains: &TaskGains,
    fade: &HandFade,
    measured: &Wrench,
    applied_axes: &AxisMask,
    dt: f64,
) -> HandFade {
    debug_assert!(dt > 0.0);
    let step = dt / gains.fade_duration;
    let over = gains.is_over_threshold(measured);
    let lambda_target = if over { 0.0 } else { 1.0 };
    let mu = std::array::from_fn(|i| {
        let target = if applied_axes[i] { 0.0 } else { 1.0 };
        ramp_toward(fade.mu[i], target, step)
    });
    HandFade {
        lambda: ramp_toward(fade.lambda, lambda_target, step),
        mu,
        over_threshold: over,
        since_transition: if over == fade.over_threshold {
            fade.since_transition + dt
        } else {
            0.0
        },
    }
}

/// Sum of the admittance, faded impedance and applied wrenches.
pub fn task_wrench(
    gains: &TaskGains,
    fade: &HandFade,
    measured: &Wrench,
    pose_err: &Vector6<f64>,
    vel_err: &Twist,
    applied: &Wrench,
) -> Wrench {
    admittance_wrench(gains, measured) + impedance_wrench(gains, fade, pose_err, vel_err) + *applied
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gains() -> TaskGains {
        TaskGains {
            admittance: [1.0; 6],
            ..TaskGains::default()
        }
    }

    #[test]
    fn admittance_zero_in_zero_out() {
        assert_eq!(
            admittance_wrench(&TaskGains::default(), &Wrench::zero()),
            Wrench::zero()
        );
    }

    #[test]
    fn admittance_identity_gain() {
        let w = admittance_wrench(&unit_gains(), &Wrench::from_force(Vector3::new(1.5, 0.0, 0.0)));
        assert_eq!(w.force, Vector3::new(1.5, 0.0, 0.0));
    }

    #[test]
    fn admittance_scales_linearly() {
        let gains = TaskGains {
            admittance: [2.0; 6],
            ..TaskGains::default()
        };
        let w = admittance_wrench(&gains, &Wrench::from_force(Vector3::new(1.0, -1.0, 0.5)));
        assert_eq!(w.force, Vector3::new(2.0, -2.0, 1.0));
    }

    #[test]
    fn impedance_at_setpoint_is_zero() {
        let w = impedance_wrench(
            &TaskGains::default(),
            &HandFade::default(),
            &Vector6::zeros(),
            &Twist::zero(),
        );
        assert_eq!(w.to_vector(), Vector6::zeros());
    }

    #[test]
    fn impedance_gated_off() {
        let fade = HandFade {
            lambda: 0.0,
            ..HandFade::default()
        };
        let err = Vector6::new(0.1, -0.2, 0.3, 0.1, 0.1, 0.1);
        let vel = Twist::from_vector(&Vector6::repeat(0.5));
        let w = impedance_wrench(&TaskGains::default(), &fade, &err, &vel);
        assert!(w.to_vector().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn impedance_spring_value() {
        let gains = TaskGains {
            stiffness: [100.0, 100.0, 100.0, 10.0, 10.0, 10.0],
            damping: [0.0; 6],
            ..TaskGains::default()
        };
        let err = Vector6::new(0.05, 0.0, 0.0, 0.0, 0.0, 0.0);
        let w = impedance_wrench(&gains, &HandFade::default(), &err, &Twist::zero());
        assert_relative_eq!(w.force, Vector3::new(-5.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn fade_reaches_zero_after_full_duration() {
        let gains = TaskGains::default();
        let push = Wrench::from_force(Vector3::new(6.0, 0.0, 0.0));
        let f = update_fade(&gains, &HandFade::default(), &push, &[false; 6], gains.fade_duration);
        assert_eq!(f.lambda, 0.0);
        assert!(f.over_threshold);
    }

    #[test]
    fn fade_fixed_point_without_contact() {
        let gains = TaskGains::default();
        let f = update_fade(&gains, &HandFade::default(), &Wrench::zero(), &[false; 6], 0.005);
        assert_eq!(f.lambda, 1.0);
        assert_eq!(f.mu, [1.0; 6]);
    }

    #[test]
    fn fade_midpoint() {
        let gains = TaskGains::default();
        let push = Wrench::from_force(Vector3::new(0.0, 6.0, 0.0));
        let f = update_fade(
            &gains,
            &HandFade::default(),
            &push,
            &[false; 6],
            gains.fade_duration / 2.0,
        );
        assert_eq!(f.lambda, 0.5);
    }

    #[test]
    fn moment_threshold_alone_triggers() {
        let gains = TaskGains::default();
        let twist = Wrench {
            force: Vector3::zeros(),
            moment: Vector3::new(0.0, 0.0, 1.6),
        };
        assert!(gains.is_over_threshold(&twist));
        assert!(!gains.is_over_threshold(&Wrench::from_force(Vector3::new(4.0, 0.0, 0.0))));
    }

    #[test]
    fn mu_only_fades_masked_axes() {
        let gains = TaskGains::default();
        let mut mask = [false; 6];
        mask[1] = true;
        let f = update_fade(
            &gains,
            &HandFade::default(),
            &Wrench::zero(),
            &mask,
            gains.fade_duration,
        );
        assert_eq!(f.mu, [1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(f.lambda, 1.0);
    }

    #[test]
    fn task_wrench_cases() {
        let gains = unit_gains();
        let fade = HandFade::default();
        let zero = task_wrench(
            &gains,
            &fade,
            &Wrench::zero(),
            &Vector6::zeros(),
            &Twist::zero(),
            &Wrench::zero(),
        );
        assert_eq!(zero, Wrench::zero());

        let applied = Wrench::from_force(Vector3::new(1.5, 0.0, 0.0));
        let only_applied = task_wrench(
            &gains,
            &fade,
            &Wrench::zero(),
            &Vector6::zeros(),
            &Twist::zero(),
            &applied,
        );
        assert_eq!(only_applied, applied);

        let gains = TaskGains {
            admittance: [1.0; 6],
            stiffness: [100.0, 100.0, 100.0, 10.0, 10.0, 10.0],
            damping: [0.0; 6],
            ..TaskGains::default()
        };
        let measured = Wrench::from_force(Vector3::new(2.0, 0.0, 0.0));
        let err = Vector6::new(0.05, 0.0, 0.0, 0.0, 0.0, 0.0);
        let w = task_wrench(&gains, &fade, &measured, &err, &Twist::zero(), &Wrench::zero());
        assert_relative_eq!(w.force, Vector3::new(-3.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn validate_rejects_negative_gain() {
        let mut g = TaskGains::default();
        g.stiffness[2] = -1.0;
        assert!(g.validate().is_err());
        let g = TaskGains {
            fade_duration: 0.0,
            ..TaskGains::default()
        };
        assert!(g.validate().is_err());
    }
}
