//! Simulated follower holding the robot's hands.
//!
//! Each human hand is a point coupled to the robot palm through a
//! spring–damper; the wrist sensor reads the coupling force. The hand's own
//! motion depends on the behaviour mode. Positions are in the world frame.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskspace::Wrench;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartnerMode {
    /// Follows the robot hands with a first-order lag.
    CompliantFollower,
    /// Holds the hands where contact was made.
    Resistive,
    /// Follows, then shoves the hands away at `push_onset`.
    PushAway,
    /// No contact.
    Absent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartnerModel {
    pub mode: PartnerMode,
    /// Contact stiffness (N/m).
    pub stiffness: f64,
    /// Contact damping (N·s/m).
    pub damping: f64,
    /// Hand tracking time constant (s).
    pub lag: f64,
    /// Push distance from the robot hand (m).
    pub push_magnitude: f64,
    pub push_onset: f64,
    /// World-frame push direction (normalized on use).
    pub push_direction: [f64; 3],
    /// Uniform force noise half-width (N).
    pub noise: f64,
}

impl Default for PartnerModel {
    fn default() -> Self {
        PartnerModel {
            mode: PartnerMode::CompliantFollower,
            stiffness: 150.0,
            damping: 20.0,
            lag: 0.3,
            push_magnitude: 0.3,
            push_onset: 5.0,
            push_direction: [-1.0, 0.0, 0.0],
            noise: 0.0,
        }
    }
}

impl PartnerModel {
    pub fn with_mode(mode: PartnerMode) -> Self {
        PartnerModel {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("lag", self.lag),
            ("push_magnitude", self.push_magnitude),
            ("noise", self.noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("partner {name} must be finite and >= 0")));
            }
        }
        if !self.push_onset.is_finite() {
            return Err(Error::config("partner push_onset must be finite"));
        }
        if self.mode == PartnerMode::PushAway && Vector3::from(self.push_direction).norm() == 0.0 {
            return Err(Error::config("push_direction must be nonzero"));
        }
        Ok(())
    }

    fn push_unit(&self) -> Vector3<f64> {
        Vector3::from(self.push_direction).normalize()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanHand {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Where contact was made.
    pub anchor: Vector3<f64>,
    /// Fixed target once a push has begun.
    pub push_target: Option<Vector3<f64>>,
    /// Sensor noise sample for the current tick.
    pub noise: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct PartnerState {
    pub hands: Vec<HumanHand>,
    rng: ChaCha8Rng,
}

impl PartnerState {
    /// Human hands placed on the robot palms, at rest.
    pub fn at_contact(robot_hands: &[Vector3<f64>], seed: u64) -> Self {
        PartnerState {
            hands: robot_hands
                .iter()
                .map(|p| HumanHand {
                    position: *p,
                    velocity: Vector3::zeros(),
                    anchor: *p,
                    push_target: None,
                    noise: Vector3::zeros(),
                })
                .collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Force on robot hand `hand` from the human hand, in the world frame.
/// Moments are zero: palm contact transmits negligible torque.
pub fn measured_wrench(
    model: &PartnerModel,
    state: &PartnerState,
    hand: usize,
    robot_position: &Vector3<f64>,
    robot_velocity: &Vector3<f64>,
) -> Wrench {
    if model.mode == PartnerMode::Absent {
        return Wrench::zero();
    }
    let h = &state.hands[hand];
    let force =
        (h.position - robot_position) * model.stiffness + (h.velocity - robot_velocity) * model.damping + h.noise;
    Wrench::from_force(force)
}

/// Advances the human hands by `dt`, ending at time `t + dt`.
pub fn step_partner(
    model: &PartnerModel,
    state: &PartnerState,
    robot_hands: &[Vector3<f64>],
    dt: f64,
    t: f64,
) -> PartnerState {
    debug_assert!(dt > 0.0);
    let mut next = state.clone();
    if model.mode == PartnerMode::Absent {
        return next;
    }
    let decay = if model.lag > 0.0 { (-dt / model.lag).exp() } else { 0.0 };
    let pushing = model.mode == PartnerMode::PushAway && t + dt >= model.push_onset;
    for (h, robot) in next.hands.iter_mut().zip(robot_hands) {
        let target = match model.mode {
            PartnerMode::Resistive => h.anchor,
            PartnerMode::PushAway if pushing => *h
                .push_target
                .get_or_insert_with(|| robot + model.push_unit() * model.push_magnitude),
            _ => *robot,
        };
        let position = target + (h.position - target) * decay;
        h.velocity = (position - h.position) / dt;
        h.position = position;
    }
    if model.noise > 0.0 {
        for h in next.hands.iter_mut() {
            h.noise = Vector3::from_fn(|_, _| next.rng.random_range(-model.noise..=model.noise));
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coincident_hands_read_zero() {
        let m = PartnerModel::default();
        let p = Vector3::new(0.3, 0.2, 0.1);
        let s = PartnerState::at_contact(&[p], 1);
        let w = measured_wrench(&m, &s, 0, &p, &Vector3::zeros());
        assert_eq!(w, Wrench::zero());
    }

    #[test]
    fn spring_force_value() {
        let m = PartnerModel {
            stiffness: 200.0,
            damping: 0.0,
            ..PartnerModel::default()
        };
        let s = PartnerState::at_contact(&[Vector3::new(0.01, 0.0, 0.0)], 1);
        let w = measured_wrench(&m, &s, 0, &Vector3::zeros(), &Vector3::zeros());
        assert_relative_eq!(w.force, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        assert_eq!(w.moment, Vector3::zeros());
    }

    #[test]
    fn absent_partner_reads_zero() {
        let m = PartnerModel::with_mode(PartnerMode::Absent);
        let s = PartnerState::at_contact(&[Vector3::new(1.0, 0.0, 0.0)], 1);
        let w = measured_wrench(&m, &s, 0, &Vector3::zeros(), &Vector3::new(3.0, 0.0, 0.0));
        assert_eq!(w, Wrench::zero());
    }

    #[test]
    fn zero_lag_follower_tracks_exactly() {
        let m = PartnerModel {
            lag: 0.0,
            damping: 0.0,
            ..PartnerModel::default()
        };
        let mut s = PartnerState::at_contact(&[Vector3::zeros()], 1);
        let robot = Vector3::new(0.05, -0.02, 0.0);
        s = step_partner(&m, &s, &[robot], 0.005, 0.0);
        assert_eq!(s.hands[0].position, robot);
        assert_eq!(
            measured_wrench(&m, &s, 0, &robot, &Vector3::zeros()).force,
            Vector3::zeros()
        );
    }

    #[test]
    fn resistive_steady_state() {
        let m = PartnerModel::with_mode(PartnerMode::Resistive);
        let mut s = PartnerState::at_contact(&[Vector3::zeros()], 1);
        let robot = Vector3::new(0.05, 0.0, 0.0);
        for k in 0..2000 {
            s = step_partner(&m, &s, &[robot], 0.005, k as f64 * 0.005);
        }
        let w = measured_wrench(&m, &s, 0, &robot, &Vector3::zeros());
        assert_relative_eq!(w.force.norm(), m.stiffness * 0.05, epsilon = 1e-9);
    }

    #[test]
    fn push_target_is_fixed_at_onset() {
        let m = PartnerModel {
            push_onset: 0.01,
            ..PartnerModel::with_mode(PartnerMode::PushAway)
        };
        let mut s = PartnerState::at_contact(&[Vector3::zeros()], 1);
        for k in 0..4 {
            s = step_partner(&m, &s, &[Vector3::zeros()], 0.005, k as f64 * 0.005);
        }
        let target = s.hands[0].push_target.unwrap();
        assert_relative_eq!(target, Vector3::new(-0.3, 0.0, 0.0));
        s = step_partner(&m, &s, &[Vector3::new(1.0, 0.0, 0.0)], 0.005, 0.02);
        assert_eq!(s.hands[0].push_target.unwrap(), target);
    }

    #[test]
    fn noise_is_seeded() {
        let m = PartnerModel {
            noise: 0.5,
            ..PartnerModel::default()
        };
        let run = |seed| {
            let mut s = PartnerState::at_contact(&[Vector3::zeros(), Vector3::zeros()], seed);
            let mut out = Vec::new();
            for k in 0..20 {
                s = step_partner(&m, &s, &[Vector3::zeros(), Vector3::zeros()], 0.005, k as f64 * 0.005);
                out.push(measured_wrench(&m, &s, 1, &Vector3::zeros(), &Vector3::zeros()).force);
            }
            out
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        assert!(run(3).iter().all(|f| f.amax() <= 0.5));
    }
}
