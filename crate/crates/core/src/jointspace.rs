//! Joint-space stage: Jᵀ projection of the hand wrenches, joint impedance
//! toward the desired posture, gain blending and clamped integration into
//! position commands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{clamp_to_limits, jacobian, JointVector, KinematicModel, Matrix6xN};
use crate::taskspace::{ramp_toward, Wrench};

/// A gain given once for torso joints and once for arm joints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupGain {
    pub torso: f64,
    pub arm: f64,
}

impl GroupGain {
    pub const fn new(torso: f64, arm: f64) -> Self {
        GroupGain { torso, arm }
    }

    fn expand(&self, model: &KinematicModel) -> JointVector {
        JointVector::from_iterator(
            model.dof(),
            (0..model.dof()).map(|i| if model.is_torso_joint(i) { self.torso } else { self.arm }),
        )
    }
}

/// Configuration-file form of [`JointGains`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointGainSpec {
    /// Joint stiffness (N·m/rad).
    pub stiffness: GroupGain,
    /// Joint damping (N·m·s/rad).
    pub damping: GroupGain,
    /// Admittance blend gain, rad/(s·N·m).
    pub admittance: GroupGain,
    pub blend_max: GroupGain,
    pub blend_min: GroupGain,
    pub blend_fade_duration: f64,
}

impl Default for JointGainSpec {
    fn default() -> Self {
        JointGainSpec {
            stiffness: GroupGain::new(20.0, 1.0),
            damping: GroupGain::new(0.0, 0.0),
            admittance: GroupGain::new(1.0, 1.0),
            blend_max: GroupGain::new(1.0, 1.0),
            blend_min: GroupGain::new(0.6, 0.0),
            blend_fade_duration: 0.5,
        }
    }
}

/// Per-joint gains resolved against a model.
#[derive(Clone, Debug, PartialEq)]
pub struct JointGains {
    pub stiffness: JointVector,
    pub damping: JointVector,
    pub admittance: JointVector,
    pub blend_max: JointVector,
    pub blend_min: JointVector,
    pub blend_fade_duration: f64,
}

impl JointGains {
    pub fn for_model(model: &KinematicModel, spec: &JointGainSpec) -> Result<Self> {
        let gains = JointGains {
            stiffness: spec.stiffness.expand(model),
            damping: spec.damping.expand(model),
            admittance: spec.admittance.expand(model),
            blend_max: spec.blend_max.expand(model),
            blend_min: spec.blend_min.expand(model),
            blend_fade_duration: spec.blend_fade_duration,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        let vectors = [
            &self.stiffness,
            &self.damping,
            &self.admittance,
            &self.blend_max,
            &self.blend_min,
        ];
        let n = self.stiffness.len();
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::config("joint gain vectors differ in length"));
        }
        if !vectors.iter().all(|v| v.iter().all(|g| g.is_finite() && *g >= 0.0)) {
            return Err(Error::config("joint gains must be finite and >= 0"));
        }
        if self.blend_min.iter().zip(self.blend_max.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::config("blend_min must not exceed blend_max"));
        }
        if !(self.blend_fade_duration > 0.0 && self.blend_fade_duration.is_finite()) {
            return Err(Error::config("blend_fade_duration must be > 0"));
        }
        Ok(())
    }
}

/// Commanded joint positions/velocities and the current impedance blend.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCommandState {
    pub q_c: JointVector,
    pub qdot_c: JointVector,
    pub blend: JointVector,
}

impl JointCommandState {
    /// Starts at rest at `q`, with every blend at its maximum.
    pub fn at_rest(q: JointVector, gains: &JointGains) -> Self {
        let n = q.len();
        JointCommandState {
            q_c: q,
            qdot_c: JointVector::zeros(n),
            blend: gains.blend_max.clone(),
        }
    }
}

/// `(1/n_h)·Σ Jᵢᵀ Fᵢ` for explicit Jacobians.
pub fn project_with_jacobians(jacobians: &[Matrix6xN], wrenches: &[Wrench]) -> Result<JointVector> {
    if jacobians.len() != wrenches.len() || jacobians.is_empty() {
        return Err(Error::config(format!(
            "{} Jacobians for {} wrenches",
            jacobians.len(),
            wrenches.len()
        )));
    }
    let n = jacobians[0].ncols();
    let mut tau = JointVector::zeros(n);
    for (jac, w) in jacobians.iter().zip(wrenches) {
        tau += jac.tr_mul(&w.to_vector());
    }
    Ok(tau / jacobians.len() as f64)
}

/// Virtual admittance torques from one wrench per model hand.
pub fn project_wrenches(model: &KinematicModel, q: &JointVector, wrenches: &[Wrench]) -> Result<JointVector> {
    if wrenches.len() != model.hand_count() {
        return Err(Error::config(format!(
            "expected {} hand wrenches, got {}",
            model.hand_count(),
            wrenches.len()
        )));
    }
    let jacobians = model
        .hands()
        .map(|h| jacobian(model, q, h))
        .collect::<Result<Vec<_>>>()?;
    project_with_jacobians(&jacobians, wrenches)
}

/// `−K_P ∘ q_err − K_D ∘ qdot_err`.
pub fn joint_impedance(gains: &JointGains, q_err: &JointVector, qdot_err: &JointVector) -> JointVector {
    -(gains.stiffness.component_mul(q_err) + gains.damping.component_mul(qdot_err))
}

/// Ramps every blend toward its minimum while any hand is over the contact
/// threshold and back to its maximum otherwise.
pub fn update_blend(
    gains: &JointGains,
    state: &JointCommandState,
    over_threshold: &[bool],
    dt: f64,
) -> JointCommandState {
    debug_assert!(dt > 0.0);
    let contact = over_threshold.iter().any(|&f| f);
    let mut next = state.clone();
    for i in 0..state.blend.len() {
        let (lo, hi) = (gains.blend_min[i], gains.blend_max[i]);
        let target = if contact { lo } else { hi };
        let step = (hi - lo) * dt / gains.blend_fade_duration;
        next.blend[i] = ramp_toward(state.blend[i], target, step).clamp(lo, hi);
    }
    next
}

/// `G_a ∘ τ_adm + blend ∘ τ_imp`, in rad/s.
pub fn command_velocity(
    gains: &JointGains,
    state: &JointCommandState,
    tau_admittance: &JointVector,
    tau_impedance: &JointVector,
) -> JointVector {
    gains.admittance.component_mul(tau_admittance) + state.blend.component_mul(tau_impedance)
}

/// Integrates `qdot_c` through the model's velocity and position limits.
pub fn integrate_command(
    model: &KinematicModel,
    state: &JointCommandState,
    qdot_c: &JointVector,
    dt: f64,
) -> JointCommandState {
    let (q_c, qdot_c) = clamp_to_limits(model, &state.q_c, qdot_c, dt);
    JointCommandState {
        q_c,
        qdot_c,
        blend: state.blend.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmDef, HandId, JointDef};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn rotor() -> KinematicModel {
        let joint = JointDef::revolute("rotor", Vector3::z(), Vector3::zeros(), (-1.0, 1.0), 0.5).unwrap();
        KinematicModel::new(
            "base",
            vec![],
            vec![ArmDef {
                hand_frame: "tip".into(),
                joints: vec![joint],
                hand_offset: Vector3::new(1.0, 0.0, 0.0),
            }],
            JointVector::zeros(1),
        )
        .unwrap()
    }

    fn scalar_gains(kp: f64, kd: f64, ga: f64) -> JointGains {
        JointGains {
            stiffness: JointVector::from_element(1, kp),
            damping: JointVector::from_element(1, kd),
            admittance: JointVector::from_element(1, ga),
            blend_max: JointVector::from_element(1, 1.0),
            blend_min: JointVector::from_element(1, 0.0),
            blend_fade_duration: 0.5,
        }
    }

    #[test]
    fn zero_wrenches_project_to_zero() {
        let m = KinematicModel::default_humanoid();
        let tau = project_wrenches(&m, m.hold_posture(), &[Wrench::zero(), Wrench::zero()]).unwrap();
        assert!(tau.iter().all(|t| *t == 0.0));
    }

    #[test]
    fn rotor_projection() {
        let m = rotor();
        let w = Wrench::from_force(Vector3::new(0.0, 1.0, 0.0));
        let tau = project_wrenches(&m, &JointVector::zeros(1), &[w]).unwrap();
        assert_relative_eq!(tau[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_count_mismatch() {
        let m = KinematicModel::default_humanoid();
        let err = project_wrenches(&m, m.hold_posture(), &[Wrench::zero()]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn duplicated_hand_leaves_torques_unchanged() {
        let m = KinematicModel::default_humanoid();
        let jac = jacobian(&m, m.hold_posture(), HandId::LEFT).unwrap();
        let w = Wrench::from_force(Vector3::new(1.0, -2.0, 0.5));
        let one = project_with_jacobians(std::slice::from_ref(&jac), &[w]).unwrap();
        let two = project_with_jacobians(&[jac.clone(), jac], &[w, w]).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn joint_impedance_values() {
        let g = scalar_gains(10.0, 0.0, 1.0);
        let zero = joint_impedance(&g, &JointVector::zeros(1), &JointVector::zeros(1));
        assert_eq!(zero[0], 0.0);
        let tau = joint_impedance(&g, &JointVector::from_element(1, 0.1), &JointVector::zeros(1));
        assert_relative_eq!(tau[0], -1.0, epsilon = 1e-15);
        let g = scalar_gains(3.0, 2.0, 1.0);
        let tau = joint_impedance(
            &g,
            &JointVector::from_element(1, 0.2),
            &JointVector::from_element(1, 0.1),
        );
        assert!(tau[0] < 0.0);
    }

    #[test]
    fn blend_fixed_point_and_floor() {
        let m = KinematicModel::default_humanoid();
        let g = JointGains::for_model(&m, &JointGainSpec::default()).unwrap();
        let s = JointCommandState::at_rest(m.hold_posture().clone(), &g);
        assert_eq!(update_blend(&g, &s, &[false, false], 0.005), s);

        let full = update_blend(&g, &s, &[true, false], g.blend_fade_duration);
        for i in 0..m.dof() {
            let expected = if m.is_torso_joint(i) { 0.6 } else { 0.0 };
            assert_eq!(full.blend[i], expected);
        }

        let half = update_blend(&g, &s, &[false, true], g.blend_fade_duration / 2.0);
        for i in 0..m.dof() {
            let expected = if m.is_torso_joint(i) { 0.8 } else { 0.5 };
            assert_relative_eq!(half.blend[i], expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn command_velocity_passthrough() {
        let g = scalar_gains(1.0, 0.0, 1.0);
        let mut s = JointCommandState::at_rest(JointVector::zeros(1), &g);
        let z = JointVector::zeros(1);
        assert_eq!(command_velocity(&g, &s, &z, &z)[0], 0.0);
        s.blend[0] = 0.0;
        let v = command_velocity(
            &g,
            &s,
            &JointVector::from_element(1, 0.2),
            &JointVector::from_element(1, 5.0),
        );
        assert_eq!(v[0], 0.2);
    }

    #[test]
    fn integrate_cases() {
        let m = rotor();
        let g = scalar_gains(1.0, 0.0, 1.0);
        let s = JointCommandState::at_rest(JointVector::from_element(1, 0.1), &g);
        assert_eq!(integrate_command(&m, &s, &JointVector::zeros(1), 0.01).q_c, s.q_c);

        let s0 = JointCommandState::at_rest(JointVector::zeros(1), &g);
        let fast = JointVector::from_element(1, 1.0);
        let mut st = s0.clone();
        for _ in 0..4 {
            st = integrate_command(&m, &st, &fast, 0.25);
        }
        assert_eq!(st.q_c[0], 0.5);

        let at_limit = JointCommandState::at_rest(JointVector::from_element(1, 1.0), &g);
        let out = integrate_command(&m, &at_limit, &JointVector::from_element(1, 0.3), 0.1);
        assert_eq!(out.q_c[0], 1.0);
    }

    #[test]
    fn rejects_inverted_blend_bounds() {
        let m = KinematicModel::default_humanoid();
        let spec = JointGainSpec {
            blend_min: GroupGain::new(1.5, 0.0),
            ..JointGainSpec::default()
        };
        assert!(JointGains::for_model(&m, &spec).is_err());
    }
}
