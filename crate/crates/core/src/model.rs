//! Upper-body kinematic description: a shared torso chain feeding one chain
//! per arm, with revolute joints only.
//!
//! Joint vectors are ordered torso first, then each arm in declaration
//! order (left, right for the default model).

use std::ops::Range;
use std::path::Path;

use nalgebra::{DVector, Isometry3, Matrix6xX, Translation3, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type JointVector = DVector<f64>;
pub type Matrix6xN = Matrix6xX<f64>;

const DEFAULT_MODEL_TOML: &str = include_str!("../assets/default_model.toml");
const AXIS_NORM_TOLERANCE: f64 = 1e-9;

/// Index of an end-effector (hand) chain in a [`KinematicModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HandId(pub usize);

impl HandId {
    pub const LEFT: HandId = HandId(0);
    pub const RIGHT: HandId = HandId(1);

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointDef {
    pub name: String,
    pub axis: Unit<Vector3<f64>>,
    /// Translation from the parent joint frame, applied before rotating.
    pub offset: Vector3<f64>,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
}

impl JointDef {
    pub fn revolute(
        name: impl Into<String>,
        axis: Vector3<f64>,
        offset: Vector3<f64>,
        limits: (f64, f64),
        velocity_limit: f64,
    ) -> Result<Self> {
        let name = name.into();
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOLERANCE {
            return Err(Error::model(format!(
                "joint `{name}`: axis norm {norm} is not unit within {AXIS_NORM_TOLERANCE:e}"
            )));
        }
        if !offset.iter().all(|v| v.is_finite()) {
            return Err(Error::model(format!("joint `{name}`: non-finite offset")));
        }
        let (lower, upper) = limits;
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::model(format!(
                "joint `{name}`: position limits [{lower}, {upper}] must satisfy min < max"
            )));
        }
        if !(velocity_limit.is_finite() && velocity_limit > 0.0) {
            return Err(Error::model(format!(
                "joint `{name}`: velocity limit {velocity_limit} must be > 0"
            )));
        }
        Ok(JointDef {
            name,
            axis: Unit::new_unchecked(axis),
            offset,
            lower,
            upper,
            velocity_limit,
        })
    }
}

/// One arm chain as supplied to [`KinematicModel::new`].
#[derive(Clone, Debug)]
pub struct ArmDef {
    pub hand_frame: String,
    pub joints: Vec<JointDef>,
    /// Fixed translation from the last arm joint to the palm frame.
    pub hand_offset: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Pose {
            position: iso.translation.vector,
            orientation: iso.rotation,
        }
    }

    /// `self ⊖ other`: position difference stacked over the rotation vector
    /// of `self.orientation * other.orientation⁻¹`, both in the base frame.
    pub fn difference(&self, other: &Pose) -> Vector6<f64> {
        let dp = self.position - other.position;
        let dr = (self.orientation * other.orientation.inverse()).scaled_axis();
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Pose {
        Pose {
            position: self.position + delta,
            orientation: self.orientation,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Twist {
            linear: Vector3::new(v[0], v[1], v[2]),
            angular: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }
}

/// Torso plus arm chains with joint limits. Immutable once built.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    base_frame: String,
    joints: Vec<JointDef>,
    torso: Range<usize>,
    arms: Vec<Range<usize>>,
    hand_frames: Vec<String>,
    hand_offsets: Vec<Vector3<f64>>,
    hold: JointVector,
}

/// Joint index, origin and axis in the base frame.
type JointFrame = (usize, Vector3<f64>, Vector3<f64>);

impl KinematicModel {
    /// Builds a model from a torso chain shared by every arm. `hold` is the
    /// nominal posture and must lie within the joint limits.
    pub fn new(
        base_frame: impl Into<String>,
        torso: Vec<JointDef>,
        arms: Vec<ArmDef>,
        hold: JointVector,
    ) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::model("at least one arm chain is required"));
        }
        let mut joints = torso;
        let torso_range = 0..joints.len();
        let mut ranges = Vec::with_capacity(arms.len());
        let mut hand_frames = Vec::with_capacity(arms.len());
        let mut hand_offsets = Vec::with_capacity(arms.len());
        for arm in arms {
            if !arm.hand_offset.iter().all(|v| v.is_finite()) {
                return Err(Error::model(format!("hand `{}`: non-finite offset", arm.hand_frame)));
            }
            if hand_frames.contains(&arm.hand_frame) {
                return Err(Error::model(format!("duplicate hand frame `{}`", arm.hand_frame)));
            }
            let start = joints.len();
            joints.extend(arm.joints);
            ranges.push(start..joints.len());
            hand_frames.push(arm.hand_frame);
            hand_offsets.push(arm.hand_offset);
        }
        let mut names: Vec<&str> = joints.iter().map(|j| j.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::model(format!("duplicate joint name `{}`", w[0])));
        }
        if hold.len() != joints.len() {
            return Err(Error::model(format!(
                "hold posture has {} values, model has {} joints",
                hold.len(),
                joints.len()
            )));
        }
        for (j, &v) in joints.iter().zip(hold.iter()) {
            if !(v.is_finite() && v >= j.lower && v <= j.upper) {
                return Err(Error::model(format!(
                    "hold value {v} for `{}` outside [{}, {}]",
                    j.name, j.lower, j.upper
                )));
            }
        }
        Ok(KinematicModel {
            base_frame: base_frame.into(),
            joints,
            torso: torso_range,
            arms: ranges,
            hand_frames,
            hand_offsets,
            hold,
        })
    }

    /// The bundled 16-joint humanoid upper body.
    pub fn default_humanoid() -> Self {
        Self::from_toml_str(DEFAULT_MODEL_TOML).expect("bundled model is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::config(format!("model file: {e}")))?;
        file.build()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = toml::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        file.build()
    }

    pub fn base_frame(&self) -> &str {
        &self.base_frame
    }

    pub fn joints(&self) -> &[JointDef] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn hand_count(&self) -> usize {
        self.arms.len()
    }

    pub fn hands(&self) -> impl Iterator<Item = HandId> {
        (0..self.arms.len()).map(HandId)
    }

    pub fn torso_range(&self) -> Range<usize> {
        self.torso.clone()
    }

    pub fn arm_range(&self, hand: HandId) -> Range<usize> {
        self.arms[hand.0].clone()
    }

    pub fn is_torso_joint(&self, index: usize) -> bool {
        self.torso.contains(&index)
    }

    pub fn hand_frame(&self, hand: HandId) -> &str {
        &self.hand_frames[hand.0]
    }

    /// Resolves a hand frame identifier.
    pub fn hand(&self, frame: &str) -> Result<HandId> {
        self.hand_frames
            .iter()
            .position(|f| f == frame)
            .map(HandId)
            .ok_or_else(|| Error::config(format!("unknown hand frame `{frame}`")))
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn hold_posture(&self) -> &JointVector {
        &self.hold
    }

    pub fn velocity_limits(&self) -> JointVector {
        JointVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.velocity_limit))
    }

    fn check_hand(&self, hand: HandId) -> Result<()> {
        if hand.0 < self.arms.len() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "hand index {} out of range ({} hands)",
                hand.0,
                self.arms.len()
            )))
        }
    }

    fn chain(&self, hand: HandId) -> impl Iterator<Item = usize> + '_ {
        self.torso.clone().chain(self.arms[hand.0].clone())
    }

    /// Walks the chain once, returning each joint's (index, origin, axis) in
    /// the base frame and the hand frame transform.
    fn chain_frames(&self, q: &JointVector, hand: HandId) -> (Vec<JointFrame>, Isometry3<f64>) {
        let mut frame = Isometry3::identity();
        let mut out = Vec::with_capacity(self.torso.len() + self.arms[hand.0].len());
        for idx in self.chain(hand) {
            let joint = &self.joints[idx];
            frame *= Translation3::from(joint.offset);
            let axis = frame.rotation * joint.axis.into_inner();
            out.push((idx, frame.translation.vector, axis));
            frame *= UnitQuaternion::from_axis_angle(&joint.axis, q[idx]);
        }
        frame *= Translation3::from(self.hand_offsets[hand.0]);
        (out, frame)
    }

    fn check_len(&self, q: &JointVector) -> Result<()> {
        if q.len() == self.dof() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "joint vector has {} values, model has {} joints",
                q.len(),
                self.dof()
            )))
        }
    }
}

/// Pose of `hand` in the base frame.
pub fn forward_kinematics(model: &KinematicModel, q: &JointVector, hand: HandId) -> Result<Pose> {
    model.check_hand(hand)?;
    model.check_len(q)?;
    let (_, frame) = model.chain_frames(q, hand);
    Ok(Pose::from_isometry(&frame))
}

/// Geometric Jacobian of `hand` in the base frame, linear rows first.
/// Columns of joints outside the hand's chain are zero.
pub fn jacobian(model: &KinematicModel, q: &JointVector, hand: HandId) -> Result<Matrix6xN> {
    pose_and_jacobian(model, q, hand).map(|(_, jac)| jac)
}

/// Hand pose and Jacobian from a single chain walk.
pub fn pose_and_jacobian(model: &KinematicModel, q: &JointVector, hand: HandId) -> Result<(Pose, Matrix6xN)> {
    model.check_hand(hand)?;
    model.check_len(q)?;
    let (frames, tip) = model.chain_frames(q, hand);
    let p = tip.translation.vector;
    let mut jac = Matrix6xN::zeros(model.dof());
    for (idx, origin, axis) in frames {
        let lin = axis.cross(&(p - origin));
        jac.fixed_view_mut::<3, 1>(0, idx).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, idx).copy_from(&axis);
    }
    Ok((Pose::from_isometry(&tip), jac))
}

/// Saturates `qdot` to the velocity limits, integrates one step and clips
/// the result into the position limits. Total for finite inputs.
pub fn clamp_to_limits(
    model: &KinematicModel,
    q: &JointVector,
    qdot: &JointVector,
    dt: f64,
) -> (JointVector, JointVector) {
    debug_assert!(dt > 0.0);
    let mut q_next = q.clone();
    let mut qdot_out = qdot.clone();
    for (i, joint) in model.joints.iter().enumerate() {
        let v = qdot[i].clamp(-joint.velocity_limit, joint.velocity_limit);
        qdot_out[i] = v;
        q_next[i] = (q[i] + v * dt).clamp(joint.lower, joint.upper);
    }
    (q_next, qdot_out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    name: String,
    axis: [f64; 3],
    offset: [f64; 3],
    limits: [f64; 2],
    velocity_limit: f64,
}

impl JointFile {
    fn build(self) -> Result<JointDef> {
        JointDef::revolute(
            self.name,
            Vector3::from(self.axis),
            Vector3::from(self.offset),
            (self.limits[0], self.limits[1]),
            self.velocity_limit,
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmFile {
    hand_frame: String,
    hand_offset: [f64; 3],
    joints: Vec<JointFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoldFile {
    torso: Vec<f64>,
    left_arm: Vec<f64>,
    right_arm: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    base_frame: String,
    torso: Vec<JointFile>,
    left_arm: ArmFile,
    right_arm: ArmFile,
    hold: HoldFile,
}

impl ModelFile {
    fn build(self) -> Result<KinematicModel> {
        let torso = self
            .torso
            .into_iter()
            .map(JointFile::build)
            .collect::<Result<Vec<_>>>()?;
        let arm = |a: ArmFile| -> Result<ArmDef> {
            Ok(ArmDef {
                hand_frame: a.hand_frame,
                hand_offset: Vector3::from(a.hand_offset),
                joints: a.joints.into_iter().map(JointFile::build).collect::<Result<Vec<_>>>()?,
            })
        };
        let arms = vec![arm(self.left_arm)?, arm(self.right_arm)?];
        let hold: Vec<f64> = self
            .hold
            .torso
            .into_iter()
            .chain(self.hold.left_arm)
            .chain(self.hold.right_arm)
            .collect();
        KinematicModel::new(self.base_frame, torso, arms, JointVector::from_vec(hold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn rotor(length: f64) -> KinematicModel {
        let joint = JointDef::revolute("rotor", Vector3::z(), Vector3::zeros(), (-3.0, 3.0), 1.0).unwrap();
        KinematicModel::new(
            "base",
            vec![],
            vec![ArmDef {
                hand_frame: "tip".into(),
                joints: vec![joint],
                hand_offset: Vector3::new(length, 0.0, 0.0),
            }],
            JointVector::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn rotor_identity_configuration() {
        let m = rotor(1.0);
        let pose = forward_kinematics(&m, &JointVector::zeros(1), HandId(0)).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotor_quarter_turn() {
        let m = rotor(1.0);
        let q = JointVector::from_element(1, FRAC_PI_2);
        let pose = forward_kinematics(&m, &q, HandId(0)).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotor_jacobian_columns() {
        let m = rotor(1.0);
        let jac = jacobian(&m, &JointVector::zeros(1), HandId(0)).unwrap();
        assert_relative_eq!(jac.column(0).into_owned(), Vector6::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn default_model_shape() {
        let m = KinematicModel::default_humanoid();
        assert_eq!(m.dof(), 16);
        assert_eq!(m.torso_range(), 0..2);
        assert_eq!(m.arm_range(HandId::LEFT), 2..9);
        assert_eq!(m.arm_range(HandId::RIGHT), 9..16);
        assert_eq!(m.hand("hand_left").unwrap(), HandId::LEFT);
        assert_eq!(m.hand("hand_right").unwrap(), HandId::RIGHT);
    }

    #[test]
    fn unknown_hand_is_config_error() {
        let m = KinematicModel::default_humanoid();
        assert!(matches!(m.hand("hand_middle"), Err(Error::Config(_))));
        let q = m.hold_posture().clone();
        assert!(matches!(forward_kinematics(&m, &q, HandId(2)), Err(Error::Config(_))));
        assert!(matches!(jacobian(&m, &q, HandId(5)), Err(Error::Config(_))));
    }

    #[test]
    fn left_jacobian_ignores_right_arm() {
        let m = KinematicModel::default_humanoid();
        let jac = jacobian(&m, m.hold_posture(), HandId::LEFT).unwrap();
        for c in m.arm_range(HandId::RIGHT) {
            assert!(jac.column(c).iter().all(|&v| v == 0.0));
        }
        for c in m.torso_range() {
            assert!(jac.column(c).norm() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_joints() {
        assert!(JointDef::revolute("a", Vector3::new(0.0, 0.0, 1.1), Vector3::zeros(), (-1.0, 1.0), 1.0).is_err());
        assert!(JointDef::revolute("a", Vector3::z(), Vector3::zeros(), (1.0, 1.0), 1.0).is_err());
        assert!(JointDef::revolute("a", Vector3::z(), Vector3::zeros(), (-1.0, 1.0), 0.0).is_err());
        assert!(JointDef::revolute("a", Vector3::z(), Vector3::new(f64::NAN, 0.0, 0.0), (-1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn clamp_saturates_velocity() {
        let m = rotor(1.0);
        let (q, v) = clamp_to_limits(&m, &JointVector::zeros(1), &JointVector::from_element(1, 2.0), 0.01);
        assert_eq!(v[0], 1.0);
        assert_eq!(q[0], 0.01);
    }

    #[test]
    fn clamp_passes_feasible_inputs() {
        let m = rotor(1.0);
        let q0 = JointVector::from_element(1, 0.5);
        let v0 = JointVector::from_element(1, -0.25);
        let (q, v) = clamp_to_limits(&m, &q0, &v0, 0.1);
        assert_eq!(v, v0);
        assert_eq!(q[0], 0.5 + -0.25 * 0.1);
    }

    #[test]
    fn clamp_absorbs_at_boundary() {
        let m = rotor(1.0);
        let q0 = JointVector::from_element(1, 3.0);
        let (q, _) = clamp_to_limits(&m, &q0, &JointVector::from_element(1, 0.5), 0.1);
        assert_eq!(q[0], 3.0);
    }
}
