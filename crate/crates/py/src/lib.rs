//! Python module `leadstep`: kinematics, the upper-body controller, trial
//! simulation and questionnaire metrics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use leadstep_core::analysis::{self, LikertRow, LogTable, Response, Stat, Vote, VoteEntry, VoteTable};
use leadstep_core::choreography::SignalAction;
use leadstep_core::config::{ProtocolConfig, TrialConfig};
use leadstep_core::controller::UpperBodyController;
use leadstep_core::error::Error;
use leadstep_core::harness;
use leadstep_core::jointspace::{project_wrenches, JointGains};
use leadstep_core::model::{self, HandId, JointVector, KinematicModel};
use leadstep_core::taskspace::Wrench;
use nalgebra::Vector6;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn wrenches(values: Vec<[f64; 6]>) -> Vec<Wrench> {
    values
        .iter()
        .map(|w| Wrench::from_vector(&Vector6::from_row_slice(w)))
        .collect()
}

#[pyclass(name = "Model", module = "leadstep", frozen)]
struct PyModel {
    inner: KinematicModel,
}

impl PyModel {
    fn q(&self, q: Vec<f64>) -> PyResult<JointVector> {
        if q.len() != self.inner.dof() {
            return Err(PyValueError::new_err(format!(
                "expected {} joint values, got {}",
                self.inner.dof(),
                q.len()
            )));
        }
        Ok(JointVector::from_vec(q))
    }

    fn hand(&self, name: &str) -> PyResult<HandId> {
        self.inner.hand(name).map_err(err)
    }
}

#[pymethods]
impl PyModel {
    /// The bundled 16-joint humanoid, or a model geometry TOML file.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => KinematicModel::from_file(&p).map_err(err)?,
            None => KinematicModel::default_humanoid(),
        };
        Ok(PyModel { inner })
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn joint_names(&self) -> Vec<String> {
        self.inner.joints().iter().map(|j| j.name.clone()).collect()
    }

    #[getter]
    fn hand_names(&self) -> Vec<String> {
        self.inner
            .hands()
            .map(|h| self.inner.hand_frame(h).to_string())
            .collect()
    }

    fn hold_posture(&self) -> Vec<f64> {
        self.inner.hold_posture().iter().copied().collect()
    }

    /// Hand position and (w, x, y, z) orientation in the base frame.
    fn forward_kinematics(&self, q: Vec<f64>, hand: &str) -> PyResult<([f64; 3], [f64; 4])> {
        let pose = model::forward_kinematics(&self.inner, &self.q(q)?, self.hand(hand)?).map_err(err)?;
        let o = pose.orientation;
        Ok((pose.position.into(), [o.w, o.i, o.j, o.k]))
    }

    /// 6 x dof geometric Jacobian as a list of rows (linear then angular).
    fn jacobian(&self, q: Vec<f64>, hand: &str) -> PyResult<Vec<Vec<f64>>> {
        let j = model::jacobian(&self.inner, &self.q(q)?, self.hand(hand)?).map_err(err)?;
        Ok(j.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Averaged joint torque for one wrench per hand.
    fn project_wrenches(&self, q: Vec<f64>, wrenches_per_hand: Vec<[f64; 6]>) -> PyResult<Vec<f64>> {
        let tau = project_wrenches(&self.inner, &self.q(q)?, &wrenches(wrenches_per_hand)).map_err(err)?;
        Ok(tau.iter().copied().collect())
    }
}

#[pyclass(name = "TrialConfig", module = "leadstep")]
struct PyTrialConfig {
    inner: TrialConfig,
}

#[pymethods]
impl PyTrialConfig {
    /// Defaults with the given signal label, e.g. "HW+HD".
    #[new]
    #[pyo3(signature = (signals="NS"))]
    fn new(signals: &str) -> PyResult<Self> {
        let signals = signals.parse().map_err(err)?;
        Ok(PyTrialConfig {
            inner: TrialConfig::with_signals(signals),
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyTrialConfig {
            inner: TrialConfig::from_toml_str(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrialConfig {
            inner: TrialConfig::from_file(&path).map_err(err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    #[getter]
    fn signals(&self) -> String {
        self.inner.signals.to_string()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[setter]
    fn set_duration(&mut self, v: f64) {
        self.inner.duration = v;
    }

    #[getter]
    fn timestep(&self) -> f64 {
        self.inner.timestep
    }

    #[setter]
    fn set_timestep(&mut self, v: f64) {
        self.inner.timestep = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "TrialConfig({:?}, duration={})",
            self.inner.label(),
            self.inner.duration
        )
    }
}

#[pyclass(name = "TrialLog", module = "leadstep", frozen)]
struct PyTrialLog {
    log: harness::TrialLog,
    table: LogTable,
}

impl PyTrialLog {
    fn wrap(log: harness::TrialLog) -> PyResult<Self> {
        let table = LogTable::from_log(&log).map_err(err)?;
        Ok(PyTrialLog { log, table })
    }
}

#[pymethods]
impl PyTrialLog {
    #[getter]
    fn label(&self) -> &str {
        &self.log.label
    }

    #[getter]
    fn timestep(&self) -> f64 {
        self.log.timestep
    }

    fn __len__(&self) -> usize {
        self.log.ticks.len()
    }

    /// Per-tick CSV column names in file order.
    fn columns(&self) -> Vec<String> {
        self.table.header.clone()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.table.values(name).map_err(err)
    }

    /// Events as (time, kind, payload JSON) tuples.
    fn events(&self) -> Vec<(f64, String, String)> {
        self.log
            .events
            .iter()
            .map(|e| (e.time, e.kind.clone(), e.payload.to_string()))
            .collect()
    }

    /// Summary metrics as a dict; `stop_time` is None when the dance ran
    /// to the end.
    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let m = analysis::log_metrics(&self.table).map_err(err)?;
        let mut d: BTreeMap<&str, Py<PyAny>> = BTreeMap::new();
        d.insert("ticks", m.ticks.into_pyobject(py)?.into_any().unbind());
        d.insert("duration", m.duration.into_pyobject(py)?.into_any().unbind());
        d.insert("steps", m.steps.into_pyobject(py)?.into_any().unbind());
        d.insert("stop_time", m.stop_time.into_pyobject(py)?.into_any().unbind());
        d.insert(
            "peak_deflection",
            m.peak_deflection.into_pyobject(py)?.into_any().unbind(),
        );
        d.insert("peak_force", m.peak_force.into_pyobject(py)?.into_any().unbind());
        d.insert(
            "peak_setpoint_offset",
            m.peak_setpoint_offset.into_pyobject(py)?.into_any().unbind(),
        );
        d.insert(
            "peak_torso_yaw_offset",
            m.peak_torso_yaw_offset.into_pyobject(py)?.into_any().unbind(),
        );
        d.insert("min_lambda", m.min_lambda.into_pyobject(py)?.into_any().unbind());
        d.insert(
            "max_joint_speed",
            m.max_joint_speed.into_pyobject(py)?.into_any().unbind(),
        );
        Ok(d.into_pyobject(py)?.into_any().unbind())
    }

    fn continuity_ratio(&self) -> f64 {
        analysis::continuity_ratio(&self.log)
    }

    /// Writes `<stem>.csv` and `<stem>.events.jsonl`; returns both paths.
    #[pyo3(signature = (dir, stem=None))]
    fn write(&self, dir: PathBuf, stem: Option<String>) -> PyResult<(PathBuf, PathBuf)> {
        let stem = stem.unwrap_or_else(|| self.log.file_stem());
        self.log.write_to_dir(&dir, &stem).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("TrialLog({:?}, ticks={})", self.log.label, self.log.ticks.len())
    }
}

/// The upper-body controller, stepped by hand with measured wrenches.
#[pyclass(name = "Controller", module = "leadstep")]
struct PyController {
    inner: UpperBodyController,
}

#[pymethods]
impl PyController {
    /// Gains come from `config` (defaults when omitted).
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<PyRef<'_, PyTrialConfig>>) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
        let model = cfg.load_model().map_err(err)?;
        let joint = JointGains::for_model(&model, &cfg.joint).map_err(err)?;
        let inner = UpperBodyController::new(model, cfg.task, joint).map_err(err)?;
        Ok(PyController { inner })
    }

    /// Advances one tick with one measured wrench per hand and no leading
    /// signal. Returns the commanded joint positions.
    #[pyo3(signature = (measured, dt=0.005))]
    fn step(&mut self, measured: Vec<[f64; 6]>, dt: f64) -> PyResult<Vec<f64>> {
        let action = SignalAction::zero(measured.len());
        self.inner.step(&wrenches(measured), &action, dt).map_err(err)?;
        Ok(self.inner.q().iter().copied().collect())
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q().iter().copied().collect()
    }

    #[getter]
    fn blend(&self) -> Vec<f64> {
        self.inner.command().blend.iter().copied().collect()
    }

    /// Impedance fade factor per hand.
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.fade().hands.iter().map(|h| h.lambda).collect()
    }

    fn hand_position(&self, hand: usize) -> PyResult<[f64; 3]> {
        let (pose, _) = self.inner.hand_state(HandId(hand)).map_err(err)?;
        Ok(pose.position.into())
    }
}

#[pyfunction]
fn run_trial(config: PyRef<'_, PyTrialConfig>) -> PyResult<PyTrialLog> {
    PyTrialLog::wrap(harness::run_trial(&config.inner).map_err(err)?)
}

/// Runs a protocol file (or the default protocol) and writes every log
/// under `out`. Returns the tick-log paths.
#[pyfunction]
#[pyo3(signature = (out, path=None, seed=None))]
fn run_protocol(out: PathBuf, path: Option<PathBuf>, seed: Option<u64>) -> PyResult<Vec<PathBuf>> {
    let mut protocol = match path {
        Some(p) => ProtocolConfig::from_file(&p).map_err(err)?,
        None => ProtocolConfig::default(),
    };
    if let Some(s) = seed {
        protocol.seed = s;
    }
    let runs = harness::run_protocol(&protocol).map_err(err)?;
    harness::write_protocol(&runs, &out).map_err(err)
}

fn vote_table(votes: Vec<(String, String, String, String)>) -> PyResult<VoteTable> {
    let entries = votes
        .into_iter()
        .map(|(participant, block, trial, vote)| {
            Ok(VoteEntry {
                participant,
                block,
                trial,
                vote: Vote::parse(&vote).map_err(err)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    VoteTable::new(entries).map_err(err)
}

/// Preference score in [1, 5] from (participant, block, trial, vote) rows.
#[pyfunction]
fn preference_metric(votes: Vec<(String, String, String, String)>, trial: &str) -> PyResult<f64> {
    analysis::preference_metric(&vote_table(votes)?, trial).map_err(err)
}

/// Per-trial (best, worst) weights within one block.
#[pyfunction]
fn weighted_best_worst(
    votes: Vec<(String, String, String, String)>,
    block: &str,
) -> PyResult<BTreeMap<String, (f64, f64)>> {
    Ok(analysis::weighted_best_worst(&vote_table(votes)?, block)
        .into_iter()
        .map(|(t, w)| (t, (w.best, w.worst)))
        .collect())
}

type StatTuple = Option<(f64, f64, usize)>;

fn stat(s: &Option<Stat>) -> StatTuple {
    s.map(|s| (s.mean, s.std, s.n))
}

fn row(r: &LikertRow) -> (StatTuple, StatTuple) {
    (stat(&r.confidence), stat(&r.comfort))
}

/// Likert summary of a questionnaire CSV: per-trial and per-order
/// ((mean, std, n) | None for confidence, same for comfort), plus warnings.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn likert_summary(
    path: PathBuf,
) -> PyResult<(
    BTreeMap<String, (StatTuple, StatTuple)>,
    BTreeMap<u32, (StatTuple, StatTuple)>,
    Vec<String>,
)> {
    let rows: Vec<Response> = analysis::read_responses_file(&path).map_err(err)?;
    let s = analysis::likert_summary(&analysis::LikertTable::from_responses(&rows), &[]);
    Ok((
        s.trials.iter().map(|r| (r.key.clone(), row(r))).collect(),
        s.by_order.iter().map(|(o, r)| (*o, row(r))).collect(),
        s.warnings,
    ))
}

#[pymodule]
fn leadstep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrialConfig>()?;
    m.add_class::<PyTrialLog>()?;
    m.add_class::<PyController>()?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(preference_metric, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_best_worst, m)?)?;
    m.add_function(wrap_pyfunction!(likert_summary, m)?)?;
    Ok(())
}
