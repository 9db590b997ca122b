//! Python bindings: synthetic data, the three estimators, metrics, training
//! and the benchmark suite.

use std::path::PathBuf;

use applegrasp_core as core;
use core::bench::{self, Config};
use core::estimators::{self as est, Method};
use core::synthgen::{self, Condition};
use core::tinynn::Checkpoint;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(applegrasp, GraspError, PyException, "Any failure reported by the core library.");

fn err(e: core::GraspError) -> PyErr {
    GraspError::new_err(format!("{}: {e}", e.kind()))
}

type Xyz = (f64, f64, f64);

fn to_points(points: Vec<Xyz>) -> Vec<core::Point3> {
    points.into_iter().map(|(x, y, z)| core::Point3::new(x, y, z)).collect()
}

fn xyz(p: &core::Point3) -> Xyz {
    (p.x, p.y, p.z)
}

fn load_config(path: Option<PathBuf>) -> PyResult<Config> {
    path.map_or_else(|| Ok(Config::default()), |p| Config::load(p).map_err(err))
}

#[pyclass(frozen, skip_from_py_object, name = "Sphere", module = "applegrasp")]
#[derive(Clone)]
struct PySphere(core::SphereModel);

#[pymethods]
impl PySphere {
    #[new]
    fn new(center: Xyz, radius: f64) -> PyResult<Self> {
        core::SphereModel::new(core::Point3::new(center.0, center.1, center.2), radius)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn center(&self) -> Xyz {
        xyz(&self.0.center)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius
    }

    fn __repr__(&self) -> String {
        let c = self.0.center;
        format!("Sphere(center=({}, {}, {}), radius={})", c.x, c.y, c.z, self.0.radius)
    }
}

#[pyclass(frozen, skip_from_py_object, name = "GraspPose", module = "applegrasp")]
#[derive(Clone)]
struct PyPose(core::GraspPose);

#[pymethods]
impl PyPose {
    #[new]
    fn new(position: Xyz, theta: f64, phi: f64) -> PyResult<Self> {
        core::GraspPose::new(core::Point3::new(position.0, position.1, position.2), theta, phi)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn position(&self) -> Xyz {
        xyz(&self.0.position)
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.0.phi
    }

    /// Unit approach direction in the camera frame.
    fn camera_direction(&self) -> Xyz {
        let d = self.0.camera_direction();
        (d.x, d.y, d.z)
    }

    fn __repr__(&self) -> String {
        let p = self.0.position;
        format!("GraspPose(position=({}, {}, {}), theta={}, phi={})", p.x, p.y, p.z, self.0.theta, self.0.phi)
    }
}

/// A labelled synthetic cloud.
#[pyclass(frozen, name = "Sample", module = "applegrasp")]
struct PySample(synthgen::LabeledSample);

#[pymethods]
impl PySample {
    #[getter]
    fn points(&self) -> Vec<Xyz> {
        self.0.points.iter().map(xyz).collect()
    }

    #[getter]
    fn sphere(&self) -> PySphere {
        PySphere(self.0.sphere)
    }

    #[getter]
    fn pose(&self) -> PyPose {
        PyPose(self.0.pose())
    }

    #[getter]
    fn condition(&self) -> &'static str {
        self.0.condition.as_str()
    }

    /// Copy with the named corruption applied.
    #[pyo3(signature = (condition, seed=0))]
    fn corrupted(&self, condition: &str, seed: u64) -> PyResult<Self> {
        let c: Condition = condition.parse().map_err(err)?;
        let mut rng = core::seeding::rng_from_seed(seed);
        Ok(Self(synthgen::corrupt(&self.0, &synthgen::GenConfig::default(), c, &mut rng)))
    }

    fn __len__(&self) -> usize {
        self.0.points.len()
    }
}

#[pyclass(frozen, name = "Estimate", module = "applegrasp")]
struct PyEstimate {
    #[pyo3(get)]
    sphere: PySphere,
    /// `None` when the fitted sphere gives no in-range grasp direction.
    #[pyo3(get)]
    pose: Option<PyPose>,
}

/// One of `pointnet`, `ransac` or `hough`, configured from an optional
/// TOML file in the CLI format.
#[pyclass(frozen, name = "Estimator", module = "applegrasp")]
struct PyEstimator(est::Estimator);

#[pymethods]
impl PyEstimator {
    #[new]
    #[pyo3(signature = (method, checkpoint=None, config=None))]
    fn new(method: &str, checkpoint: Option<PathBuf>, config: Option<PathBuf>) -> PyResult<Self> {
        let method: Method = method.parse().map_err(err)?;
        let ck = checkpoint.map(Checkpoint::load).transpose().map_err(err)?;
        let cfg = load_config(config)?;
        bench::build_estimator(method, ck.as_ref(), &cfg.suite).map(Self).map_err(err)
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.0.method().as_str()
    }

    /// Full pipeline on a raw cloud given as `(x, y, z)` tuples.
    #[pyo3(signature = (points, seed=0))]
    fn estimate(&self, py: Python<'_>, points: Vec<Xyz>, seed: u64) -> PyResult<PyEstimate> {
        let pts = to_points(points);
        let e = py.detach(|| self.0.estimate(&pts, seed)).map_err(err)?;
        Ok(PyEstimate {
            sphere: PySphere(e.sphere),
            pose: e.pose.map(PyPose),
        })
    }
}

/// `count` clean samples from `seed`.
#[pyfunction]
#[pyo3(signature = (count, seed=0))]
fn generate(count: usize, seed: u64) -> PyResult<Vec<PySample>> {
    let s = synthgen::generate_dataset(&synthgen::GenConfig::default(), count, seed).map_err(err)?;
    Ok(s.into_iter().map(PySample).collect())
}

#[pyfunction]
fn read_dataset(path: PathBuf) -> PyResult<Vec<PySample>> {
    Ok(synthgen::read_dataset(path).map_err(err)?.into_iter().map(PySample).collect())
}

#[pyfunction]
fn write_dataset(samples: Vec<PyRef<'_, PySample>>, path: PathBuf) -> PyResult<()> {
    let s: Vec<synthgen::LabeledSample> = samples.iter().map(|s| s.0.clone()).collect();
    synthgen::write_dataset(&s, path).map_err(err)
}

/// Box IoU of the bounding cubes of two spheres.
#[pyfunction]
fn sphere_iou(a: &PySphere, b: &PySphere) -> f64 {
    core::geometry::sphere_iou(&a.0, &b.0)
}

/// Angle between two approach directions, degrees.
#[pyfunction]
fn orientation_error(pred: &PyPose, truth: &PyPose) -> f64 {
    core::geometry::orientation_error(&pred.0, &truth.0)
}

/// Trains the learned estimator and writes its checkpoint. Returns
/// `(epoch, train_loss, validation_loss)` per epoch.
#[pyfunction]
#[pyo3(signature = (train, checkpoint_out, validation=None, epochs=None, seed=0, config=None))]
fn train(
    py: Python<'_>,
    train: PathBuf,
    checkpoint_out: PathBuf,
    validation: Option<PathBuf>,
    epochs: Option<usize>,
    seed: u64,
    config: Option<PathBuf>,
) -> PyResult<Vec<(usize, f64, Option<f64>)>> {
    let mut recipe = load_config(config)?.training;
    if let Some(e) = epochs {
        recipe.train.epochs = e;
    }
    recipe.train.seed = seed;
    let train_set = synthgen::read_dataset(train).map_err(err)?;
    let val_set = validation.map(synthgen::read_dataset).transpose().map_err(err)?.unwrap_or_default();
    let trained = py
        .detach(|| est::train_regressor(&train_set, &val_set, &recipe, |_| {}))
        .map_err(err)?;
    trained.checkpoint().save(checkpoint_out).map_err(err)?;
    Ok(trained
        .history
        .epochs
        .iter()
        .map(|e| (e.epoch, e.train_loss, e.validation_loss))
        .collect())
}

/// Runs the method × condition suite and returns the structured report.
#[pyfunction]
#[pyo3(signature = (data, checkpoint=None, methods=None, conditions=None, seed=0, config=None))]
fn run_bench(
    py: Python<'_>,
    data: PathBuf,
    checkpoint: Option<PathBuf>,
    methods: Option<Vec<String>>,
    conditions: Option<Vec<String>>,
    seed: u64,
    config: Option<PathBuf>,
) -> PyResult<String> {
    let methods: Vec<Method> = match methods {
        Some(m) => m.iter().map(|s| s.parse()).collect::<core::Result<_>>().map_err(err)?,
        None => Method::ALL.to_vec(),
    };
    let conditions: Vec<Condition> = match conditions {
        Some(c) => c.iter().map(|s| s.parse()).collect::<core::Result<_>>().map_err(err)?,
        None => Condition::ALL.to_vec(),
    };
    let ck = checkpoint.map(Checkpoint::load).transpose().map_err(err)?;
    let cfg = load_config(config)?;
    let report = py
        .detach(|| bench::run_suite(&methods, data, &conditions, &cfg.suite, ck.as_ref(), seed))
        .map_err(err)?;
    bench::render_structured(&report).map_err(err)
}

/// Renders a structured report as `text` or `structured`.
#[pyfunction]
#[pyo3(signature = (report, format="text"))]
fn render_report(report: &str, format: &str) -> PyResult<String> {
    let r = bench::parse_structured(report).map_err(err)?;
    bench::report_render(&r, format).map_err(err)
}

#[pymodule]
fn applegrasp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GraspError", m.py().get_type::<GraspError>())?;
    m.add_class::<PySphere>()?;
    m.add_class::<PyPose>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyEstimator>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_iou, m)?)?;
    m.add_function(wrap_pyfunction!(orientation_error, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
