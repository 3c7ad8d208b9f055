use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use semeq::channel::{stream_rng, transmit_real, ChannelConfig};
use semeq::equalizers::{self as eqs, count_params as count, NeuralArch, ParamDims, TrainConfig};
use semeq::harness::{run_pilot_sweep, run_snr_sweep, ExperimentConfig, KvConfig};
use semeq::latents::{generate_mismatch as gen_mismatch, Layout, MismatchSpec, PilotSet};
use semeq::metrics::{self, PsnrConfig};
use semeq::numerics::Matrix;
use semeq::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("matrix needs at least one row"));
    }
    Matrix::from_rows(rows).map_err(to_py)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn pilots(x: &[Vec<f64>], y: &[Vec<f64>]) -> PyResult<PilotSet> {
    PilotSet::new(matrix(x)?, matrix(y)?).map_err(to_py)
}

fn snr(snr_db: Option<f64>) -> ChannelConfig {
    ChannelConfig::awgn(snr_db.unwrap_or(f64::INFINITY))
}

/// Closed-form MMSE post-aligner `y = F x`.
#[pyclass(module = "pysemeq")]
struct LinearEqualizer {
    inner: eqs::LinearEqualizer,
}

#[pymethods]
impl LinearEqualizer {
    /// Fits on pilot rows `x` (N×d) and `y` (N×m); `snr_db=None` is noiseless.
    #[staticmethod]
    #[pyo3(signature = (x, y, snr_db=None))]
    fn fit(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, snr_db: Option<f64>) -> PyResult<Self> {
        let noise = eqs::NoiseModel::from_channel(&snr(snr_db));
        let inner = eqs::fit_linear(&pilots(&x, &y)?, &noise).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&x).map_err(to_py)
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.matrix())
    }

    #[getter]
    fn rank_deficient(&self) -> bool {
        self.inner.rank_deficient()
    }
}

/// Zero-shot Parseval frame equalizer built from shared references.
#[pyclass(module = "pysemeq")]
struct PfeEqualizer {
    inner: eqs::PfeEqualizer,
}

#[pymethods]
impl PfeEqualizer {
    #[new]
    fn new(tx_refs: Vec<Vec<f64>>, rx_refs: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = eqs::build_pfe(&matrix(&tx_refs)?, &matrix(&rx_refs)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn analyze(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.analyze(&x).map_err(to_py)
    }

    fn synthesize(&self, c: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.synthesize(&c).map_err(to_py)
    }

    #[getter]
    fn frame_size(&self) -> usize {
        self.inner.frame_size()
    }
}

/// MLP, one-layer CNN or two-layer CNN post-aligner.
#[pyclass(module = "pysemeq")]
struct NeuralEqualizer {
    inner: eqs::NeuralEqualizer,
    layout: Option<Layout>,
}

#[pymethods]
impl NeuralEqualizer {
    /// Trains with channel noise re-drawn on every pass. CNNs need
    /// `layout=(channels, height, width)`.
    #[staticmethod]
    #[pyo3(signature = (arch, x, y, snr_db=None, fading=false, layout=None, max_epochs=2000, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        arch: &str,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        snr_db: Option<f64>,
        fading: bool,
        layout: Option<(usize, usize, usize)>,
        max_epochs: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let arch: NeuralArch = arch.parse().map_err(to_py)?;
        let layout = layout.map(|(c, h, w)| Layout::new(c, h, w));
        let y_layout =
            layout.map(|l| Layout::new(y.first().map_or(0, Vec::len) / (l.height * l.width).max(1), l.height, l.width));
        let set = pilots(&x, &y)?.with_layouts(layout, y_layout).map_err(to_py)?;
        let mut hyper = TrainConfig::for_arch(arch);
        hyper.max_epochs = max_epochs;
        hyper.seed = seed;
        let channel = snr(snr_db).with_fading(fading).with_seed(seed);
        let (inner, _) = eqs::train_neural(arch, &set, &channel, &hyper).map_err(to_py)?;
        Ok(Self { inner, layout })
    }

    /// Applies the network; CNNs accept any height and width via `layout`.
    #[pyo3(signature = (x, layout=None))]
    fn forward(&self, x: Vec<f64>, layout: Option<(usize, usize, usize)>) -> PyResult<Vec<f64>> {
        let layout = layout.map(|(c, h, w)| Layout::new(c, h, w)).or(self.layout);
        self.inner.forward(&x, layout).map_err(to_py)
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.arch().to_string()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
}

/// Parameter count of `arch` ("linear", "mlp", "cnn1", "cnn2"); for CNNs
/// `d` and `m` are the input and output channel counts.
#[pyfunction]
#[pyo3(signature = (arch, d, m=None))]
fn count_params(arch: &str, d: usize, m: Option<usize>) -> PyResult<usize> {
    let m = m.unwrap_or(d);
    let dims = match arch {
        "linear" => ParamDims::Linear { d, m },
        "mlp" => ParamDims::Mlp { d, m },
        "cnn1" => ParamDims::Cnn1 { c_in: d, c_out: m },
        "cnn2" => ParamDims::Cnn2 { c_in: d, c_out: m },
        other => return Err(PyValueError::new_err(format!("unknown architecture `{other}`"))),
    };
    Ok(count(&dims))
}

/// Sends a real latent over the channel and returns `(received, (h.re, h.im))`.
#[pyfunction]
#[pyo3(signature = (x, snr_db=None, fading=false, seed=0))]
fn transmit(x: Vec<f64>, snr_db: Option<f64>, fading: bool, seed: u64) -> PyResult<(Vec<f64>, (f64, f64))> {
    let cfg = snr(snr_db).with_fading(fading);
    let (out, real) = transmit_real(&x, &cfg, &mut stream_rng(seed, 0, 0)).map_err(to_py)?;
    Ok((out, (real.h.re, real.h.im)))
}

#[pyfunction]
fn mse(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    metrics::mse(&a, &b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, peak=1.0, cap_db=100.0))]
fn psnr(a: Vec<f64>, b: Vec<f64>, peak: f64, cap_db: f64) -> PyResult<f64> {
    metrics::psnr(&a, &b, &PsnrConfig { peak, cap_db }).map_err(to_py)
}

/// Synthetic mismatched latents as a dict with `x`, `y`, `x_eval`, `y_eval`.
#[pyfunction]
#[pyo3(signature = (family, d, m, train, eval, seed_tx=42, seed_rx=43, data_seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate_mismatch<'py>(
    py: Python<'py>,
    family: &str,
    d: usize,
    m: usize,
    train: usize,
    eval: usize,
    seed_tx: u64,
    seed_rx: u64,
    data_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = MismatchSpec::new(family.parse().map_err(to_py)?, d, m, seed_tx, seed_rx).with_data_seed(data_seed);
    let data = gen_mismatch(&spec, train, eval).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("x", rows(data.train.x()))?;
    out.set_item("y", rows(data.train.y()))?;
    out.set_item("x_eval", rows(data.eval.x()))?;
    out.set_item("y_eval", rows(data.eval.y()))?;
    Ok(out)
}

/// Runs a sweep from key-value configuration text and returns the CSV.
#[pyfunction]
#[pyo3(signature = (config, kind="pilots"))]
fn run_sweep(py: Python<'_>, config: &str, kind: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_kv(&KvConfig::parse(config).map_err(to_py)?).map_err(to_py)?;
    let report = py
        .detach(|| match kind {
            "pilots" => run_pilot_sweep(&cfg),
            "snr" => run_snr_sweep(&cfg),
            other => Err(Error::Config(format!("unknown sweep `{other}`"))),
        })
        .map_err(to_py)?;
    if !report.is_complete() {
        return Err(PyRuntimeError::new_err(report.failures.join("; ")));
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf, cfg.timing).map_err(to_py)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn pysemeq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LinearEqualizer>()?;
    m.add_class::<PfeEqualizer>()?;
    m.add_class::<NeuralEqualizer>()?;
    m.add_function(wrap_pyfunction!(count_params, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(generate_mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
