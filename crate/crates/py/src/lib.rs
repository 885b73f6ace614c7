//! Python bindings: rating matrices, the four measures, hyper-class
//! selection, prediction and cross-validated evaluation.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hcrep::harness::{self, AlgorithmName, EvalConfig};
use hcrep::{
    Algorithm, CfParams, CsvSchema, Error, MeasureKind, MissingPolicy, NeighborhoodConfig, Norm, Scale, SizeProfile,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn neighborhood(delta: f64, norm: &str, normalize: bool, missing: &str) -> PyResult<NeighborhoodConfig> {
    let norm = match norm {
        "chebyshev" => Norm::Chebyshev,
        "euclidean" => Norm::Euclidean,
        other => return Err(PyValueError::new_err(format!("unknown norm {other:?}"))),
    };
    let missing = match missing {
        "zero" => MissingPolicy::Zero,
        "skip" => MissingPolicy::Skip,
        other => return Err(PyValueError::new_err(format!("unknown missing policy {other:?}"))),
    };
    let cfg = NeighborhoodConfig {
        delta,
        norm,
        normalize,
        missing,
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn scale(bounds: (f64, f64)) -> PyResult<Scale> {
    Scale::new(bounds.0, bounds.1).map_err(to_py)
}

#[pyclass(name = "RatingMatrix", module = "pyhcrep", frozen)]
struct PyRatingMatrix {
    inner: hcrep::RatingMatrix,
}

#[pymethods]
impl PyRatingMatrix {
    #[staticmethod]
    fn load_movielens(path: &str) -> PyResult<Self> {
        Ok(PyRatingMatrix {
            inner: hcrep::load_movielens(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, user="user", item="item", rating="rating", bounds=(1.0, 5.0)))]
    fn load_csv(path: &str, user: &str, item: &str, rating: &str, bounds: (f64, f64)) -> PyResult<Self> {
        let schema = CsvSchema {
            user: user.into(),
            item: item.into(),
            rating: rating.into(),
        };
        Ok(PyRatingMatrix {
            inner: hcrep::load_csv(path, &schema, scale(bounds)?).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_cache(path: &str) -> PyResult<Self> {
        Ok(PyRatingMatrix {
            inner: hcrep::read_cache(path).map_err(to_py)?,
        })
    }

    /// Rows of ratings with `None` for missing entries.
    #[staticmethod]
    #[pyo3(signature = (rows, bounds=(1.0, 5.0)))]
    fn from_dense(rows: Vec<Vec<Option<f64>>>, bounds: (f64, f64)) -> PyResult<Self> {
        Ok(PyRatingMatrix {
            inner: hcrep::RatingMatrix::from_dense(&rows, scale(bounds)?).map_err(to_py)?,
        })
    }

    fn write_cache(&self, path: &str) -> PyResult<()> {
        hcrep::write_cache(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn duplicates(&self) -> usize {
        self.inner.duplicates()
    }

    #[getter]
    fn user_ids(&self) -> Vec<String> {
        self.inner.user_ids().to_vec()
    }

    #[getter]
    fn item_ids(&self) -> Vec<String> {
        self.inner.item_ids().to_vec()
    }

    fn get(&self, user: usize, item: usize) -> Option<f64> {
        self.inner.get(user, item)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RatingMatrix(n_users={}, n_items={}, ratings={})",
            self.inner.n_users(),
            self.inner.n_items(),
            self.inner.len()
        )
    }
}

#[pyclass(name = "HyperClass", module = "pyhcrep", frozen)]
struct PyHyperClass {
    inner: hcrep::HyperClass,
}

#[pymethods]
impl PyHyperClass {
    #[getter]
    fn measure(&self) -> &'static str {
        self.inner.measure.name()
    }

    #[getter]
    fn decision_feature(&self) -> usize {
        self.inner.decision_feature
    }

    #[getter]
    fn score(&self) -> f64 {
        self.inner.score
    }

    #[getter]
    fn blocks(&self) -> Vec<Vec<usize>> {
        self.inner.blocks.blocks.clone()
    }

    #[getter]
    fn representatives(&self) -> Vec<Option<f64>> {
        self.inner.representatives.clone()
    }

    /// Block index for a raw decision-feature value (`None` for missing).
    fn assign(&self, value: Option<f64>) -> usize {
        self.inner.assign(value)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "HyperClass(measure={}, decision_feature={}, score={}, blocks={})",
            self.inner.measure.name(),
            self.inner.decision_feature,
            self.inner.score,
            self.inner.n_blocks()
        )
    }
}

fn profiles(a: Vec<usize>, b: Vec<usize>, universe: usize) -> PyResult<(SizeProfile, SizeProfile)> {
    Ok((
        SizeProfile::new(a, universe).map_err(to_py)?,
        SizeProfile::new(b, universe).map_err(to_py)?,
    ))
}

/// Information entropy from per-sample neighbor-set sizes.
#[pyfunction]
fn info_entropy(sizes: Vec<usize>, universe: usize) -> PyResult<f64> {
    hcrep::info_entropy(&SizeProfile::new(sizes, universe).map_err(to_py)?).map_err(to_py)
}

#[pyfunction]
fn cross_entropy(a: Vec<usize>, b: Vec<usize>, universe: usize) -> PyResult<f64> {
    let (a, b) = profiles(a, b, universe)?;
    hcrep::cross_entropy(&a, &b).map_err(to_py)
}

#[pyfunction]
fn kl_divergence(a: Vec<usize>, b: Vec<usize>, universe: usize) -> PyResult<f64> {
    let (a, b) = profiles(a, b, universe)?;
    hcrep::kl_divergence(&a, &b).map_err(to_py)
}

#[pyfunction]
fn js_divergence(a: Vec<usize>, b: Vec<usize>, universe: usize) -> PyResult<f64> {
    let (a, b) = profiles(a, b, universe)?;
    hcrep::js_divergence(&a, &b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (matrix, feature, delta=0.0, norm="chebyshev", normalize=true, missing="zero"))]
fn cover_of_feature(
    matrix: &PyRatingMatrix,
    feature: usize,
    delta: f64,
    norm: &str,
    normalize: bool,
    missing: &str,
) -> PyResult<Vec<Vec<usize>>> {
    let cfg = neighborhood(delta, norm, normalize, missing)?;
    Ok(hcrep::cover_of_feature(&matrix.inner, feature, &cfg).map_err(to_py)?.blocks)
}

#[pyfunction]
#[pyo3(signature = (matrix, feature, delta=0.0, norm="chebyshev", normalize=true, missing="zero"))]
fn cover_of_complement(
    matrix: &PyRatingMatrix,
    feature: usize,
    delta: f64,
    norm: &str,
    normalize: bool,
    missing: &str,
) -> PyResult<Vec<Vec<usize>>> {
    let cfg = neighborhood(delta, norm, normalize, missing)?;
    Ok(hcrep::cover_of_complement(&matrix.inner, feature, &cfg).map_err(to_py)?.blocks)
}

#[pyfunction]
#[pyo3(signature = (matrix, measure="ce", delta=0.0, norm="chebyshev", normalize=true, missing="zero"))]
fn build_hyperclass(
    matrix: &PyRatingMatrix,
    measure: &str,
    delta: f64,
    norm: &str,
    normalize: bool,
    missing: &str,
) -> PyResult<PyHyperClass> {
    let kind: MeasureKind = measure.parse().map_err(to_py)?;
    let cfg = neighborhood(delta, norm, normalize, missing)?;
    Ok(PyHyperClass {
        inner: hcrep::build_hyperclass(&matrix.inner, kind, &cfg).map_err(to_py)?,
    })
}

fn algorithm<'a>(name: &str, hyperclass: Option<&'a PyHyperClass>) -> PyResult<Algorithm<'a>> {
    match (name, hyperclass) {
        ("usercf", _) => Ok(Algorithm::UserCf),
        ("itemcf", _) => Ok(Algorithm::ItemCf),
        ("hyperclass", Some(hc)) => Ok(Algorithm::HyperClass(&hc.inner)),
        ("hyperclass", None) => Err(PyValueError::new_err("algorithm 'hyperclass' needs a hyperclass")),
        (other, _) => Err(PyValueError::new_err(format!("unknown algorithm {other:?}"))),
    }
}

fn check_query(matrix: &hcrep::RatingMatrix, user: usize, item: usize) -> PyResult<()> {
    if user >= matrix.n_users() || item >= matrix.n_items() {
        return Err(PyValueError::new_err(format!("({user}, {item}) out of range")));
    }
    Ok(())
}

/// Predicted rating of `item` for `user`. `algorithm` is `usercf`, `itemcf`
/// or `hyperclass` (which needs `hyperclass`).
#[pyfunction]
#[pyo3(signature = (matrix, user, item, algorithm="usercf", k=10, hyperclass=None))]
fn predict(
    matrix: &PyRatingMatrix,
    user: usize,
    item: usize,
    algorithm: &str,
    k: usize,
    hyperclass: Option<&PyHyperClass>,
) -> PyResult<f64> {
    check_query(&matrix.inner, user, item)?;
    let alg = self::algorithm(algorithm, hyperclass)?;
    let params = CfParams {
        k,
        ..CfParams::default()
    };
    Ok(alg.predict(&matrix.inner, user, item, &params).value)
}

#[pyfunction]
#[pyo3(signature = (matrix, user, n, algorithm="usercf", k=10, hyperclass=None))]
fn top_n(
    matrix: &PyRatingMatrix,
    user: usize,
    n: usize,
    algorithm: &str,
    k: usize,
    hyperclass: Option<&PyHyperClass>,
) -> PyResult<Vec<usize>> {
    let alg = self::algorithm(algorithm, hyperclass)?;
    let params = CfParams {
        k,
        ..CfParams::default()
    };
    hcrep::top_n(&matrix.inner, alg, user, n, &params).map_err(to_py)
}

/// Cross-validated evaluation; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (matrix, algorithms=vec!["usercf".to_string(), "cf_ce".to_string()], k=10, folds=10, seed=42, delta=0.0, reference=None))]
fn evaluate(
    py: Python<'_>,
    matrix: &PyRatingMatrix,
    algorithms: Vec<String>,
    k: usize,
    folds: usize,
    seed: u64,
    delta: f64,
    reference: Option<String>,
) -> PyResult<String> {
    let algorithms = algorithms
        .iter()
        .map(|a| a.parse::<AlgorithmName>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let config = EvalConfig {
        dataset: "python".into(),
        reference,
        algorithms,
        k,
        folds,
        seed,
        neighborhood: NeighborhoodConfig::with_delta(delta),
        ..EvalConfig::default()
    };
    let report = py.detach(|| harness::evaluate(&matrix.inner, &config)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyhcrep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRatingMatrix>()?;
    m.add_class::<PyHyperClass>()?;
    m.add_function(wrap_pyfunction!(info_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(js_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(cover_of_feature, m)?)?;
    m.add_function(wrap_pyfunction!(cover_of_complement, m)?)?;
    m.add_function(wrap_pyfunction!(build_hyperclass, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(top_n, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
