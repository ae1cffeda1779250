//! Python bindings: parse, check, format, evaluate and simulate Mimosa
//! programs from Python.
//!
//! Values cross the boundary as plain Python objects: `int`, `bool`,
//! `float`, tuples, `()` for unit and `None` for an empty option. A present
//! option is passed as its content, so host results are converted using the
//! prototype's declared output type.

use std::collections::BTreeMap;

use mimosa_core::analysis::{check_program_with, CheckOptions, CheckedProgram, Type};
use mimosa_core::ast::{Literal, Value};
use mimosa_core::diag::{Diagnostic, LineIndex};
use mimosa_core::eval::{eval, Env};
use mimosa_core::parser::{parse_duration, parse_expression, parse_program};
use mimosa_core::pretty::{expr_to_string, program_to_string};
use mimosa_core::sim::{
    self, HostCtx, HostRegistry, HostStep, Printer, Schedule, SimConfig, ValueSeq,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyTuple};

create_exception!(
    mimosa,
    MimosaError,
    PyException,
    "Raised for diagnostics and simulation failures."
);

fn render(source: &str, diags: &[Diagnostic]) -> Vec<String> {
    let index = LineIndex::new(source);
    diags.iter().map(|d| d.render("<input>", &index)).collect()
}

fn diagnostics_error(source: &str, diags: &[Diagnostic]) -> PyErr {
    MimosaError::new_err(render(source, diags).join("\n"))
}

fn checked(source: &str, opts: CheckOptions) -> PyResult<CheckedProgram> {
    let program = parse_program(source).map_err(|errs| {
        let diags: Vec<Diagnostic> = errs.into_iter().map(Diagnostic::from).collect();
        diagnostics_error(source, &diags)
    })?;
    check_program_with(&program, opts).map_err(|diags| diagnostics_error(source, &diags))
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Const(Literal::Int(i)) => i.into_pyobject(py)?.into_any().unbind(),
        Value::Const(Literal::Bool(b)) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Const(Literal::Real(r)) => PyFloat::new(py, *r).into_any().unbind(),
        Value::Const(Literal::Unit) => PyTuple::empty(py).into_any().unbind(),
        Value::Tuple(items) => {
            let items = items
                .iter()
                .map(|i| value_to_py(py, i))
                .collect::<PyResult<Vec<_>>>()?;
            PyTuple::new(py, items)?.into_any().unbind()
        }
        Value::None => py.None(),
        Value::Some(inner) => value_to_py(py, inner)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "`{other}` has no Python counterpart"
            )))
        }
    })
}

/// Converts following `ty`; unknown types fall back on the Python type.
fn py_to_value(obj: &Bound<'_, PyAny>, ty: Option<&Type>) -> PyResult<Value> {
    match ty {
        Some(Type::Option(inner)) => {
            return if obj.is_none() {
                Ok(Value::None)
            } else {
                Ok(Value::some(py_to_value(obj, Some(inner))?))
            };
        }
        Some(Type::Tuple(types)) => {
            let items = obj.cast::<PyTuple>()?;
            if items.len() != types.len() {
                return Err(PyValueError::new_err(format!(
                    "expected a tuple of {} items, got {}",
                    types.len(),
                    items.len()
                )));
            }
            return items
                .iter()
                .zip(types)
                .map(|(o, t)| py_to_value(&o, Some(t)))
                .collect::<PyResult<Vec<_>>>()
                .map(Value::Tuple);
        }
        Some(Type::Real) => return Ok(Value::real(obj.extract::<f64>()?)),
        _ => {}
    }
    if obj.is_instance_of::<PyBool>() {
        Ok(Value::boolean(obj.extract()?))
    } else if obj.is_instance_of::<PyInt>() {
        Ok(Value::int(obj.extract()?))
    } else if obj.is_instance_of::<PyFloat>() {
        Ok(Value::real(obj.extract()?))
    } else if obj.is_none() {
        Ok(Value::None)
    } else if let Ok(items) = obj.cast::<PyTuple>() {
        if items.is_empty() {
            return Ok(Value::unit());
        }
        let elem = match ty {
            Some(Type::Tuple(ts)) => ts.iter().map(Some).collect::<Vec<_>>(),
            _ => vec![None; items.len()],
        };
        items
            .iter()
            .zip(elem)
            .map(|(o, t)| py_to_value(&o, t))
            .collect::<PyResult<Vec<_>>>()
            .map(Value::Tuple)
    } else {
        Err(PyValueError::new_err(format!(
            "cannot convert `{}` to a Mimosa value",
            obj.repr()?
        )))
    }
}

/// A prototype implemented by a Python callable taking `(time_us, argument)`.
struct PyHost {
    func: Py<PyAny>,
    output: Option<Type>,
}

impl HostStep for PyHost {
    fn call(&mut self, ctx: &mut HostCtx<'_>, arg: Value) -> Result<Value, String> {
        Python::attach(|py| {
            let arg = value_to_py(py, &arg)?;
            let result = self.func.call1(py, (ctx.time, arg))?;
            py_to_value(result.bind(py), self.output.as_ref())
        })
        .map_err(|e: PyErr| e.to_string())
    }
}

/// Registry for one run: the built-in printers plus the given stubs. A stub
/// is `"print"`, a list of values replayed in order, or a callable.
fn registry(cp: &CheckedProgram, stubs: Option<&Bound<'_, PyDict>>) -> PyResult<HostRegistry> {
    let mut hosts = sim::builtin_hosts();
    let Some(stubs) = stubs else {
        return Ok(hosts);
    };
    for (name, stub) in stubs.iter() {
        let name: String = name.extract()?;
        let output = cp
            .step(&name)
            .and_then(|s| s.scheme.output().cloned())
            .filter(|t| !matches!(t, Type::Var(_)));
        if let Ok(kind) = stub.extract::<String>() {
            if kind != "print" {
                return Err(PyValueError::new_err(format!(
                    "unknown stub `{kind}` for `{name}`"
                )));
            }
            hosts.bind(name, Printer);
        } else if let Ok(list) = stub.cast::<PyList>() {
            let values = list
                .iter()
                .map(|o| py_to_value(&o, output.as_ref()))
                .collect::<PyResult<Vec<_>>>()?;
            hosts.bind(name, ValueSeq::new(values).map_err(PyValueError::new_err)?);
        } else if stub.is_callable() {
            hosts.bind(
                name,
                PyHost {
                    func: stub.clone().unbind(),
                    output,
                },
            );
        } else {
            return Err(PyValueError::new_err(format!(
                "stub for `{name}` must be \"print\", a list or a callable"
            )));
        }
    }
    Ok(hosts)
}

fn horizon_us(horizon: &Bound<'_, PyAny>) -> PyResult<u64> {
    let us = match horizon.extract::<String>() {
        Ok(text) => parse_duration(&text).map_err(|e| PyValueError::new_err(e.message))?,
        Err(_) => horizon.extract::<u64>()?,
    };
    if us == 0 {
        return Err(PyValueError::new_err("the horizon must be positive"));
    }
    Ok(us)
}

fn schedule(name: &str) -> PyResult<Schedule> {
    match name {
        "deterministic" => Ok(Schedule::Deterministic),
        "randomized" => Ok(Schedule::Randomized),
        other => Err(PyValueError::new_err(format!(
            "unknown schedule `{other}`; expected \"deterministic\" or \"randomized\""
        ))),
    }
}

/// Diagnostics for `source` as `<input>:line:col: error: message` strings;
/// empty when the program is accepted.
#[pyfunction]
#[pyo3(signature = (source, allow_open = false))]
fn check(source: &str, allow_open: bool) -> Vec<String> {
    let opts = CheckOptions {
        closed_network: !allow_open,
        ..CheckOptions::default()
    };
    match parse_program(source) {
        Err(errs) => render(
            source,
            &errs.into_iter().map(Diagnostic::from).collect::<Vec<_>>(),
        ),
        Ok(p) => match check_program_with(&p, opts) {
            Ok(_) => Vec::new(),
            Err(diags) => render(source, &diags),
        },
    }
}

/// The program in canonical concrete syntax.
#[pyfunction]
fn format(source: &str) -> PyResult<String> {
    let p = parse_program(source).map_err(|errs| {
        let diags: Vec<Diagnostic> = errs.into_iter().map(Diagnostic::from).collect();
        diagnostics_error(source, &diags)
    })?;
    Ok(program_to_string(&p))
}

/// Evaluates one cycle of an expression. Returns the value and the next
/// expression, both as source text.
#[pyfunction]
#[pyo3(signature = (expr, env = None))]
fn eval_expression(expr: &str, env: Option<&Bound<'_, PyDict>>) -> PyResult<(String, String)> {
    let e = parse_expression(expr).map_err(|err| MimosaError::new_err(err.to_string()))?;
    let mut bindings = BTreeMap::new();
    if let Some(env) = env {
        for (k, v) in env.iter() {
            bindings.insert(k.extract::<String>()?, py_to_value(&v, None)?);
        }
    }
    let r = eval(&Env::from_bindings(bindings), &e)
        .map_err(|err| MimosaError::new_err(err.to_string()))?;
    Ok((r.value.to_string(), expr_to_string(&r.next)))
}

/// Simulates a closed network for `horizon` (`"200ms"` or microseconds).
/// Returns a dict with `trace`, a list of `(time_us, channel, value, node)`,
/// and `output`, the lines printed by host steps.
#[pyfunction]
#[pyo3(signature = (source, horizon, *, seed = 0, schedule = "deterministic", stubs = None))]
fn run<'py>(
    py: Python<'py>,
    source: &str,
    horizon: &Bound<'py, PyAny>,
    seed: u64,
    schedule: &str,
    stubs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cp = checked(source, CheckOptions::default())?;
    let cfg = SimConfig {
        seed,
        schedule: self::schedule(schedule)?,
        ..SimConfig::new(horizon_us(horizon)?)
    };
    let hosts = registry(&cp, stubs)?;
    let out = sim::run(&cp, &cfg, hosts).map_err(|e| MimosaError::new_err(e.to_string()))?;
    let trace = out
        .trace
        .iter()
        .map(|e| {
            Ok((
                e.time,
                e.channel.clone(),
                value_to_py(py, &e.value)?,
                e.node.clone(),
            ))
        })
        .collect::<PyResult<Vec<_>>>()?;
    let result = PyDict::new(py);
    result.set_item("trace", trace)?;
    result.set_item("output", out.host_output)?;
    Ok(result)
}

/// Compares `runs` randomized schedules against the deterministic one.
/// Returns `None` when every per-channel history agrees, otherwise a
/// description of the first divergence. List stubs are replayed from the
/// start for every run; callables must be deterministic.
#[pyfunction]
#[pyo3(signature = (source, horizon, *, runs = 50, seed = 0, stubs = None))]
fn confluence<'py>(
    source: &str,
    horizon: &Bound<'py, PyAny>,
    runs: usize,
    seed: u64,
    stubs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Option<String>> {
    let cp = checked(source, CheckOptions::default())?;
    let cfg = SimConfig {
        seed,
        ..SimConfig::new(horizon_us(horizon)?)
    };
    // build once up front so conversion errors surface as Python errors
    registry(&cp, stubs)?;
    let factory = || registry(&cp, stubs).expect("stubs were validated");
    let report = sim::run_randomized_equivalence(&cp, &cfg, &factory, runs)
        .map_err(|e| MimosaError::new_err(e.to_string()))?;
    Ok(report.divergence.map(|d| d.to_string()))
}

#[pymodule]
fn mimosa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MimosaError", m.py().get_type::<MimosaError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(format, m)?)?;
    m.add_function(wrap_pyfunction!(eval_expression, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(confluence, m)?)?;
    Ok(())
}
