use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(mmdrl_py::mmdrl_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("m", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn kernel_and_mmd_roundtrip() {
    with_module(c_str!(
        r#"
import math
k = m.Kernel.gaussian(1.0)
assert abs(k(0.0, 1.0) - math.exp(-1.0)) < 1e-12
p = m.DiscreteMeasure([0.0, 2.0], [0.25, 0.75])
assert abs(p.mean() - 1.5) < 1e-12
assert m.mmd_squared(p, p, k) < 1e-12
e = m.Kernel.unrectified(1.0)
d = m.mmd_squared(m.DiscreteMeasure.dirac(0.0), m.DiscreteMeasure.dirac(3.0), e)
assert abs(d - 6.0) < 1e-9
"#
    ));
}

#[test]
fn invalid_arguments_raise_value_error() {
    with_module(c_str!(
        r#"
for bad in (lambda: m.Kernel.gaussian(0.0),
            lambda: m.DiscreteMeasure([0.0], [0.3]),
            lambda: m.Kernel("nonsense"),
            lambda: m.build_chain(1)):
    try:
        bad()
    except ValueError:
        continue
    raise AssertionError("no ValueError")
"#
    ));
}

#[test]
fn chain_evaluation_through_bindings() {
    with_module(c_str!(
        r#"
c = m.build_chain(2)
t = m.run_policy_evaluation(c, method="quantile", seed=1)
z = t.get(0, 0)
assert len(z) == 30
assert abs(sum(z) / len(z) - 0.8 / 0.91) < 0.1
try:
    t.get(5, 0)
    raise AssertionError("out of range accepted")
except ValueError:
    pass
"#
    ));
}
