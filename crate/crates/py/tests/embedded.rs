use pyo3::ffi::c_str;
use pyo3::prelude::*;

use crowdimpute::crowdimpute;

#[test]
fn module_round_trip() {
    pyo3::append_to_inittab!(crowdimpute);
    Python::initialize();
    Python::attach(|py| {
        let code = c_str!(
            r#"
import crowdimpute as ci
d = ci.synth_fev(120, seed=2)
a, truth = d.ampute("age", 5, seed=1)
assert a.missing_count == 5
mi = ci.multiple_impute(a, m=3, cycles=2, seed=1)
qns = ci.gen_survey(a, ["age"], k=3)
crowd = ci.crowd_imputations(a, qns, ci.simulate_crowd(a, qns, seed=1), 3)
report = ci.compare(truth, crowd, mi)
rows = len(report.to_dict()["rows"])
mean = ci.pool_point([1.0, 2.0, 6.0])
try:
    ci.summarize_cell([])
    raised = False
except ValueError:
    raised = True
"#
        );
        let globals = pyo3::types::PyDict::new(py);
        py.run(code, Some(&globals), None).unwrap();
        let rows: usize = globals.get_item("rows").unwrap().unwrap().extract().unwrap();
        let mean: f64 = globals.get_item("mean").unwrap().unwrap().extract().unwrap();
        let raised: bool = globals.get_item("raised").unwrap().unwrap().extract().unwrap();
        assert_eq!(rows, 5);
        assert_eq!(mean, 3.0);
        assert!(raised);
    });
}
