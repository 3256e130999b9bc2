use pyo3::ffi::c_str;
use pyo3::prelude::*;
use volrelax_py::volrelax_module;

fn with_module(body: &std::ffi::CStr) {
    pyo3::append_to_inittab!(volrelax_module);
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(body, None, None) {
            e.display(py);
            panic!("python snippet raised");
        }
    });
}

#[test]
fn pipeline_from_python() {
    with_module(c_str!(
        r#"
import json, volrelax as vr
times = vr.spaced_shock_times(60000, 10, 600, 300, 2)
spec = {"kind": "omori_symmetric", "n_bars": 60000, "amplitude": 5, "p_post": 0.4, "p_pre": 0.4,
        "reach": 300, "seed": 2, "shocks": [{"time": t, "magnitude": 10} for t in times]}
vol = vr.generate(json.dumps(spec)).volatility()
events = vol.select_events(8.0)
assert set(times) <= set(events.indices)
v = vr.remanent(vol, events, "minus", 150)
assert v.direction == "minus" and abs(v.value_at(0) - 1.0) < 1e-12
V = vr.cumulate(v)
assert V.kind == "cumulative_V", V.kind
fit = vr.fit_cumulative(V, (1, 150))
assert 0.0 <= fit.p <= 1.5 and fit.window == (1, 150)
try:
    vr.remanent(vol, events, "sideways", 10)
    raise AssertionError("bad direction accepted")
except ValueError:
    pass
try:
    vr.bootstrap(vol, events, "plus", 150, (1, 150), replicates=10)
    raise AssertionError("too few replicates accepted")
except ValueError:
    pass
"#
    ));
}
