use std::ffi::CString;

use pyo3::prelude::*;
use readward_py::readward_py;

fn python(code: &str) {
    pyo3::append_to_inittab!(readward_py);
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn env_and_training_round_trip() {
    python(
        r#"
import readward_py as rw
env = rw.Env("ski_run", seed=3)
r = env.reset()
assert env.num_actions == 3 and r["step"] == 0
r = env.step(2)
assert r["step"] == 1
assert rw.object_classes("brick_wall") == ["ball", "brick"]
rows = rw.train("ski_run", steps=3000, seed=4)
assert rows == rw.train("ski_run", steps=3000, seed=4)
assert all(row["aux_sum"] == 0 for row in rows)
try:
    rw.Env("pinball")
except ValueError:
    pass
else:
    raise AssertionError("unknown game accepted")
"#,
    );
}
