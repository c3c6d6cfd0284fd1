use pyo3::prelude::*;

#[pymodule]
fn nbv_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
