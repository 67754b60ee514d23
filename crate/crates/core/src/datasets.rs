//! Benchmark datasets bundled with the crate.
//!
//! * `pima`: Pima Indians diabetes, 768 rows, 8 features, positive class is
//!   "tested positive".
//! * `breast_cancer`: Wisconsin breast cancer (original), 699 rows, 8
//!   features (bare nuclei dropped), positive class is malignant.

use crate::data::{self, CsvOptions, Dataset};
use crate::error::{Error, Result};

const PIMA: &str = include_str!("../data/pima.csv");
const BREAST_CANCER: &str = include_str!("../data/breast_cancer.csv");

pub const NAMES: [&str; 2] = ["pima", "breast_cancer"];

pub fn load(name: &str) -> Result<Dataset> {
    let text = match name {
        "pima" => PIMA,
        "breast_cancer" | "breast" => BREAST_CANCER,
        other => return Err(Error::invalid(format!("unknown built-in dataset {other:?}"))),
    };
    let opts = CsvOptions { has_header: Some(true), ..CsvOptions::default() };
    data::read_csv(text.as_bytes(), &opts)
}
