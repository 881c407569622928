//! Fixed-precision numeric output.
//!
//! Reports and model files carry 9 significant digits so that they compare
//! byte-for-byte across platforms. Trace files use the shortest exact
//! representation instead (see [`crate::evaluation::write_trace`]).

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

pub fn ser_sig<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

pub fn ser_sig_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig(*v)),
        None => s.serialize_none(),
    }
}
