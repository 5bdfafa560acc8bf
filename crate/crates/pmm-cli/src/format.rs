//! Fixed decimal formatting for traces and reports.
//!
//! Every float written by the CLI is first rounded to [`SIG_DIGITS`]
//! significant digits, then printed in its shortest round-trip form. The
//! output of a replay is therefore byte-stable across runs and platforms.

use serde::Serialize;
use serde_json::Value;

pub const SIG_DIGITS: usize = 12;

/// `x` rounded to `SIG_DIGITS` significant digits. Non-finite values pass
/// through; negative zero becomes zero.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Rounds every float inside a JSON value in place. Integers are untouched.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(m) = serde_json::Number::from_f64(round_sig(x)) {
                *n = m;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// One JSON line with every float rounded.
pub fn to_line<T: Serialize>(item: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(item)?;
    round_value(&mut v);
    serde_json::to_string(&v)
}

/// A float cell for CSV output.
pub fn cell(x: f64) -> String {
    round_sig(x).to_string()
}
