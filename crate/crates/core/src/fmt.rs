use std::fmt::Write;

/// Appends a float in shortest round-trip decimal form.
pub(crate) fn push_f64(out: &mut String, value: f64) {
    write!(out, "{value}").expect("writing to a String cannot fail");
}

pub(crate) fn f64_str(value: f64) -> String {
    let mut s = String::new();
    push_f64(&mut s, value);
    s
}
