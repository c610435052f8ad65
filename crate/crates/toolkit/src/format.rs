/// `x` rounded to six significant digits, printed without trailing zeros.
///
/// The output is a pure function of `x`, so files built from it are
/// byte-identical across runs.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}
