/// Formats `x` with 12 significant digits: fixed notation for magnitudes in
/// `[1e-4, 1e12)`, scientific otherwise. Output depends only on the value.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("scientific format has an exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// As [`sig12`] with trailing fractional zeros removed, for grid values.
pub fn sig12_short(x: f64) -> String {
    let s = sig12(x);
    let (mantissa, exp) = match s.split_once('e') {
        Some((m, e)) => (m, Some(e)),
        None => (s.as_str(), None),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    match exp {
        Some(e) => format!("{mantissa}e{e}"),
        None => mantissa.to_string(),
    }
}
