//! Float helpers routed through `libm` so the crate stays `no_std`.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// `|a - b| <= tol`, with infinities equal to themselves.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol
}

/// Van der Corput / golden-ratio low-discrepancy point in [0, 1).
pub fn quasi(i: usize) -> f64 {
    const PHI: f64 = 0.618_033_988_749_894_8;
    let v = (i as f64 + 1.0) * PHI;
    v - floor(v)
}
