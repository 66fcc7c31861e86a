//! Peak location on a log-frequency axis.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Index of the largest sample. Ties resolve to the first index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Number of strict interior local maxima of a sampled curve.
pub fn count_local_maxima(values: &[f64]) -> usize {
    if values.len() < 3 {
        return 0;
    }
    let mut count = 0;
    let mut i = 1;
    while i + 1 < values.len() {
        if values[i] > values[i - 1] {
            // walk over plateaus
            let mut j = i;
            while j + 1 < values.len() && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < values.len() && values[j + 1] < values[i] {
                count += 1;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    count
}

/// Golden-section maximisation of `f` over [a, b] in ln(omega), to absolute
/// tolerance `tol` in ln(omega) (i.e. relative tolerance in omega).
pub fn golden_max_log<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2.exp())?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1.exp())?;
        }
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x.exp(), fx))
}

/// Coarse argmax over `samples` (taken at `omegas`), refined by golden section
/// between the neighbouring grid points. Returns (omega*, f(omega*)).
pub fn refine_peak<F>(omegas: &[f64], samples: &[f64], f: F, rel_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert_eq!(omegas.len(), samples.len());
    let len = samples.len();
    let k = argmax(samples).ok_or(Error::NoInteriorMaximum { index: 0, len })?;
    if k == 0 || k + 1 >= len {
        return Err(Error::NoInteriorMaximum { index: k, len });
    }
    let (w, v) = golden_max_log(f, omegas[k - 1], omegas[k + 1], rel_tol)?;
    if v < samples[k] {
        return Ok((omegas[k], samples[k]));
    }
    Ok((w, v))
}
