//! Sample-level certificates for the positivity and growth hypotheses.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::real::Real;

/// Spectrum positivity of a sampled even kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BochnerReport {
    pub pass: bool,
    pub min_spectrum: f64,
    pub max_spectrum: f64,
}

/// Growth certificate of a radial profile `V̄(r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QvReport {
    pub pass: bool,
    /// Fitted growth exponent minus two.
    pub epsilon: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    /// Why the profile could not be assessed, if it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub bochner_pass: bool,
    pub bochner_min_spectrum: f64,
    pub qv_pass: bool,
    pub growth_exponent: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl HypothesisReport {
    pub fn new(bochner: &BochnerReport, qv: &QvReport) -> Self {
        Self {
            bochner_pass: bochner.pass,
            bochner_min_spectrum: bochner.min_spectrum,
            qv_pass: qv.pass,
            growth_exponent: 2.0 + qv.epsilon,
            e1: qv.e1,
            e2: qv.e2,
            e3: qv.e3,
        }
    }
}

/// Discrete Fourier spectrum of an even kernel sampled on a symmetric grid
/// with an odd node count. The kernel is rotated so that `x = 0` sits at
/// index 0, which makes the spectrum real.
pub fn kernel_spectrum<T: Real>(v1: &ScalarField<T>) -> Result<Vec<T>> {
    let grid = v1.grid();
    if grid.dims() != 1 {
        return Err(Error::UnsupportedDimension("spectra are computed for 1D kernels".into()));
    }
    let n = grid.points(0);
    let tol = T::tol(1e-12) * (T::one() + grid.upper(0).abs());
    if n.is_multiple_of(2) || (grid.lower(0) + grid.upper(0)).abs() > tol {
        return Err(Error::InvalidGrid(
            "kernel grid must be symmetric about 0 with an odd node count".into(),
        ));
    }
    let center = (n - 1) / 2;
    let v = v1.values();
    let mut buf: Vec<Complex<T>> = (0..n)
        .map(|j| Complex::new(v[(center + j) % n], T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf.into_iter().map(|c| c.re).collect())
}

pub fn bochner_check<T: Real>(v1: &ScalarField<T>) -> Result<BochnerReport> {
    let spectrum = kernel_spectrum(v1)?;
    let min = spectrum.iter().fold(f64::INFINITY, |m, v| m.min(v.to_f64_lossy()));
    let max = spectrum.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64_lossy()));
    Ok(BochnerReport {
        pass: min >= -1e-10 * max.abs(),
        min_spectrum: min,
        max_spectrum: max,
    })
}

/// Certifies `V̄(r) ≥ e1 r^{2+ε} - e2` and `V̄'(r) ≤ e3 V̄(r)^{3/2}` on the
/// samples.
///
/// `ε` is the least-squares log-log slope of `V̄` over the outer half of the
/// radii, minus two. Given `ε`, `e1` is the smallest ratio `V̄/r^{2+ε}` on
/// the outer half and `e2` the smallest offset making the first bound hold at
/// every sample. `e3` is the largest `V̄'/V̄^{3/2}` over samples with `V̄ ≥ 1`
/// (the bound only constrains large radii). The check passes when `ε > 0`
/// (beyond 1e-6), `e1 > 0` and `e3` is finite.
pub fn qv_check(r: &[f64], vbar: &[f64]) -> Result<QvReport> {
    if r.len() != vbar.len() || r.len() < 4 {
        return Err(Error::InvalidProfile("need at least four (r, V̄) samples".into()));
    }
    if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProfile("radii must be nonnegative and strictly increasing".into()));
    }
    if vbar.iter().any(|v| !v.is_finite()) || vbar.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProfile("V̄ must be finite and increasing".into()));
    }
    let r_max = r[r.len() - 1];
    let tail: Vec<usize> = (0..r.len())
        .filter(|&i| r[i] >= 0.5 * r_max && r[i] > 0.0 && vbar[i] > 0.0)
        .collect();
    if tail.len() < 2 {
        return Err(Error::InvalidProfile("V̄ is not positive on the outer radii".into()));
    }
    let xs: Vec<f64> = tail.iter().map(|&i| r[i].ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|&i| vbar[i].ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let epsilon = (sxy / sxx - 2.0).max(0.0);
    let power = 2.0 + epsilon;

    let e1 = tail
        .iter()
        .map(|&i| vbar[i] / r[i].powf(power))
        .fold(f64::INFINITY, f64::min);
    let e2 = (0..r.len())
        .map(|i| e1 * r[i].powf(power) - vbar[i])
        .fold(0.0, f64::max);

    let n = r.len();
    let derivative = |i: usize| -> f64 {
        if i == 0 {
            (vbar[1] - vbar[0]) / (r[1] - r[0])
        } else if i == n - 1 {
            (vbar[n - 1] - vbar[n - 2]) / (r[n - 1] - r[n - 2])
        } else {
            (vbar[i + 1] - vbar[i - 1]) / (r[i + 1] - r[i - 1])
        }
    };
    let e3 = (0..n)
        .filter(|&i| vbar[i] >= 1.0)
        .map(|i| (derivative(i) / vbar[i].powf(1.5)).max(0.0))
        .fold(0.0, f64::max);

    Ok(QvReport {
        pass: epsilon > 1e-6 && e1 > 0.0 && e3.is_finite(),
        epsilon,
        e1,
        e2,
        e3,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use crate::potentials::Kernel;
    use std::f64::consts::PI;

    fn radii() -> Vec<f64> {
        (0..=200).map(|i| i as f64 * 0.05).collect()
    }

    #[test]
    fn bochner_gaussian_cosine_and_parabola() {
        let g = UniformGrid::<f64>::symmetric_line(8.0, 257).unwrap().difference_grid().unwrap();
        let gauss = ScalarField::from_fn(g.clone(), |x| (-x[0] * x[0] / 2.0).exp());
        assert!(bochner_check(&gauss).unwrap().pass);

        let parabola = ScalarField::from_fn(g.clone(), |x| {
            if x[0].abs() <= 1.0 {
                1.0 - x[0] * x[0]
            } else {
                0.0
            }
        });
        let report = bochner_check(&parabola).unwrap();
        assert!(!report.pass);
        assert!(report.min_spectrum < -1e-10 * report.max_spectrum);

        // 129 nodes spanning exactly four periods of cos(x)
        let h = 8.0 * PI / 129.0;
        let c = UniformGrid::<f64>::symmetric_line(64.0 * h, 129).unwrap();
        let cos = Kernel::Cosine { k: 1.0 }.sample(&c).unwrap();
        let report = bochner_check(&cos).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn bochner_rejects_asymmetric_grids() {
        let g = UniformGrid::<f64>::line(-1.0, 2.0, 31).unwrap();
        assert!(bochner_check(&ScalarField::zeros(g)).is_err());
    }

    #[test]
    fn qv_quartic_passes_quadratic_fails() {
        let r = radii();
        let quartic: Vec<f64> = r.iter().map(|r| r.powi(4)).collect();
        let q = qv_check(&r, &quartic).unwrap();
        assert!(q.pass);
        assert!(q.epsilon >= 1.0);
        assert!((q.e1 - 1.0).abs() < 1e-9 && q.e2.abs() < 1e-9);

        let quad: Vec<f64> = r.iter().map(|r| r * r).collect();
        assert!(!qv_check(&r, &quad).unwrap().pass);
    }

    #[test]
    fn qv_bound_holds_at_every_sample() {
        let r = radii();
        let v: Vec<f64> = r.iter().map(|r| r * r * (1.0 + (1.0 + r * r).ln())).collect();
        let q = qv_check(&r, &v).unwrap();
        assert!(q.pass, "{q:?}");
        for (ri, vi) in r.iter().zip(&v) {
            assert!(*vi >= q.e1 * ri.powf(2.0 + q.epsilon) - q.e2 - 1e-12);
        }
    }

    #[test]
    fn qv_rejects_non_increasing_profiles() {
        let r = radii();
        let v: Vec<f64> = r.iter().map(|r| (r - 3.0).powi(2)).collect();
        assert!(matches!(qv_check(&r, &v), Err(Error::InvalidProfile(_))));
    }
}
