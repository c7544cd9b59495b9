//! Analytic potential and kernel families, sampled onto grids on demand.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{io::read_table, ScalarField, UniformGrid};
use crate::real::Real;

/// Even trapping polynomial `c0 + c2 x² + c4 x⁴` (summed over axes in d > 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapPolynomial {
    pub c0: f64,
    pub c2: f64,
    pub c4: f64,
}

impl TrapPolynomial {
    pub const HARMONIC: Self = Self {
        c0: 0.0,
        c2: 1.0,
        c4: 0.0,
    };

    pub fn new(c0: f64, c2: f64, c4: f64) -> Result<Self> {
        if !(c0.is_finite() && c2.is_finite() && c4.is_finite()) {
            return Err(Error::InvalidParameter("polynomial coefficients must be finite".into()));
        }
        if c4 < 0.0 || (c4 == 0.0 && c2 < 0.0) {
            return Err(Error::InvalidParameter(
                "trapping polynomial must be bounded below (c4 >= 0, and c2 >= 0 when c4 = 0)".into(),
            ));
        }
        Ok(Self { c0, c2, c4 })
    }

    pub fn radial(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.c0 + self.c2 * r2 + self.c4 * r2 * r2
    }

    /// Samples `Σ_axes (c2 x² + c4 x⁴) + c0`.
    pub fn sample<T: Real>(&self, grid: &UniformGrid<T>) -> ScalarField<T> {
        ScalarField::from_fn(grid.clone(), |x| {
            let v = x.iter().fold(self.c0, |acc, &xi| {
                acc + self.radial(xi.to_f64_lossy()) - self.c0
            });
            T::lit(v)
        })
    }

    /// Curvature `V0''(0)` used to seed Gaussian initial guesses.
    pub fn curvature(&self) -> f64 {
        2.0 * self.c2
    }
}

impl fmt::Display for TrapPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "poly [{}, {}, {}]", self.c0, self.c2, self.c4)
    }
}

/// Bounded even one-dimensional profile used for `v0` and `v1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Zero,
    /// Normalized Gaussian density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// `cos(k x)`.
    Cosine { k: f64 },
    /// Smooth unit-mass bump supported on `[-width, width]`.
    Bump { width: f64 },
    /// Linear interpolation of `(x, value)` rows, zero outside the table.
    Table(Vec<(f64, f64)>),
}

fn bump_shape(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// `∫_{-1}^{1} exp(-1/(1-t²)) dt`, by composite Simpson on a fine mesh.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let sum: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * bump_shape(-1.0 + i as f64 * h)
            })
            .sum();
        sum * h / 3.0
    })
}

impl Kernel {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Gaussian { sigma } => {
                (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Kernel::Cosine { k } => (k * x).cos(),
            Kernel::Bump { width } => bump_shape(x / width) / (width * bump_mass()),
            Kernel::Table(rows) => {
                let (first, last) = (rows[0], rows[rows.len() - 1]);
                if x < first.0 || x > last.0 {
                    return 0.0;
                }
                let i = rows.partition_point(|r| r.0 <= x).clamp(1, rows.len() - 1);
                let (a, b) = (rows[i - 1], rows[i]);
                let t = (x - a.0) / (b.0 - a.0);
                a.1 + t * (b.1 - a.1)
            }
        }
    }

    /// `N^β v(N^β x)`: same mass, support shrunk by `N^β`.
    pub fn scaled(&self, beta: f64, n: usize) -> Result<Self> {
        let s = (n as f64).powf(beta);
        Ok(match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Gaussian { sigma } => Kernel::Gaussian { sigma: sigma / s },
            Kernel::Bump { width } => Kernel::Bump { width: width / s },
            Kernel::Table(rows) => Kernel::Table(rows.iter().map(|&(x, v)| (x / s, s * v)).collect()),
            Kernel::Cosine { .. } => {
                return Err(Error::InvalidParameter(
                    "cosine kernels have no finite mass to rescale".into(),
                ))
            }
        })
    }

    /// Radius outside which the profile vanishes, if compactly supported.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Kernel::Zero => Some(0.0),
            Kernel::Bump { width } => Some(*width),
            Kernel::Table(rows) => Some(rows[0].0.abs().max(rows[rows.len() - 1].0.abs())),
            Kernel::Gaussian { .. } | Kernel::Cosine { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }

    /// Samples the profile on a one-dimensional grid.
    pub fn sample<T: Real>(&self, grid: &UniformGrid<T>) -> Result<ScalarField<T>> {
        if grid.dims() != 1 {
            return Err(Error::UnsupportedDimension(
                "kernel profiles are sampled on 1D grids".into(),
            ));
        }
        Ok(ScalarField::from_fn(grid.clone(), |x| {
            T::lit(self.eval(x[0].to_f64_lossy()))
        }))
    }

    /// Parses `zero`, `gaussian(sigma)`, `cosine(k)`, `bump(width)` or
    /// `table(path)`; table paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let text = text.trim();
        if matches!(text, "zero" | "none" | "0") {
            return Ok(Kernel::Zero);
        }
        let bad = || {
            Error::InvalidParameter(format!(
                "unrecognized kernel `{text}`; expected zero, gaussian(sigma), cosine(k), bump(width) or table(path)"
            ))
        };
        let open = text.find('(').ok_or_else(bad)?;
        if !text.ends_with(')') {
            return Err(bad());
        }
        let name = text[..open].trim();
        let arg = text[open + 1..text.len() - 1].trim();
        if name == "table" {
            let path = base_dir.join(arg.trim_matches('"'));
            return Ok(Kernel::Table(read_table(&path)?));
        }
        let value: f64 = arg.parse().map_err(|_| bad())?;
        let positive = |what: &str| -> Result<f64> {
            if value > 0.0 && value.is_finite() {
                Ok(value)
            } else {
                Err(Error::InvalidParameter(format!("{name}: {what} must be positive, got {value}")))
            }
        };
        match name {
            "gaussian" => Ok(Kernel::Gaussian { sigma: positive("sigma")? }),
            "cosine" => Ok(Kernel::Cosine { k: positive("k")? }),
            "bump" => Ok(Kernel::Bump { width: positive("width")? }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Zero => write!(f, "zero"),
            Kernel::Gaussian { sigma } => write!(f, "gaussian({sigma})"),
            Kernel::Cosine { k } => write!(f, "cosine({k})"),
            Kernel::Bump { width } => write!(f, "bump({width})"),
            Kernel::Table(rows) => write!(f, "table[{} rows]", rows.len()),
        }
    }
}

/// Cubic (Catmull–Rom) interpolation of a 1D field, zero outside its box.
fn cubic_at<T: Real>(field: &ScalarField<T>, x: T) -> T {
    let grid = field.grid();
    let v = field.values();
    let n = grid.points(0);
    let t = (x - grid.lower(0)) / grid.spacing(0);
    if t < T::zero() || t > T::from_usize_lossy(n - 1) {
        return T::zero();
    }
    let i = t.floor().to_usize().unwrap_or(0).min(n - 2);
    let s = t - T::from_usize_lossy(i);
    let at = |k: isize| -> T {
        if k < 0 || k as usize >= n {
            T::zero()
        } else {
            v[k as usize]
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let half = T::lit(0.5);
    let a = -half * p0 + T::lit(1.5) * p1 - T::lit(1.5) * p2 + half * p3;
    let b = p0 - T::lit(2.5) * p1 + T::lit(2.0) * p2 - half * p3;
    let c = -half * p0 + half * p2;
    ((a * s + b) * s + c) * s + p1
}

/// Resamples `v_N(x) = N^β v(N^β x)` on the grid of `kernel` by cubic
/// interpolation and checks that the trapezoid mass is unchanged to 1e-6.
pub fn scaled_kernel<T: Real>(kernel: &ScalarField<T>, beta: T, n: usize) -> Result<ScalarField<T>> {
    if kernel.grid().dims() != 1 {
        return Err(Error::UnsupportedDimension("scaled kernels are 1D".into()));
    }
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("particle count must be positive".into()));
    }
    if n == 1 {
        return Ok(kernel.clone());
    }
    let grid = kernel.grid();
    let edge = kernel.values()[0].abs().max(kernel.values()[grid.points(0) - 1].abs());
    if edge > T::tol(1e-12) * kernel.max_abs() {
        return Err(Error::InvalidParameter(
            "kernel support reaches the grid boundary".into(),
        ));
    }
    let s = T::from_usize_lossy(n).powf(beta);
    let out = ScalarField::from_fn(grid.clone(), |x| s * cubic_at(kernel, s * x[0]));
    let before = crate::grid::integrate(kernel, None)?;
    let after = crate::grid::integrate(&out, None)?;
    if (after - before).abs() > T::lit(1e-6) * before.abs().max(T::one()) {
        return Err(Error::Resolution {
            message: format!(
                "scaled kernel mass {after} differs from {before}; kernel under-resolved after scaling"
            ),
            suggested: 2 * grid.points(0) - 1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_has_unit_mass() {
        let g = UniformGrid::<f64>::symmetric_line(3.0, 6001).unwrap();
        let k = Kernel::Bump { width: 1.5 }.sample(&g).unwrap();
        let mass = crate::grid::integrate(&k, None).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        assert!((bump_mass() - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn parses_named_kernels() {
        let here = Path::new(".");
        assert_eq!(Kernel::parse("gaussian(0.5)", here).unwrap(), Kernel::Gaussian { sigma: 0.5 });
        assert_eq!(Kernel::parse(" bump(2) ", here).unwrap(), Kernel::Bump { width: 2.0 });
        assert_eq!(Kernel::parse("zero", here).unwrap(), Kernel::Zero);
        assert!(Kernel::parse("gaussian(-1)", here).is_err());
        assert!(Kernel::parse("lorentz(1)", here).is_err());
    }

    #[test]
    fn table_kernel_interpolates_linearly() {
        let k = Kernel::Table(vec![(-1.0, 0.0), (0.0, 2.0), (1.0, 0.0)]);
        assert_eq!(k.eval(0.25), 1.5);
        assert_eq!(k.eval(-2.0), 0.0);
        assert_eq!(k.eval(0.0), 2.0);
    }

    #[test]
    fn scaled_kernel_preserves_mass_and_peak() {
        let g = UniformGrid::<f64>::symmetric_line(8.0, 513).unwrap().difference_grid().unwrap();
        let v = Kernel::Bump { width: 2.0 }.sample(&g).unwrap();
        assert_eq!(scaled_kernel(&v, 0.5, 1).unwrap(), v);
        let vn = scaled_kernel(&v, 0.5, 4).unwrap();
        let center = (g.points(0) - 1) / 2;
        assert!((vn.values()[center] - 2.0 * v.values()[center]).abs() < 1e-8);
        let m0 = crate::grid::integrate(&v, None).unwrap();
        let m1 = crate::grid::integrate(&vn, None).unwrap();
        assert!((m0 - m1).abs() < 1e-6, "{m0} {m1}");
        assert!(scaled_kernel(&v, 0.0, 4).is_err());
    }

    #[test]
    fn analytic_scaling_matches_definition() {
        let k = Kernel::Bump { width: 1.0 };
        let s = k.scaled(0.5, 4).unwrap();
        for x in [0.0, 0.1, 0.3, 0.49] {
            assert!((s.eval(x) - 2.0 * k.eval(2.0 * x)).abs() < 1e-12);
        }
    }
}
