use num_complex::Complex64;

use super::{Grid2D, SpectralField};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default imaginary shift `δ` for the `-i/(kx + iδ)` antiderivative symbol.
pub fn default_regularization(grid: &Grid2D) -> f64 {
    1e-12 * grid.min_kx()
}

fn check_order(order: u32) -> Result<()> {
    if (1..=4).contains(&order) {
        Ok(())
    } else {
        Err(Error::param("order", format!("{order} not in 1..=4")))
    }
}

/// `(i k)^order`
#[inline]
fn ik_pow(k: f64, order: u32) -> Complex64 {
    let m = k.powi(order as i32);
    match order % 4 {
        0 => Complex64::new(m, 0.0),
        1 => Complex64::new(0.0, m),
        2 => Complex64::new(-m, 0.0),
        _ => Complex64::new(0.0, -m),
    }
}

/// `∂x^order`; the `kx` Nyquist column is zeroed for odd orders.
pub fn derivative_x(f: &SpectralField, order: u32) -> Result<SpectralField> {
    check_order(order)?;
    let g = *f.grid();
    let nyq = g.x_nyquist_column();
    let odd = order % 2 == 1;
    let symbols: Vec<Complex64> = (0..g.nkx())
        .map(|ix| {
            if odd && ix == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                ik_pow(g.kx(ix), order)
            }
        })
        .collect();
    Ok(f.map_modes(|ix, _| symbols[ix]))
}

/// `∂y^order`; the `ky` Nyquist row is zeroed for odd orders.
pub fn derivative_y(f: &SpectralField, order: u32) -> Result<SpectralField> {
    check_order(order)?;
    let g = *f.grid();
    let nyq = g.y_nyquist_row();
    let odd = order % 2 == 1;
    Ok(f.map_modes(|_, iy| {
        if odd && iy == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            ik_pow(g.ky(iy), order)
        }
    }))
}

/// `i kx · f`, i.e. `∂x` of order one.
pub fn multiply_ikx(f: &SpectralField) -> SpectralField {
    derivative_x(f, 1).expect("order 1 is valid")
}

/// Regularized antiderivative: every mode is multiplied by `-i/(kx + iδ)`.
///
/// On the `kx = 0` line the symbol is `-1/δ`, so anything but an exact zero
/// there is amplified by `1/δ`. Callers that only need the antiderivative on
/// the zero-mean subspace should call
/// [`SpectralField::project_zero_x_mean`] on the result.
pub fn antiderivative_x(f: &SpectralField, delta: f64) -> SpectralField {
    let g = *f.grid();
    let symbols: Vec<Complex64> = (0..g.nkx())
        .map(|ix| -I / Complex64::new(g.kx(ix), delta))
        .collect();
    f.map_modes(|ix, _| symbols[ix])
}

/// 2/3-rule truncation: zeroes modes with `|mx| > nx/3` or `|my| > ny/3`.
pub fn dealias_two_thirds(f: &mut SpectralField) {
    let g = *f.grid();
    let ny = g.ny();
    for (ix, col) in f.coeffs_mut().chunks_exact_mut(ny).enumerate() {
        scale_column(&g, ix, col, 1.0, true);
    }
}

/// Scales one `kx` column by `s`, applying the 2/3 rule when `dealias` is set.
pub(crate) fn scale_column(g: &Grid2D, ix: usize, col: &mut [Complex64], s: f64, dealias: bool) {
    let zero = Complex64::new(0.0, 0.0);
    if dealias && ix > g.nx() / 3 {
        col.fill(zero);
        return;
    }
    let cy = g.ny() as i64 / 3;
    for (iy, c) in col.iter_mut().enumerate() {
        *c = if dealias && g.ky_mode(iy).abs() > cy { zero } else { *c * s };
    }
}

/// Multiplies one `kx` column by `i kx`, zeroing the x-Nyquist column.
pub(crate) fn ikx_column(g: &Grid2D, ix: usize, col: &mut [Complex64]) {
    let factor = if ix == g.x_nyquist_column() {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, g.kx(ix))
    };
    for c in col.iter_mut() {
        *c *= factor;
    }
}

/// Evaluates the trigonometric interpolant of a spectrum at arbitrary points.
pub struct PointEvaluator<'a> {
    spectrum: &'a SpectralField,
}

impl<'a> PointEvaluator<'a> {
    pub fn new(spectrum: &'a SpectralField) -> Self {
        Self { spectrum }
    }

    pub fn at(&self, x: f64, y: f64) -> f64 {
        let s = self.spectrum;
        let g = *s.grid();
        let ny = g.ny();
        let py: Vec<Complex64> = (0..ny)
            .map(|iy| Complex64::from_polar(1.0, g.ky(iy) * (y - g.y0())))
            .collect();
        let mut acc = 0.0;
        for (ix, col) in s.coeffs().chunks_exact(ny).enumerate() {
            let px = Complex64::from_polar(1.0, g.kx(ix) * (x - g.x0()));
            let inner: Complex64 = col.iter().zip(&py).map(|(c, p)| c * p).sum();
            acc += s.column_weight(ix) * (inner * px).re;
        }
        acc / g.real_len() as f64
    }
}

/// Value of the field represented by `spectrum` at `(x, y)`.
pub fn evaluate_at(spectrum: &SpectralField, x: f64, y: f64) -> f64 {
    PointEvaluator::new(spectrum).at(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Fft2d, RealField};

    fn grid() -> Grid2D {
        Grid2D::new(256, 256, 5.0, 5.0).unwrap()
    }

    fn gauss(x: f64, y: f64) -> f64 {
        (-(x * x) - y * y).exp()
    }

    fn max_err(f: &RealField, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let g = *f.grid();
        let mut err: f64 = 0.0;
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                err = err.max((f.at(ix, iy) - exact(g.x(ix), g.y(iy))).abs());
            }
        }
        err
    }

    #[test]
    fn order_out_of_range() {
        let s = SpectralField::zeros(grid());
        assert!(derivative_x(&s, 0).is_err());
        assert!(derivative_y(&s, 5).is_err());
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = Grid2D::new(16, 16, 1.0, 1.0).unwrap();
        let fft = Fft2d::new(g);
        let s = fft.forward(&RealField::from_fn(g, |_, _| 3.5)).unwrap();
        for order in 1..=4 {
            assert!(derivative_x(&s, order).unwrap().max_abs() == 0.0);
            assert!(derivative_y(&s, order).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn sine_fundamental_derivatives() {
        let g = Grid2D::new(32, 64, 2.0, 3.0).unwrap();
        let fft = Fft2d::new(g);
        let sx = fft.forward(&RealField::from_fn(g, |x, _| (x / 2.0).sin())).unwrap();
        let dx = fft.inverse(&derivative_x(&sx, 1).unwrap()).unwrap();
        assert!(max_err(&dx, |x, _| 0.5 * (x / 2.0).cos()) < 1e-14);
        let sy = fft.forward(&RealField::from_fn(g, |_, y| (y / 3.0).sin())).unwrap();
        let dy = fft.inverse(&derivative_y(&sy, 1).unwrap()).unwrap();
        assert!(max_err(&dy, |_, y| (y / 3.0).cos() / 3.0) < 1e-14);
    }

    #[test]
    fn gaussian_second_x_derivative() {
        let g = grid();
        let fft = Fft2d::new(g);
        let s = fft.forward(&RealField::from_fn(g, gauss)).unwrap();
        let d = fft.inverse(&derivative_x(&s, 2).unwrap()).unwrap();
        let err = max_err(&d, |x, y| (4.0 * x * x - 2.0) * gauss(x, y));
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn gaussian_first_y_derivative() {
        let g = grid();
        let fft = Fft2d::new(g);
        let s = fft.forward(&RealField::from_fn(g, gauss)).unwrap();
        let d = fft.inverse(&derivative_y(&s, 1).unwrap()).unwrap();
        let err = max_err(&d, |x, y| -2.0 * y * gauss(x, y));
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn derivatives_commute() {
        let g = Grid2D::new(64, 32, 3.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let s = fft
            .forward(&RealField::from_fn(g, |x, y| gauss(x, y) * (1.0 + x * y.sin())))
            .unwrap();
        for (ox, oy) in [(1, 1), (2, 1), (3, 2), (1, 4)] {
            let a = derivative_y(&derivative_x(&s, ox).unwrap(), oy).unwrap();
            let b = derivative_x(&derivative_y(&s, oy).unwrap(), ox).unwrap();
            let err = a
                .coeffs()
                .iter()
                .zip(b.coeffs())
                .fold(0.0f64, |m, (p, q)| m.max((p - q).norm()));
            assert!(err <= 1e-12 * a.max_abs().max(1.0));
        }
    }

    #[test]
    fn antiderivative_inverts_derivative_on_zero_mean_subspace() {
        let g = Grid2D::new(64, 32, 3.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let mut s = fft
            .forward(&RealField::from_fn(g, |x, y| x * gauss(x, y) * (2.0 + y.cos())))
            .unwrap();
        s.project_zero_x_mean();
        // the Nyquist column is lost by an odd derivative
        let nyq = g.x_nyquist_column();
        for iy in 0..g.ny() {
            s.set(nyq, iy, Complex64::new(0.0, 0.0));
        }
        let back = derivative_x(&antiderivative_x(&s, default_regularization(&g)), 1).unwrap();
        let err = back
            .coeffs()
            .iter()
            .zip(s.coeffs())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).norm()));
        assert!(err < 1e-12 * s.max_abs(), "{err:e}");
    }

    #[test]
    fn antiderivative_of_cosine() {
        let g = Grid2D::new(32, 16, 2.0, 1.0).unwrap();
        let fft = Fft2d::new(g);
        let s = fft.forward(&RealField::from_fn(g, |x, _| (x / 2.0).cos())).unwrap();
        let mut a = antiderivative_x(&s, default_regularization(&g));
        a.project_zero_x_mean();
        let f = fft.inverse(&a).unwrap();
        // the regularization leaves a relative O(δ/kx) = 1e-12 defect
        assert!(max_err(&f, |x, _| 2.0 * (x / 2.0).sin()) < 1e-12 * 2.0 * 1.5);
    }

    #[test]
    fn antiderivative_of_gaussian_second_derivative() {
        let g = grid();
        let fft = Fft2d::new(g);
        let s = fft.forward(&RealField::from_fn(g, gauss)).unwrap();
        let dxx = derivative_x(&s, 2).unwrap();
        assert!(dxx.kx_zero_line().iter().all(|c| c.norm() == 0.0));
        let a = antiderivative_x(&dxx, default_regularization(&g));
        let f = fft.inverse(&a).unwrap();
        let err = max_err(&f, |x, y| -2.0 * x * gauss(x, y));
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn operations_preserve_y_parity() {
        let g = Grid2D::new(64, 64, 3.0, 3.0).unwrap();
        let fft = Fft2d::new(g);
        let f = RealField::from_fn(g, |x, y| (x - 0.3) * gauss(x, y) * (1.0 + y * y));
        let s = fft.forward(&f).unwrap();
        let delta = default_regularization(&g);
        let mut outs = vec![
            derivative_x(&s, 1).unwrap(),
            derivative_x(&s, 3).unwrap(),
            derivative_y(&s, 2).unwrap(),
            derivative_y(&s, 4).unwrap(),
        ];
        let mut a = antiderivative_x(&s, delta);
        a.project_zero_x_mean();
        outs.push(a);
        for o in outs {
            assert!(fft.inverse(&o).unwrap().y_parity_defect() < 1e-12);
        }
    }

    #[test]
    fn point_evaluation_reproduces_samples_and_interpolates() {
        let g = Grid2D::new(64, 128, 2.0, 3.0).unwrap();
        let fft = Fft2d::new(g);
        let f = RealField::from_fn(g, |x, y| gauss(x, 0.7 * y));
        let s = fft.forward(&f).unwrap();
        let ev = PointEvaluator::new(&s);
        assert!((ev.at(g.x(5), g.y(9)) - f.at(5, 9)).abs() < 1e-13);
        let v = ev.at(0.123, -0.456);
        assert!((v - gauss(0.123, 0.7 * -0.456)).abs() < 1e-12, "{v} {}", gauss(0.123, 0.7 * -0.456));
    }
}
