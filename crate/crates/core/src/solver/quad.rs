//! Dense convex quadratics `q(z) = 1/2 z'Hz + g'z + c` over a real vector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Quad {
    /// `None` for affine functions.
    pub hess: Option<DMatrix<f64>>,
    pub lin: DVector<f64>,
    pub c: f64,
}

impl Quad {
    pub fn zero(n: usize) -> Self {
        Self {
            hess: None,
            lin: DVector::zeros(n),
            c: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    fn hess_mut(&mut self) -> &mut DMatrix<f64> {
        let n = self.dim();
        self.hess.get_or_insert_with(|| DMatrix::zeros(n, n))
    }

    /// Add `coef * |a|^2` where `Re a = re'z` and `Im a = im'z`.
    pub fn add_abs2(&mut self, coef: f64, re: &DVector<f64>, im: &DVector<f64>) {
        let h = self.hess_mut();
        h.ger(2.0 * coef, re, re, 1.0);
        h.ger(2.0 * coef, im, im, 1.0);
    }

    /// Add `coef * Re(w a)`.
    pub fn add_re(&mut self, coef: f64, w: Complex64, re: &DVector<f64>, im: &DVector<f64>) {
        self.lin.axpy(coef * w.re, re, 1.0);
        self.lin.axpy(-coef * w.im, im, 1.0);
    }

    /// Add `coef * |z_i|^2` over the index range.
    pub fn add_diag(&mut self, coef: f64, range: std::ops::Range<usize>) {
        let h = self.hess_mut();
        for i in range {
            h[(i, i)] += 2.0 * coef;
        }
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let mut v = self.lin.dot(z) + self.c;
        if let Some(h) = &self.hess {
            v += 0.5 * (h * z).dot(z);
        }
        v
    }

    pub fn grad(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.hess {
            Some(h) => h * z + &self.lin,
            None => self.lin.clone(),
        }
    }

    /// `d' H d`, zero for affine functions.
    pub fn curvature(&self, d: &DVector<f64>) -> f64 {
        self.hess.as_ref().map_or(0.0, |h| (h * d).dot(d))
    }

    /// Embed into a space with one extra trailing coordinate whose
    /// coefficient is `extra`.
    pub fn extend(&self, extra: f64) -> Self {
        let n = self.dim();
        let mut lin = DVector::zeros(n + 1);
        lin.rows_mut(0, n).copy_from(&self.lin);
        lin[n] = extra;
        let hess = self.hess.as_ref().map(|h| {
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n)).copy_from(h);
            m
        });
        Self { hess, lin, c: self.c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn abs2_and_re_terms_match_complex_evaluation() {
        // a = (1 - 2i) * (z0 + i z1)
        let h = Complex64::new(1.0, 2.0);
        let re = DVector::from_vec(vec![h.re, h.im]);
        let im = DVector::from_vec(vec![-h.im, h.re]);
        let mut q = Quad::zero(2);
        q.add_abs2(0.7, &re, &im);
        let w = Complex64::new(0.3, -0.4);
        q.add_re(-2.0, w, &re, &im);
        q.c = 1.5;
        let z = DVector::from_vec(vec![0.9, -1.1]);
        let a = h.conj() * Complex64::new(z[0], z[1]);
        let expected = 0.7 * a.norm_sqr() - 2.0 * (w * a).re + 1.5;
        assert_relative_eq!(q.value(&z), expected, epsilon = 1e-14);
        // gradient by central differences
        let g = q.grad(&z);
        for i in 0..2 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += 1e-6;
            zm[i] -= 1e-6;
            let fd = (q.value(&zp) - q.value(&zm)) / 2e-6;
            assert_relative_eq!(g[i], fd, epsilon = 1e-7);
        }
    }
}
