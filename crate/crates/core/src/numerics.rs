//! Small numerical kernels: tridiagonal solves, monotone interpolation,
//! linear interpolation and finite differences.

use num_complex::Complex64;

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[i]` couples row `i` to `i-1` (`lower[0]` unused), `upper[i]`
/// couples row `i` to `i+1` (last entry unused). `rhs` is overwritten with
/// the solution. Returns false on a zero pivot.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return false;
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return false;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    true
}

/// LU factors of a constant-coefficient symmetric tridiagonal matrix
/// `tridiag(off, diag, off)` with complex entries, reusable across solves.
#[derive(Debug, Clone)]
pub struct ToeplitzTridiag {
    off: Complex64,
    inv_beta: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl ToeplitzTridiag {
    pub fn new(n: usize, diag: Complex64, off: Complex64) -> Self {
        let mut inv_beta = vec![Complex64::new(0.0, 0.0); n];
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut beta = diag;
        inv_beta[0] = 1.0 / beta;
        for i in 1..n {
            c[i - 1] = off * inv_beta[i - 1];
            beta = diag - off * c[i - 1];
            inv_beta[i] = 1.0 / beta;
        }
        ToeplitzTridiag { off, inv_beta, c }
    }

    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_beta[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_beta[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c[i] * next;
        }
    }
}

/// Linear interpolation on a strictly increasing grid, clamped at the ends.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    let w = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + w * (ys[j + 1] - ys[j])
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two points.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        if n == 2 {
            ds[0] = delta[0];
            ds[1] = delta[0];
            return Pchip { xs, ys, ds };
        }
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        ds[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        ds[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Pchip { xs, ys, ds }
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let j = self.locate(x);
        let h = self.xs[j + 1] - self.xs[j];
        let t = (x - self.xs[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[j] + h10 * h * self.ds[j] + h01 * self.ys[j + 1] + h11 * h * self.ds[j + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let j = self.locate(x);
        let h = self.xs[j + 1] - self.xs[j];
        let t = (x - self.xs[j]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[j] + d10 * self.ds[j] + d01 * self.ys[j + 1] + d11 * self.ds[j + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Fourth-order centered first derivative of uniformly sampled data, with
/// one-sided fourth-order stencils at the two nodes nearest each end.
pub fn derivative_uniform(ys: &[f64], h: f64) -> Vec<f64> {
    let n = ys.len();
    assert!(n >= 5, "need at least five samples");
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (ys[i - 2] - 8.0 * ys[i - 1] + 8.0 * ys[i + 1] - ys[i + 2]) / (12.0 * h);
    }
    let fwd = |y: &[f64]| (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
    let fwd1 = |y: &[f64]| (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h);
    d[0] = fwd(&ys[0..5]);
    d[1] = fwd1(&ys[0..5]);
    let rev: Vec<f64> = ys[n - 5..].iter().rev().copied().collect();
    d[n - 1] = -fwd(&rev);
    d[n - 2] = -fwd1(&rev);
    d
}

/// Trapezoid rule on an arbitrary grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Uniform grid of `n` points covering `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solution() {
        // [[4,1,0],[1,4,1],[0,1,4]] x = [5,6,5] has x = [1,1,1]
        let mut rhs = vec![5.0, 6.0, 5.0];
        assert!(thomas(&[0.0, 1.0, 1.0], &[4.0; 3], &[1.0, 1.0, 0.0], &mut rhs));
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn toeplitz_solve_round_trips() {
        let n = 50;
        let d = Complex64::new(2.5, 0.3);
        let o = Complex64::new(-1.0, 0.1);
        let f = ToeplitzTridiag::new(n, d, o);
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut v = d * x[i];
                if i > 0 {
                    v += o * x[i - 1];
                }
                if i + 1 < n {
                    v += o * x[i + 1];
                }
                v
            })
            .collect();
        f.solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn pchip_reproduces_linear_data_and_stays_monotone() {
        let xs = linspace(0.0, 1.0, 7);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let p = Pchip::new(xs, ys);
        assert!((p.eval(0.37) - 2.11).abs() < 1e-13);
        assert!((p.derivative(0.37) - 3.0).abs() < 1e-12);

        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.0, 1.0, 1.0, 5.0];
        let p = Pchip::new(xs, ys);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn fourth_order_derivative_of_sine() {
        let h = 0.01;
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * h).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let d = derivative_uniform(&ys, h);
        for (x, v) in xs.iter().zip(d) {
            assert!((v - x.cos()).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn linear_interpolation_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 2.0, 4.0];
        assert_eq!(interp_linear(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp_linear(&xs, &ys, 2.0), 3.0);
        assert_eq!(interp_linear(&xs, &ys, 9.0), 4.0);
    }
}
