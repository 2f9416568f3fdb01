use cellfree_core::linalg::{CMatrix, CVector};

/// Entrywise mean and standard error of `x_t y_t^H` over trials.
pub struct CrossMoment {
    sum: Vec<(f64, f64)>,
    sum_sq: Vec<(f64, f64)>,
    n: usize,
    dim: usize,
}

impl CrossMoment {
    pub fn new(dim: usize) -> Self {
        CrossMoment { sum: vec![(0.0, 0.0); dim * dim], sum_sq: vec![(0.0, 0.0); dim * dim], n: 0, dim }
    }

    pub fn add(&mut self, x: &CVector, y: &CVector) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = x[i] * y[j].conj();
                let idx = i * self.dim + j;
                self.sum[idx].0 += v.re;
                self.sum[idx].1 += v.im;
                self.sum_sq[idx].0 += v.re * v.re;
                self.sum_sq[idx].1 += v.im * v.im;
            }
        }
        self.n += 1;
    }

    /// Largest deviation from `target`, in units of the standard error.
    /// Parts with zero sample variance must match `target` to rounding.
    pub fn worst_z(&self, target: &CMatrix) -> f64 {
        let n = self.n as f64;
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let idx = i * self.dim + j;
                let parts = [
                    (self.sum[idx].0, self.sum_sq[idx].0, target[(i, j)].re),
                    (self.sum[idx].1, self.sum_sq[idx].1, target[(i, j)].im),
                ];
                for (s, sq, t) in parts {
                    let mean = s / n;
                    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
                    let se = (var / n).sqrt();
                    let scale = target.norm().max(1e-300);
                    let z = if se > 1e-14 * scale { (mean - t).abs() / se } else if (mean - t).abs() <= 1e-12 * scale { 0.0 } else { f64::INFINITY };
                    worst = worst.max(z);
                }
            }
        }
        worst
    }
}
