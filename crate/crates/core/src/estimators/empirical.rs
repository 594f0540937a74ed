use crate::sampling::SampleBatch;

/// Naive plug-in estimator `V_n(x) = n^{-1} Σ_{Z_i > x} (Z_i - x)^{-1/2}`.
pub fn naive_v(batch: &SampleBatch, x: f64) -> f64 {
    let n = batch.n();
    if n == 0 {
        return 0.0;
    }
    let start = batch.z.partition_point(|z| *z <= x);
    batch.z[start..].iter().map(|z| 1.0 / (z - x).sqrt()).sum::<f64>() / n as f64
}

/// `U_n(x) = (2/n) Σ [sqrt(Z_i) - sqrt((Z_i - x)_+)]`, the primitive of `V_n`.
pub fn u_n(batch: &SampleBatch, x: f64) -> f64 {
    EmpiricalU::new(&batch.z).eval(x)
}

/// `U_n` with precomputed square roots for repeated evaluation.
#[derive(Debug, Clone)]
pub struct EmpiricalU {
    z: Vec<f64>,
    sqrt_z: Vec<f64>,
    /// `prefix[i] = Σ_{j < i} sqrt(z_j)`
    prefix: Vec<f64>,
    scale: f64,
}

impl EmpiricalU {
    /// `z` must be sorted ascending.
    pub fn new(z: &[f64]) -> Self {
        debug_assert!(z.windows(2).all(|w| w[0] <= w[1]));
        let sqrt_z: Vec<f64> = z.iter().map(|v| v.sqrt()).collect();
        let mut prefix = Vec::with_capacity(z.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for s in &sqrt_z {
            acc += s;
            prefix.push(acc);
        }
        let scale = if z.is_empty() { 0.0 } else { 2.0 / z.len() as f64 };
        EmpiricalU { z: z.to_vec(), sqrt_z, prefix, scale }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn observations(&self) -> &[f64] {
        &self.z
    }

    /// `U_n` beyond the largest observation.
    pub fn total(&self) -> f64 {
        self.scale * self.prefix[self.z.len()]
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 || self.z.is_empty() {
            return 0.0;
        }
        let i = self.z.partition_point(|z| *z <= x);
        self.scale * (self.prefix[i] + tail_increment(&self.z[i..], &self.sqrt_z[i..], x))
    }

    /// `U_n` at every observation, in order. Quadratic in `n`.
    pub fn at_observations(&self) -> Vec<f64> {
        let n = self.z.len();
        (0..n)
            .map(|i| {
                let x = self.z[i];
                // ties: every observation equal to x contributes sqrt(z)
                let j = i + self.z[i..].partition_point(|z| *z <= x);
                self.scale * (self.prefix[j] + tail_increment(&self.z[j..], &self.sqrt_z[j..], x))
            })
            .collect()
    }
}

/// `Σ [sqrt(z) - sqrt(z - x)]` over `z > x`, in the cancellation-free form
/// `x / (sqrt(z) + sqrt(z - x))`, with four independent accumulators.
fn tail_increment(z: &[f64], sqrt_z: &[f64], x: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let zc = z.chunks_exact(4);
    let sc = sqrt_z.chunks_exact(4);
    let (zr, sr) = (zc.remainder(), sc.remainder());
    for (zz, ss) in zc.zip(sc) {
        for k in 0..4 {
            acc[k] += 1.0 / (ss[k] + (zz[k] - x).sqrt());
        }
    }
    let mut rest = 0.0;
    for (zz, ss) in zr.iter().zip(sr) {
        rest += 1.0 / (ss + (zz - x).sqrt());
    }
    x * ((acc[0] + acc[1]) + (acc[2] + acc[3]) + rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(z: &[f64]) -> SampleBatch {
        SampleBatch::from_values(z.to_vec(), "t").unwrap()
    }

    #[test]
    fn naive_examples() {
        let b = batch(&[1.0, 4.0]);
        assert_eq!(naive_v(&b, 0.0), 0.75);
        assert_eq!(naive_v(&b, 5.0), 0.0);
        assert_eq!(naive_v(&b, 3.0), 0.5);
        assert_eq!(naive_v(&b, 4.0), 0.0);
    }

    #[test]
    fn u_examples() {
        let b = batch(&[1.0, 4.0]);
        assert_eq!(u_n(&b, 0.0), 0.0);
        assert!((u_n(&b, 1.0) - (1.0 + 2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!((u_n(&b, 4.0) - 3.0).abs() < 1e-15);
        assert!((u_n(&b, 7.5) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn observation_values_match_pointwise() {
        let z = [0.1, 0.5, 0.5, 2.0, 3.7, 3.71, 9.0];
        let u = EmpiricalU::new(&z);
        for (x, v) in z.iter().zip(u.at_observations()) {
            let direct: f64 = z.iter().map(|zi| zi.sqrt() - (zi - x).max(0.0).sqrt()).sum::<f64>() * 2.0 / z.len() as f64;
            assert!((v - direct).abs() < 1e-14);
            assert!((u.eval(*x) - direct).abs() < 1e-14);
        }
    }
}
