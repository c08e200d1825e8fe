//! Reference distributions used to fill in the features that are not
//! retained. For a retained set `S`, the coordinates in `S` are copied from
//! the explained input and the coordinates in the complement are drawn from
//! the reference.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::subset::Subset;

/// `N(mean, cov)` over all `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJoint {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianDocument {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

/// Parameters of `p(X_{S_c} | X_S = x_S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianJoint {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Config("gaussian needs at least one feature".into()));
        }
        if cov.shape() != (d, d) {
            return Err(Error::Shape {
                expected: d,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("gaussian parameters must be finite".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Config(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        if cov.clone().cholesky().is_none() {
            return Err(Error::Config("covariance is not positive definite".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GaussianDocument = serde_json::from_str(text).map_err(|e| Error::parse("<gaussian json>", e))?;
        let d = doc.mean.len();
        if doc.cov.len() != d || doc.cov.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("covariance must be {d} x {d}")));
        }
        let flat: Vec<f64> = doc.cov.into_iter().flatten().collect();
        Self::new(DVector::from_vec(doc.mean), DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn to_json(&self) -> String {
        let doc = GaussianDocument {
            mean: self.mean.iter().copied().collect(),
            cov: self.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("gaussian document serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Conditional law of the complement of `retained` given
    /// `X_retained = x_retained`.
    pub fn conditional(&self, retained: &Subset, x_retained: &[f64]) -> Result<ConditionalGaussian> {
        Error::check_dim(self.dimension(), retained.dim())?;
        Error::check_dim(retained.len(), x_retained.len())?;
        let kept = retained.indices();
        let free: Vec<usize> = retained.complement().indices().to_vec();
        let mu_free = self.mean.select_rows(&free);
        let cov_ff = self.cov.select_rows(&free).select_columns(&free);
        if kept.is_empty() {
            return Ok(ConditionalGaussian {
                mean: mu_free,
                cov: cov_ff,
            });
        }
        let cov_kk = self.cov.select_rows(kept).select_columns(kept);
        let cov_fk = self.cov.select_rows(&free).select_columns(kept);
        let chol = cholesky_with_jitter(&cov_kk, self.jitter())
            .ok_or_else(|| Error::Conditioning(format!("covariance block of {retained} is singular")))?;
        let shift = DVector::from_column_slice(x_retained) - self.mean.select_rows(kept);
        let mean = mu_free + &cov_fk * chol.solve(&shift);
        let gain = chol.solve(&cov_fk.transpose());
        let cov = cov_ff - &cov_fk * gain;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(ConditionalGaussian { mean, cov })
    }

    /// `n` joint draws, one per row.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let d = self.dimension();
        ReferenceSpec::Gaussian(self.clone()).sample_completion(&Subset::empty(d), &vec![0.0; d], n, seed)
    }

    fn jitter(&self) -> f64 {
        1e-10 * self.cov.trace() / self.dimension() as f64
    }
}

/// Convenience form of [`GaussianJoint::conditional`].
pub fn conditional_gaussian(
    joint: &GaussianJoint,
    retained: &Subset,
    x_retained: &[f64],
) -> Result<ConditionalGaussian> {
    joint.conditional(retained, x_retained)
}

fn cholesky_with_jitter(m: &DMatrix<f64>, jitter: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.clone().cholesky().or_else(|| {
        let n = m.nrows();
        (m + DMatrix::identity(n, n) * jitter).cholesky()
    })
}

/// Square-root factor `L` with `L L^T ≈ cov`, for a possibly semidefinite
/// conditional covariance.
fn sampling_factor(cov: &DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    if let Some(ch) = cholesky_with_jitter(cov, jitter) {
        return ch.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalMode {
    /// Fill the complement from one randomly chosen data row.
    #[default]
    JointRowResample,
    /// Fill every feature of the complement from an independently chosen row.
    PerFeatureMarginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReference {
    data: DMatrix<f64>,
    mode: EmpiricalMode,
}

impl EmpiricalReference {
    pub fn new(data: DMatrix<f64>, mode: EmpiricalMode) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Config("empirical reference needs at least one row".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("empirical reference has missing values".into()));
        }
        Ok(Self { data, mode })
    }

    /// Reads a CSV with one column per feature; a column named `y` is ignored.
    pub fn load_csv(path: impl AsRef<Path>, mode: EmpiricalMode) -> Result<Self> {
        let table = Table::read_csv(path)?.without_column("y");
        Self::new(table.values, mode)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mode(&self) -> EmpiricalMode {
        self.mode
    }

    pub fn dimension(&self) -> usize {
        self.data.ncols()
    }
}

/// Deterministic fill value for every removed feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantBaseline {
    pub values: Vec<f64>,
}

impl ConstantBaseline {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("baseline must be a non-empty finite vector".into()));
        }
        Ok(Self { values })
    }

    /// Column means of a data matrix (the "mean image").
    pub fn column_means(data: &DMatrix<f64>) -> Result<Self> {
        Self::new(data.column_iter().map(|c| c.mean()).collect())
    }
}

/// Which distribution completes a partially retained input.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    Gaussian(GaussianJoint),
    Empirical(EmpiricalReference),
    Constant(ConstantBaseline),
}

impl From<GaussianJoint> for ReferenceSpec {
    fn from(g: GaussianJoint) -> Self {
        ReferenceSpec::Gaussian(g)
    }
}

impl From<EmpiricalReference> for ReferenceSpec {
    fn from(e: EmpiricalReference) -> Self {
        ReferenceSpec::Empirical(e)
    }
}

impl From<ConstantBaseline> for ReferenceSpec {
    fn from(c: ConstantBaseline) -> Self {
        ReferenceSpec::Constant(c)
    }
}

impl ReferenceSpec {
    pub fn dimension(&self) -> usize {
        match self {
            ReferenceSpec::Gaussian(g) => g.dimension(),
            ReferenceSpec::Empirical(e) => e.dimension(),
            ReferenceSpec::Constant(c) => c.values.len(),
        }
    }

    /// True when the completion does not depend on the seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, ReferenceSpec::Constant(_))
    }

    /// `k` completions of `x` with the features in `retained` fixed, one per
    /// row. Bit-reproducible for a given seed.
    pub fn sample_completion(&self, retained: &Subset, x: &[f64], k: usize, seed: u64) -> Result<DMatrix<f64>> {
        let rows = self.completions(retained, x, k, seed)?;
        let d = x.len();
        Ok(DMatrix::from_fn(k, d, |i, j| rows[i * d + j]))
    }

    /// Same draws as [`ReferenceSpec::sample_completion`], as a flat
    /// row-major buffer.
    pub(crate) fn completions(&self, retained: &Subset, x: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
        let d = self.dimension();
        Error::check_dim(d, x.len())?;
        Error::check_dim(d, retained.dim())?;
        if k == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(k * d);
        for _ in 0..k {
            out.extend_from_slice(x);
        }
        let free = retained.complement();
        if free.is_empty() {
            return Ok(out);
        }
        let free = free.indices();
        match self {
            ReferenceSpec::Constant(c) => {
                for row in out.chunks_mut(d) {
                    for &j in free {
                        row[j] = c.values[j];
                    }
                }
            }
            ReferenceSpec::Empirical(e) => {
                let mut rng = rng_from_seed(seed);
                let n = e.data.nrows();
                for row in out.chunks_mut(d) {
                    match e.mode {
                        EmpiricalMode::JointRowResample => {
                            let r = rng.random_range(0..n);
                            for &j in free {
                                row[j] = e.data[(r, j)];
                            }
                        }
                        EmpiricalMode::PerFeatureMarginal => {
                            for &j in free {
                                row[j] = e.data[(rng.random_range(0..n), j)];
                            }
                        }
                    }
                }
            }
            ReferenceSpec::Gaussian(g) => {
                let kept: Vec<f64> = retained.indices().iter().map(|&i| x[i]).collect();
                let cond = g.conditional(retained, &kept)?;
                let factor = sampling_factor(&cond.cov, g.jitter());
                let mut rng = rng_from_seed(seed);
                let m = free.len();
                let mut z = DVector::zeros(m);
                for row in out.chunks_mut(d) {
                    for v in z.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let draw = &cond.mean + &factor * &z;
                    for (slot, &j) in free.iter().enumerate() {
                        row[j] = draw[slot];
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bivariate() -> GaussianJoint {
        GaussianJoint::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn independent_conditioning_is_marginal() {
        let g = GaussianJoint::new(DVector::from_vec(vec![1.0, 2.0, 3.0]), DMatrix::identity(3, 3)).unwrap();
        let s = Subset::new(3, vec![1]).unwrap();
        let c = g.conditional(&s, &[10.0]).unwrap();
        assert_eq!(c.mean.as_slice(), &[1.0, 3.0]);
        assert_eq!(c.cov, DMatrix::identity(2, 2));
    }

    #[test]
    fn empty_conditioning_returns_joint() {
        let g = bivariate();
        let c = g.conditional(&Subset::empty(2), &[]).unwrap();
        assert_eq!(&c.mean, g.mean());
        assert_eq!(&c.cov, g.cov());
    }

    #[test]
    fn bivariate_conditioning_by_hand() {
        // mean = 0.5 * 2, var = 1 - 0.5^2
        let c = bivariate()
            .conditional(&Subset::new(2, vec![0]).unwrap(), &[2.0])
            .unwrap();
        assert!((c.mean[0] - 1.0).abs() < 1e-15);
        assert!((c.cov[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn non_symmetric_or_indefinite_rejected() {
        let m = DVector::zeros(2);
        assert!(GaussianJoint::new(m.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0])).is_err());
        assert!(GaussianJoint::new(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn full_subset_copies_input() {
        let x = [0.3, -1.2];
        let rows = ReferenceSpec::from(bivariate())
            .sample_completion(&Subset::full(2), &x, 5, 1)
            .unwrap();
        for r in rows.row_iter() {
            assert_eq!(r.iter().copied().collect::<Vec<_>>(), x);
        }
    }

    #[test]
    fn constant_baseline_empty_subset_is_baseline() {
        let b = ConstantBaseline::new(vec![4.0, 5.0, 6.0]).unwrap();
        let rows = ReferenceSpec::from(b)
            .sample_completion(&Subset::empty(3), &[0.0; 3], 4, 0)
            .unwrap();
        for r in rows.row_iter() {
            assert_eq!(r.iter().copied().collect::<Vec<_>>(), vec![4.0, 5.0, 6.0]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let r = ReferenceSpec::from(bivariate());
        let s = Subset::new(2, vec![1]).unwrap();
        let a = r.sample_completion(&s, &[0.0, 1.0], 20, 99).unwrap();
        let b = r.sample_completion(&s, &[0.0, 1.0], 20, 99).unwrap();
        let c = r.sample_completion(&s, &[0.0, 1.0], 20, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.column(1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn law_of_large_numbers_on_identity() {
        let mu = vec![1.0, -2.0, 0.5];
        let g = GaussianJoint::new(DVector::from_vec(mu.clone()), DMatrix::identity(3, 3)).unwrap();
        let k = 100_000;
        let rows = ReferenceSpec::from(g)
            .sample_completion(&Subset::empty(3), &[0.0; 3], k, 5)
            .unwrap();
        for (j, target) in mu.iter().enumerate() {
            assert!((rows.column(j).mean() - target).abs() < 4.0 / (k as f64).sqrt());
        }
    }

    #[test]
    fn empirical_modes() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
        let joint =
            ReferenceSpec::from(EmpiricalReference::new(data.clone(), EmpiricalMode::JointRowResample).unwrap());
        let rows = joint.sample_completion(&Subset::empty(2), &[0.0, 0.0], 200, 3).unwrap();
        assert!(rows.row_iter().all(|r| r[1] == 10.0 * r[0]));

        let marg = ReferenceSpec::from(EmpiricalReference::new(data, EmpiricalMode::PerFeatureMarginal).unwrap());
        let rows = marg.sample_completion(&Subset::empty(2), &[0.0, 0.0], 200, 3).unwrap();
        assert!(rows.row_iter().any(|r| r[1] != 10.0 * r[0]));
    }
}
