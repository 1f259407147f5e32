//! Seeded synthetic embedding fixtures: two Gaussian classes sharing a
//! spiked covariance, with means placed symmetrically about an offset.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::eval::EvalFixture;
use crate::tensor_io::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPairSpec {
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Distance between the class means in units of the bulk noise σ = 1.
    pub separation: f64,
    /// Leading directions whose standard deviation is `spike_scale`.
    pub spike_dims: usize,
    pub spike_scale: f64,
    /// Length of a shift applied to both classes.
    pub offset: f64,
    /// Seeds the random rotation that orients the spike subspace and
    /// the separation axis.
    pub basis_seed: u64,
}

impl Default for GaussianPairSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            n_train: 500,
            n_test: 200,
            separation: 6.0,
            spike_dims: 5,
            spike_scale: 2.0,
            offset: 0.0,
            basis_seed: 0,
        }
    }
}

/// Train and test matrices for each class.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub train_truthful: EmbeddingMatrix,
    pub train_hallucinated: EmbeddingMatrix,
    pub test_truthful: EmbeddingMatrix,
    pub test_hallucinated: EmbeddingMatrix,
}

impl SynthSplit {
    pub fn into_fixture(self) -> Result<EvalFixture> {
        EvalFixture::from_class_splits(
            self.train_truthful,
            self.train_hallucinated,
            &self.test_truthful,
            &self.test_hallucinated,
        )
    }
}

fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // sign-fix so the rotation is a deterministic function of the draw
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Truthful mean at -separation/2 and hallucinated mean at +separation/2
/// along the first spike direction; δ is symmetric about 0.
pub fn gaussian_pair(spec: &GaussianPairSpec, seed: u64) -> Result<SynthSplit> {
    if spec.dim == 0 || spec.n_train < 2 || spec.n_test == 0 {
        return Err(Error::Parameter(
            "synthetic fixture needs dim >= 1, n_train >= 2, n_test >= 1".into(),
        ));
    }
    if spec.spike_dims > spec.dim {
        return Err(Error::Parameter("spike_dims exceeds dim".into()));
    }
    let rot = random_rotation(spec.dim, spec.basis_seed);
    let axis = rot.column(0).into_owned();
    let shift_dir = rot.column(spec.dim - 1).into_owned();
    let shift = shift_dir * spec.offset;
    let mu_true = &shift - &axis * (spec.separation / 2.0);
    let mu_hal = &shift + &axis * (spec.separation / 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mu: &nalgebra::DVector<f64>, n: usize| -> Result<EmbeddingMatrix> {
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let latent = nalgebra::DVector::from_fn(spec.dim, |i, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                if i < spec.spike_dims {
                    g * spec.spike_scale
                } else {
                    g
                }
            });
            let z = mu + &rot * latent;
            rows.push(z.iter().copied().collect::<Vec<f64>>());
        }
        EmbeddingMatrix::from_f64_rows(&rows)
    };
    Ok(SynthSplit {
        train_truthful: draw(&mu_true, spec.n_train)?,
        train_hallucinated: draw(&mu_hal, spec.n_train)?,
        test_truthful: draw(&mu_true, spec.n_test)?,
        test_hallucinated: draw(&mu_hal, spec.n_test)?,
    })
}
