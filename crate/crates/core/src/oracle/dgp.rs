//! The seven-dimensional synthetic population used for simulation studies.
//!
//! ```text
//! X ~ N(0, I_7)
//! xi(x)   = 2 * parity(1[x3>0], ..., 1[x7>0]) - 1
//! mu(x,a) = logistic(beta * (2*1[xi x2 > 0] - 1) * (1[xi x1 <= 0] + (2a-1) * 1[xi x1 > 0]))
//! e(x)    = logistic(-(0.25 - 1[x3>0] + 0.5 * 1[x4>0]))
//! ```
//!
//! Every quantity depends on `x` only through coordinate signs, so
//! [`orthant_law`] gives exact population values.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ahe::{Atom, AtomLaw};
use crate::data::{Arm, ObservationTable};
use crate::error::{Error, Result};
use crate::stats::sigmoid;

pub const DGP_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub beta: f64,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(beta: f64, seed: u64) -> Result<Self> {
        let spec = Self { beta, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta {} must be a finite number >= 0", self.beta)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn mu(&self, x: &[f64], a: Arm) -> f64 {
        dgp_mu(x, a, self.beta)
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        dgp_mu(x, Arm::Treated, self.beta) - dgp_mu(x, Arm::Control, self.beta)
    }
}

fn pos(v: f64) -> bool {
    v > 0.0
}

/// `+1` or `-1` by the parity of the signs of `x3..x7`.
pub fn xi(x: &[f64]) -> f64 {
    let odd = x[2..DGP_DIM].iter().filter(|&&v| pos(v)).count() % 2 == 1;
    if odd {
        1.0
    } else {
        -1.0
    }
}

pub fn dgp_mu(x: &[f64], a: Arm, beta: f64) -> f64 {
    let s = xi(x);
    let outer = if pos(s * x[1]) { 1.0 } else { -1.0 };
    let responsive = pos(s * x[0]);
    let inner = if responsive { 2.0 * a.as_f64() - 1.0 } else { 1.0 };
    sigmoid(beta * outer * inner)
}

pub fn dgp_propensity(x: &[f64]) -> f64 {
    let ind = |v: f64| if pos(v) { 1.0 } else { 0.0 };
    sigmoid(-(0.25 - ind(x[2]) + 0.5 * ind(x[3])))
}

/// Seeds a generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A 64-bit seed derived from `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

pub fn draw_covariates<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Draws `n` rows. The `e` column holds the true propensity.
pub fn sample(dgp: &DgpSpec, n: usize) -> Result<ObservationTable> {
    dgp.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dgp.seed);
    let mut x = vec![0.0; n * DGP_DIM];
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for row in x.chunks_exact_mut(DGP_DIM) {
        draw_covariates(&mut rng, row);
        let p = dgp_propensity(row);
        let arm = if rng.random::<f64>() < p { Arm::Treated } else { Arm::Control };
        let outcome = u8::from(rng.random::<f64>() < dgp.mu(row, arm));
        a.push(arm);
        y.push(outcome);
        e.push(p);
    }
    ObservationTable::new(DGP_DIM, x, a, y, Some(e))
}

/// The 128 sign orthants of `R^7`, each represented by a point in `{-1, 1}^7`
/// with mass `1/128`. Exact for any function of the coordinate signs.
pub fn orthant_law() -> AtomLaw {
    let atoms = (0..1u32 << DGP_DIM)
        .map(|bits| Atom {
            x: (0..DGP_DIM).map(|j| if bits >> j & 1 == 1 { 1.0 } else { -1.0 }).collect(),
            prob: 1.0 / 128.0,
        })
        .collect();
    AtomLaw::new(atoms).expect("orthant masses sum to one")
}
