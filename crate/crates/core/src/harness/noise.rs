use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hilbert::{norm, GridFunction};

/// Noisy data `f_δ = f + κ e` with `‖f_δ − f‖ = δ = δ_rel ‖f‖`.
#[derive(Debug, Clone)]
pub struct NoisyData {
    pub f_delta: GridFunction,
    /// Absolute noise level `δ`.
    pub delta: f64,
    /// Scaling applied to the raw draw.
    pub kappa: f64,
}

/// Draws `e` with independent standard normal entries from a ChaCha8 stream
/// seeded by `seed`, then scales it to relative size `delta_rel`.
///
/// The generator is `rand_chacha::ChaCha8Rng::seed_from_u64(seed)` sampled
/// node by node through `rand_distr::StandardNormal`, so the same seed
/// always produces the same data.
pub fn make_noisy_rhs(f: &GridFunction, delta_rel: f64, seed: u64) -> Result<NoisyData> {
    if !(delta_rel >= 0.0 && delta_rel.is_finite()) {
        return Err(Error::param(format!(
            "relative noise level must be nonnegative, got {delta_rel}"
        )));
    }
    let f_norm = norm(f);
    if f_norm == 0.0 {
        return Err(Error::param("cannot scale noise relative to f = 0"));
    }
    if delta_rel == 0.0 {
        return Ok(NoisyData {
            f_delta: f.clone(),
            delta: 0.0,
            kappa: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || GridFunction::from_fn(f.grid().clone(), |_| StandardNormal.sample(&mut rng));
    let mut e = draw();
    if norm(&e) == 0.0 {
        e = draw();
    }
    let e_norm = norm(&e);
    if e_norm == 0.0 {
        return Err(Error::NonFinite("noise draw with zero norm".into()));
    }
    let delta = delta_rel * f_norm;
    let kappa = delta / e_norm;
    Ok(NoisyData {
        f_delta: f.axpy(kappa, &e)?,
        delta,
        kappa,
    })
}
