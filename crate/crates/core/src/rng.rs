//! Counter-based random streams keyed by (master seed, experiment id, replication).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{for_each_mode, SpectralField, SpectralMeasure, C64};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit key for a (seed, experiment, cell) triple.
pub fn derive_seed(seed: u64, experiment: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(experiment)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Independent stream for one replication: the key selects the ChaCha seed,
/// the replication index selects the stream counter.
pub fn stream_rng(seed: u64, experiment: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, experiment, 0));
    rng.set_stream(replication);
    rng
}

/// Hashes an experiment label into an id for [`stream_rng`].
pub fn experiment_id(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

/// Random band-limited probability measure whose density stays at least `1 - spread`.
/// Mode amplitudes decay like `|k|^{-decay}`.
pub fn random_measure(rng: &mut impl Rng, dim: usize, cutoff: usize, spread: f64, decay: f64) -> SpectralMeasure {
    let mut f = SpectralField::zeros(dim, cutoff);
    for_each_mode(dim, cutoff, |i, k| {
        if k.iter().any(|&v| v != 0) {
            let norm: f64 = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            let amp = norm.powf(-decay);
            f.coeffs_mut()[i] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp;
        }
    });
    f.symmetrize();
    let osc = f.oscillation_bound();
    let mut f = if osc > 0.0 { f.scale(spread / osc) } else { f };
    let z = f.zero_index();
    f.coeffs_mut()[z] = C64::new(1.0, 0.0);
    SpectralMeasure::from_field(f).expect("constructed with unit mass and symmetry")
}

/// Random real trigonometric polynomial with zero mean and unit oscillation bound.
pub fn random_trig(rng: &mut impl Rng, dim: usize, cutoff: usize, decay: f64) -> SpectralField {
    let m = random_measure(rng, dim, cutoff, 1.0, decay);
    let mut f = m.into_field();
    let z = f.zero_index();
    f.coeffs_mut()[z] = C64::new(0.0, 0.0);
    f
}
