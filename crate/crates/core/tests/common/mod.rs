//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_inr::imageio::{load_image, PixelDataset};
use sparse_inr::{HardConcreteConfig, SirenConfig};

pub const ASTRONAUT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/astronaut_64.png");

/// Dual step size for 64×64 images over 5 000 steps.
pub const DESK_DUAL_LR: f64 = 3e-6;

pub fn astronaut() -> PixelDataset {
    load_image(ASTRONAUT).expect("test image loads")
}

pub fn random_dataset(height: usize, width: usize, seed: u64) -> PixelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rgb: Vec<u8> = (0..height * width * 3).map(|_| rng.random()).collect();
    PixelDataset::from_rgb8(height, width, &rgb).unwrap()
}

/// Straight-line evaluation of the network at one coordinate: nested loops
/// over the flat parameter vector, no matrices.
pub fn oracle_forward(arch: &SirenConfig, flat: &[f64], coord: [f32; 2]) -> Vec<f64> {
    let omega = f64::from(arch.omega0);
    let mut act: Vec<f64> = coord.iter().map(|&c| f64::from(c)).collect();
    let mut offset = 0;
    let layers = arch.hidden_layers + 1;
    for k in 0..layers {
        let rows = if k + 1 == layers {
            arch.output_dim
        } else {
            arch.hidden_width
        };
        let cols = act.len();
        let bias_at = offset + rows * cols;
        let mut next = vec![0.0; rows];
        for (r, out) in next.iter_mut().enumerate() {
            let mut z = flat[bias_at + r];
            for (c, &a) in act.iter().enumerate() {
                z += flat[offset + r * cols + c] * a;
            }
            *out = if k + 1 == layers {
                z
            } else {
                (omega * z).sin()
            };
        }
        offset = bias_at + rows;
        act = next;
    }
    assert_eq!(offset, flat.len());
    act
}

pub fn oracle_loss(arch: &SirenConfig, flat: &[f64], dataset: &PixelDataset) -> f64 {
    let mut sse = 0.0;
    for (coord, target) in dataset.coords.iter().zip(&dataset.targets) {
        let pred = oracle_forward(arch, flat, *coord);
        for (p, &y) in pred.iter().zip(target) {
            sse += (p - f64::from(y)).powi(2);
        }
    }
    sse / (dataset.pixel_count() * 3) as f64
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn oracle_median(hc: &HardConcreteConfig, psi: f64) -> f64 {
    (logistic(psi / hc.beta) * (hc.zeta - hc.gamma) + hc.gamma).clamp(0.0, 1.0)
}

/// The two terms of the primal Lagrangian: `loss(θ̃ ⊙ median(ψ))` and the
/// expected BPP `16 · Σ P[z ≠ 0] / pixels`.
pub fn oracle_terms(
    arch: &SirenConfig,
    hc: &HardConcreteConfig,
    magnitudes: &[f64],
    psi: &[f64],
    dataset: &PixelDataset,
) -> (f64, f64) {
    let effective: Vec<f64> = magnitudes
        .iter()
        .zip(psi)
        .map(|(&m, &p)| m * oracle_median(hc, p))
        .collect();
    let shift = hc.beta * (-hc.gamma / hc.zeta).ln();
    let expected_l0: f64 = psi.iter().map(|&p| logistic(p - shift)).sum();
    (
        oracle_loss(arch, &effective, dataset),
        16.0 * expected_l0 / dataset.pixel_count() as f64,
    )
}

/// `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + h;
    let up = f(&probe);
    probe[i] = x[i] - h;
    let down = f(&probe);
    (up - down) / (2.0 * h)
}

/// Central difference of `loss + λ · proxy`, taken term by term so the
/// large proxy value does not swamp small loss differences.
pub fn lagrangian_difference(
    terms: impl Fn(&[f64]) -> (f64, f64),
    lambda: f64,
    x: &[f64],
    i: usize,
    h: f64,
) -> f64 {
    let loss = central_difference(|p| terms(p).0, x, i, h);
    let proxy = central_difference(|p| terms(p).1, x, i, h);
    loss + lambda * proxy
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Worst finite-difference disagreement over one block of coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct FdSummary {
    pub checked: usize,
    pub skipped: usize,
    pub failures: usize,
    pub worst: f64,
}

impl FdSummary {
    fn record(&mut self, analytic: f64, numeric: f64, tolerance: f64) {
        if analytic.abs().max(numeric.abs()) <= 1e-8 {
            self.skipped += 1;
            return;
        }
        let err = relative_error(analytic, numeric);
        self.checked += 1;
        self.worst = self.worst.max(err);
        if err > tolerance {
            self.failures += 1;
        }
    }
}

pub struct GradientFixture {
    pub arch: SirenConfig,
    pub hc: HardConcreteConfig,
    pub dataset: PixelDataset,
    pub magnitudes: Vec<f64>,
    pub psi: Vec<f64>,
}

/// 2-2×[8]-3 on a random 4×4 image, gated magnitudes at the gated init
/// and ψ spread over the active, saturated and transition regions.
pub fn gradient_fixture(seed: u64) -> GradientFixture {
    let arch = SirenConfig::image(2, 8);
    let magnitudes: Vec<f64> = sparse_inr::siren::init_siren(arch, seed, 2.0)
        .unwrap()
        .flat
        .iter()
        .map(|&v| f64::from(v))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let psi = (0..magnitudes.len())
        .map(|_| rng.random_range(-4.0..4.0))
        .collect();
    GradientFixture {
        arch,
        hc: HardConcreteConfig::default(),
        dataset: random_dataset(4, 4, seed),
        magnitudes,
        psi,
    }
}

/// Compares `primal_gradient` against central differences of the oracle
/// Lagrangian. Returns the summaries for θ̃ and ψ.
pub fn check_gradients(
    fx: &GradientFixture,
    lambda: f64,
    h: f64,
    tolerance: f64,
) -> (FdSummary, FdSummary) {
    let gates = sparse_inr::GateParams {
        psi: fx.psi.clone(),
        config: fx.hc,
    };
    let analytic =
        sparse_inr::trainer::primal_gradient(fx.arch, &fx.magnitudes, &gates, lambda, &fx.dataset)
            .unwrap();

    let mut theta = FdSummary::default();
    for i in 0..fx.magnitudes.len() {
        let f = |m: &[f64]| oracle_terms(&fx.arch, &fx.hc, m, &fx.psi, &fx.dataset);
        let numeric = lagrangian_difference(f, lambda, &fx.magnitudes, i, h);
        theta.record(analytic.magnitudes[i], numeric, tolerance);
    }
    let boundaries = [fx.hc.off_threshold(), fx.hc.on_threshold()];
    let mut psi = FdSummary::default();
    for i in 0..fx.psi.len() {
        if boundaries.iter().any(|b| (fx.psi[i] - b).abs() < 1e-6) {
            psi.skipped += 1;
            continue;
        }
        let f = |p: &[f64]| oracle_terms(&fx.arch, &fx.hc, &fx.magnitudes, p, &fx.dataset);
        let numeric = lagrangian_difference(f, lambda, &fx.psi, i, h);
        psi.record(analytic.psi[i], numeric, tolerance);
    }
    (theta, psi)
}
