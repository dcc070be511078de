//! Sinusoidal MLP (SIREN): initialization, forward pass and analytic
//! reverse-mode gradients of the mean squared reconstruction loss.
//!
//! Every hidden layer computes `sin(ω0 · (W x + b))`; the output layer is
//! affine. Parameters live in one flat vector whose ordering (layers in
//! order, each layer's weights row-major followed by its biases) is the
//! alignment used by gates, masks and the on-disk payload.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{linalg::general_mat_mul, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::PixelDataset;
use crate::real::Real;

pub const DEFAULT_OMEGA0: f32 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirenConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub omega0: f32,
}

impl SirenConfig {
    /// A `2 - layers×[width] - 3` image network with `ω0 = 30`.
    pub fn image(hidden_layers: usize, hidden_width: usize) -> Self {
        Self {
            input_dim: 2,
            output_dim: 3,
            hidden_layers,
            hidden_width,
            omega0: DEFAULT_OMEGA0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "input and output dimensions must be positive".into(),
            ));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidConfig(format!(
                "need at least one hidden layer of positive width, got {self}"
            )));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        Ok(())
    }

    /// Shapes `(out, in)` of the affine maps, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        shapes.push((self.hidden_width, self.input_dim));
        for _ in 1..self.hidden_layers {
            shapes.push((self.hidden_width, self.hidden_width));
        }
        shapes.push((self.output_dim, self.hidden_width));
        shapes
    }

    pub fn layers(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.layer_shapes()
            .into_iter()
            .map(|(rows, cols)| {
                let layout = LayerLayout {
                    rows,
                    cols,
                    weight_offset: offset,
                };
                offset += rows * cols + rows;
                layout
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(rows, cols)| rows * cols + rows)
            .sum()
    }
}

impl fmt::Display for SirenConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}x[{}]-{}",
            self.input_dim, self.hidden_layers, self.hidden_width, self.output_dim
        )
    }
}

/// Parses the `LxW` shorthand (hidden layers × width) into an image network.
impl FromStr for SirenConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("architecture {s:?} is not of the form LxW"));
        let (layers, width) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let layers = layers.trim().parse().map_err(|_| bad())?;
        let width = width.trim().parse().map_err(|_| bad())?;
        let config = Self::image(layers, width);
        config.validate()?;
        Ok(config)
    }
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub rows: usize,
    pub cols: usize,
    pub weight_offset: usize,
}

impl LayerLayout {
    pub fn weights(&self) -> Range<usize> {
        self.weight_offset..self.bias_offset()
    }

    pub fn bias_offset(&self) -> usize {
        self.weight_offset + self.rows * self.cols
    }

    pub fn biases(&self) -> Range<usize> {
        self.bias_offset()..self.bias_offset() + self.rows
    }

    pub fn all(&self) -> Range<usize> {
        self.weight_offset..self.bias_offset() + self.rows
    }
}

/// Network parameters (or a gradient with the same layout).
#[derive(Debug, Clone, PartialEq)]
pub struct SirenParams<T> {
    pub config: SirenConfig,
    pub flat: Vec<T>,
}

impl<T: Real> SirenParams<T> {
    pub fn zeros(config: SirenConfig) -> Self {
        Self {
            config,
            flat: vec![T::zero(); config.param_count()],
        }
    }

    pub fn from_flat(config: SirenConfig, flat: Vec<T>) -> Result<Self> {
        config.validate()?;
        if flat.len() != config.param_count() {
            return Err(Error::LengthMismatch {
                expected: config.param_count(),
                actual: flat.len(),
            });
        }
        Ok(Self { config, flat })
    }

    pub fn weights(&self, layer: &LayerLayout) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((layer.rows, layer.cols), &self.flat[layer.weights()])
            .expect("layout matches config")
    }

    pub fn biases(&self, layer: &LayerLayout) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.flat[layer.biases()])
    }

    pub fn cast<U: Real>(&self) -> SirenParams<U> {
        SirenParams {
            config: self.config,
            flat: self.flat.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        if self.flat.len() != self.config.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a {} network that needs {}",
                self.flat.len(),
                self.config,
                self.config.param_count()
            )));
        }
        Ok(())
    }
}

/// Samples SIREN initial parameters with ChaCha8 seeded from `seed`.
///
/// The first layer draws from `U(-s/fan_in, s/fan_in)`, later layers from
/// `U(-s·√(6/fan_in)/ω0, s·√(6/fan_in)/ω0)` with `s = magnitude_scale`.
pub fn init_siren(
    config: SirenConfig,
    seed: u64,
    magnitude_scale: f32,
) -> Result<SirenParams<f32>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(config.param_count());
    for (k, layer) in config.layers().iter().enumerate() {
        let bound = init_bound(&config, k, magnitude_scale) as f32;
        for _ in layer.all() {
            flat.push(rng.random_range(-bound..=bound));
        }
    }
    Ok(SirenParams { config, flat })
}

/// Half-width of the uniform initialization interval of `layer`.
pub fn init_bound(config: &SirenConfig, layer: usize, magnitude_scale: f32) -> f64 {
    let fan_in = config.layer_shapes()[layer].1 as f64;
    let scale = f64::from(magnitude_scale);
    if layer == 0 {
        scale / fan_in
    } else {
        scale * (6.0 / fan_in).sqrt() / f64::from(config.omega0)
    }
}

/// Intermediate values kept for one backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each affine layer (`coords` first, then hidden activations).
    inputs: Vec<Array2<T>>,
    /// `ω0 · cos(ω0 · z)` for each hidden layer.
    slopes: Vec<Array2<T>>,
}

impl<T: Real> ForwardCache<T> {
    /// Activations of hidden layer `k` (0-based).
    pub fn hidden_activations(&self, k: usize) -> &Array2<T> {
        &self.inputs[k + 1]
    }
}

pub fn coords_matrix<T: Real>(coords: &[[f32; 2]]) -> Array2<T> {
    Array2::from_shape_fn((coords.len(), 2), |(i, j)| T::from_f32(coords[i][j]))
}

fn run_forward<T: Real>(
    params: &SirenParams<T>,
    coords: &[[f32; 2]],
    mut cache: Option<&mut ForwardCache<T>>,
) -> Result<Array2<T>> {
    params.check()?;
    if params.config.input_dim != 2 {
        return Err(Error::ShapeMismatch(format!(
            "network expects {}-d inputs, coordinates are 2-d",
            params.config.input_dim
        )));
    }
    let omega = T::from_f32(params.config.omega0);
    let layers = params.config.layers();
    let last = layers.len() - 1;
    let mut act = coords_matrix::<T>(coords);
    for (k, layer) in layers.iter().enumerate() {
        let mut z = params
            .biases(layer)
            .broadcast((act.nrows(), layer.rows))
            .expect("bias row broadcasts over pixels")
            .to_owned();
        general_mat_mul(T::one(), &act, &params.weights(layer).t(), T::one(), &mut z);
        if k < last {
            if let Some(cache) = cache.as_deref_mut() {
                let mut slope = Array2::<T>::zeros(z.raw_dim());
                Zip::from(&mut z).and(&mut slope).for_each(|z, d| {
                    let (s, c) = (omega * *z).sin_cos();
                    *z = s;
                    *d = omega * c;
                });
                cache.slopes.push(slope);
            } else {
                z.mapv_inplace(|z| (omega * z).sin());
            }
        }
        let input = std::mem::replace(&mut act, z);
        if let Some(cache) = cache.as_deref_mut() {
            cache.inputs.push(input);
        }
    }
    Ok(act)
}

/// Evaluates the network at `coords`, keeping what the backward pass needs.
///
/// Predictions are `N × output_dim` and are not clipped.
pub fn forward<T: Real>(
    params: &SirenParams<T>,
    coords: &[[f32; 2]],
) -> Result<(Array2<T>, ForwardCache<T>)> {
    let mut cache = ForwardCache {
        inputs: Vec::new(),
        slopes: Vec::new(),
    };
    let out = run_forward(params, coords, Some(&mut cache))?;
    Ok((out, cache))
}

/// Forward pass without a cache.
pub fn predict<T: Real>(params: &SirenParams<T>, coords: &[[f32; 2]]) -> Result<Array2<T>> {
    run_forward(params, coords, None)
}

/// Converts an `N × 3` prediction matrix into RGB triples.
pub fn to_rgb(predictions: &Array2<f32>) -> Vec<[f32; 3]> {
    predictions
        .rows()
        .into_iter()
        .map(|r| [r[0], r[1], r[2]])
        .collect()
}

/// Mean squared error over pixels and channels and its gradient with respect
/// to every parameter.
pub fn loss_and_grad<T: Real>(
    params: &SirenParams<T>,
    dataset: &PixelDataset,
) -> Result<(T, SirenParams<T>)> {
    if dataset.targets.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    if params.config.output_dim != 3 {
        return Err(Error::ShapeMismatch(format!(
            "network has {} outputs, RGB targets need 3",
            params.config.output_dim
        )));
    }
    if dataset.coords.len() != dataset.targets.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.coords.len(),
            actual: dataset.targets.len(),
        });
    }
    let (mut delta, cache) = forward(params, &dataset.coords)?;
    let count = T::from_f64((delta.len()) as f64);
    let scale = T::from_f64(2.0) / count;
    let mut sse = T::zero();
    for (row, target) in delta.rows_mut().into_iter().zip(&dataset.targets) {
        for (p, &y) in row.into_iter().zip(target) {
            let r = *p - T::from_f32(y);
            sse = sse + r * r;
            *p = scale * r;
        }
    }
    let loss = sse / count;

    let mut grad = SirenParams::<T>::zeros(params.config);
    let layers = params.config.layers();
    for (k, layer) in layers.iter().enumerate().rev() {
        let input = &cache.inputs[k];
        {
            let (w_grad, b_grad) = grad.flat[layer.all()].split_at_mut(layer.rows * layer.cols);
            let mut w_grad = ArrayViewMut2::from_shape((layer.rows, layer.cols), w_grad)
                .expect("layout matches config");
            general_mat_mul(T::one(), &delta.t(), input, T::zero(), &mut w_grad);
            for (b, col) in b_grad.iter_mut().zip(delta.axis_iter(Axis(1))) {
                *b = col.sum();
            }
        }
        if k > 0 {
            let mut upstream = delta.dot(&params.weights(layer));
            upstream.zip_mut_with(&cache.slopes[k - 1], |u, &s| *u = *u * s);
            delta = upstream;
        }
    }
    Ok((loss, grad))
}
