//! Small feed-forward networks for the unmeasured sub-dynamics.
//!
//! The network maps the full state vector to the time derivative of the
//! hidden components. Besides forward evaluation it provides machine-precision
//! Jacobians with respect to the input and with respect to the flattened
//! parameter vector; both feed the per-sample recursion, which is sensitive to
//! derivative noise.
//!
//! Parameter flattening is fixed: layer by layer, weight matrix in row-major
//! order, then the bias vector. Checkpoints embed the [`MlpSpec`] so a loaded
//! weight vector is always validated against its architecture.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exponential linear unit with α = 1: `z` for `z > 0`, `exp(z) − 1` below.
    Elu,
    Tanh,
    Sigmoid,
    /// Identity; used for output heads.
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Architecture of a multilayer perceptron.
///
/// `layer_widths` includes the input dimension, e.g. `[4, 20, 20, 10, 1]`;
/// `activations` has one entry per affine layer (`layer_widths.len() − 1`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::Config(
                "network needs an input and at least one layer".into(),
            ));
        }
        if layer_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if activations.len() != layer_widths.len() - 1 {
            return Err(Error::Config(format!(
                "expected {} activations for {} layers, got {}",
                layer_widths.len() - 1,
                layer_widths.len() - 1,
                activations.len()
            )));
        }
        Ok(MlpSpec {
            layer_widths,
            activations,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Total number of parameters: Σ (wᵢ·wᵢ₋₁ + wᵢ).
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// Flattened parameter vector of a network, in the documented layer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatWeights(pub DVector<f64>);

impl FlatWeights {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Deterministic initialization: weights uniform in ±√(6/(fan_in+fan_out))
/// (Glorot), biases zero. The same `(spec, seed)` pair always produces the
/// same vector.
pub fn init_params(spec: &MlpSpec, seed: u64) -> FlatWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.layer_widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.random_range(-limit..limit));
        }
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    FlatWeights(DVector::from_vec(values))
}

fn check_weights(spec: &MlpSpec, w: &FlatWeights) -> Result<()> {
    if w.len() != spec.param_count() {
        return Err(Error::Dimension(format!(
            "weight vector has {} entries, architecture needs {}",
            w.len(),
            spec.param_count()
        )));
    }
    Ok(())
}

/// Pre-activation and activation values of every layer for one input, reused
/// by the forward pass and both Jacobians.
struct Trace {
    /// `a[0]` is the input; `a[k+1]` the activation output of layer `k`.
    activations: Vec<DVector<f64>>,
    /// Pre-activation `z_k = W_k a_k + b_k` per layer.
    pre: Vec<DVector<f64>>,
}

fn run_trace(spec: &MlpSpec, w: &FlatWeights, input: &DVector<f64>) -> Result<Trace> {
    check_weights(spec, w)?;
    if input.len() != spec.input_dim() {
        return Err(Error::Dimension(format!(
            "input has {} entries, network expects {}",
            input.len(),
            spec.input_dim()
        )));
    }
    let mut activations = vec![input.clone()];
    let mut pre = Vec::with_capacity(spec.activations.len());
    let mut offset = 0;
    for (layer, widths) in spec.layer_widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (widths[0], widths[1]);
        let prev = &activations[layer];
        let mut z = DVector::zeros(fan_out);
        for i in 0..fan_out {
            let row_start = offset + i * fan_in;
            let mut acc = w.0[offset + fan_out * fan_in + i]; // bias
            for j in 0..fan_in {
                acc += w.0[row_start + j] * prev[j];
            }
            z[i] = acc;
        }
        offset += fan_out * fan_in + fan_out;
        let act = spec.activations[layer];
        activations.push(z.map(|v| act.apply(v)));
        pre.push(z);
    }
    Ok(Trace { activations, pre })
}

/// Evaluates the network.
pub fn forward(spec: &MlpSpec, w: &FlatWeights, input: &DVector<f64>) -> Result<DVector<f64>> {
    let trace = run_trace(spec, w, input)?;
    let out = trace.activations.last().unwrap().clone();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("network output is not finite".into()));
    }
    Ok(out)
}

/// Exact Jacobian of the output with respect to the input, `out × in`.
pub fn jacobian_input(
    spec: &MlpSpec,
    w: &FlatWeights,
    input: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let trace = run_trace(spec, w, input)?;
    let mut jac = DMatrix::identity(spec.input_dim(), spec.input_dim());
    let mut offset = 0;
    for (layer, widths) in spec.layer_widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (widths[0], widths[1]);
        let weight = DMatrix::from_row_slice(
            fan_out,
            fan_in,
            w.0.as_slice()[offset..offset + fan_out * fan_in].as_ref(),
        );
        offset += fan_out * fan_in + fan_out;
        let mut next = weight * jac;
        let act = spec.activations[layer];
        for i in 0..fan_out {
            let scale = act.derivative(trace.pre[layer][i]);
            next.row_mut(i).scale_mut(scale);
        }
        jac = next;
    }
    Ok(jac)
}

/// Exact Jacobian of the output with respect to the flattened parameters,
/// `out × param_count`, columns in flattening order.
pub fn jacobian_params(
    spec: &MlpSpec,
    w: &FlatWeights,
    input: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let trace = run_trace(spec, w, input)?;
    let layers = spec.activations.len();
    let out_dim = spec.output_dim();

    // sensitivity[k] = ∂ output / ∂ z_k, built back to front.
    let mut sensitivity: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); layers];
    let last = layers - 1;
    let mut s = DMatrix::zeros(out_dim, spec.layer_widths[layers]);
    for i in 0..out_dim {
        s[(i, i)] = spec.activations[last].derivative(trace.pre[last][i]);
    }
    sensitivity[last] = s;
    // Weight offsets per layer, to walk backwards through the flat vector.
    let mut offsets = Vec::with_capacity(layers);
    let mut offset = 0;
    for widths in spec.layer_widths.windows(2) {
        offsets.push(offset);
        offset += widths[1] * widths[0] + widths[1];
    }
    for k in (0..last).rev() {
        let (fan_in, fan_out) = (spec.layer_widths[k + 1], spec.layer_widths[k + 2]);
        let weight_next = DMatrix::from_row_slice(
            fan_out,
            fan_in,
            w.0.as_slice()[offsets[k + 1]..offsets[k + 1] + fan_out * fan_in].as_ref(),
        );
        let mut s = &sensitivity[k + 1] * weight_next;
        for i in 0..spec.layer_widths[k + 1] {
            let scale = spec.activations[k].derivative(trace.pre[k][i]);
            s.column_mut(i).scale_mut(scale);
        }
        sensitivity[k] = s;
    }

    let mut jac = DMatrix::zeros(out_dim, spec.param_count());
    for k in 0..layers {
        let (fan_in, fan_out) = (spec.layer_widths[k], spec.layer_widths[k + 1]);
        let base = offsets[k];
        let input_k = &trace.activations[k];
        for r in 0..out_dim {
            for i in 0..fan_out {
                let sens = sensitivity[k][(r, i)];
                if sens == 0.0 {
                    continue;
                }
                // ∂out_r/∂W_k[i,j] = sens · a_k[j]; ∂out_r/∂b_k[i] = sens.
                for j in 0..fan_in {
                    jac[(r, base + i * fan_in + j)] = sens * input_k[j];
                }
                jac[(r, base + fan_out * fan_in + i)] = sens;
            }
        }
    }
    Ok(jac)
}

/// Serializes a weight vector to JSON text at full precision.
pub fn serialize(w: &FlatWeights) -> String {
    serde_json::to_string(&w.0.as_slice().to_vec()).expect("weight serialization cannot fail")
}

/// Parses a weight vector back from [`serialize`]'s output.
pub fn deserialize(text: &str) -> Result<FlatWeights> {
    let values: Vec<f64> = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    Ok(FlatWeights(DVector::from_vec(values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(widths: &[usize], acts: &[Activation]) -> MlpSpec {
        MlpSpec::new(widths.to_vec(), acts.to_vec()).unwrap()
    }

    #[test]
    fn param_count_formula() {
        let s = spec(
            &[3, 20, 20, 10],
            &[Activation::Elu, Activation::Tanh, Activation::Sigmoid],
        );
        assert_eq!(s.param_count(), 3 * 20 + 20 + 20 * 20 + 20 + 20 * 10 + 10);
        assert_eq!(s.param_count(), 710);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let s = spec(&[2, 4, 1], &[Activation::Tanh, Activation::Linear]);
        let a = init_params(&s, 42);
        let b = init_params(&s, 42);
        assert_eq!(a, b);
        let c = init_params(&s, 43);
        assert_ne!(a, c);
        // bias block of the first layer (after 2·4 weights) is zero
        for i in 8..12 {
            assert_eq!(a.0[i], 0.0);
        }
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let s = spec(&[1, 1], &[Activation::Linear]);
        let w = FlatWeights(DVector::from_vec(vec![2.0, 1.0]));
        let out = forward(&s, &w, &DVector::from_vec(vec![3.0])).unwrap();
        assert_relative_eq!(out[0], 7.0);
        let ji = jacobian_input(&s, &w, &DVector::from_vec(vec![3.0])).unwrap();
        assert_relative_eq!(ji[(0, 0)], 2.0);
        // ∂out/∂w = x = 3, ∂out/∂b = 1
        let jp = jacobian_params(&s, &w, &DVector::from_vec(vec![3.0])).unwrap();
        assert_relative_eq!(jp[(0, 0)], 3.0);
        assert_relative_eq!(jp[(0, 1)], 1.0);
    }

    #[test]
    fn zero_weights_zero_through_tanh_and_half_through_sigmoid() {
        let s_tanh = spec(&[3, 5, 2], &[Activation::Tanh, Activation::Tanh]);
        let w = FlatWeights(DVector::zeros(s_tanh.param_count()));
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let out = forward(&s_tanh, &w, &x).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));

        let s_sig = spec(&[3, 5, 2], &[Activation::Tanh, Activation::Sigmoid]);
        let w = FlatWeights(DVector::zeros(s_sig.param_count()));
        let out = forward(&s_sig, &w, &x).unwrap();
        assert!(out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn elu_is_continuous_and_smooth_at_zero() {
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        assert_eq!(Activation::Elu.derivative(0.0), 1.0);
        // approach from both sides
        assert_relative_eq!(Activation::Elu.apply(1e-9), 1e-9, max_relative = 1e-6);
        assert_relative_eq!(Activation::Elu.apply(-1e-9), -1e-9, max_relative = 1e-6);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let s = spec(
            &[4, 7, 6, 2],
            &[Activation::Elu, Activation::Tanh, Activation::Sigmoid],
        );
        let w = init_params(&s, 9);
        let x = DVector::from_vec(vec![0.4, -0.9, 1.2, 0.1]);
        let h = 1e-6;

        let ji = jacobian_input(&s, &w, &x).unwrap();
        for j in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = forward(&s, &w, &xp).unwrap();
            let fm = forward(&s, &w, &xm).unwrap();
            for i in 0..2 {
                let fdv = (fp[i] - fm[i]) / (2.0 * h);
                assert_relative_eq!(ji[(i, j)], fdv, epsilon = 1e-7, max_relative = 1e-5);
            }
        }

        let jp = jacobian_params(&s, &w, &x).unwrap();
        for j in 0..s.param_count() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp.0[j] += h;
            wm.0[j] -= h;
            let fp = forward(&s, &wp, &x).unwrap();
            let fm = forward(&s, &wm, &x).unwrap();
            for i in 0..2 {
                let fdv = (fp[i] - fm[i]) / (2.0 * h);
                assert_relative_eq!(jp[(i, j)], fdv, epsilon = 1e-7, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let s = spec(&[2, 3, 1], &[Activation::Tanh, Activation::Linear]);
        let w = init_params(&s, 7);
        let text = serialize(&w);
        let back = deserialize(&text).unwrap();
        assert_eq!(w, back);

        let empty = FlatWeights(DVector::zeros(0));
        assert_eq!(deserialize(&serialize(&empty)).unwrap(), empty);

        assert!(deserialize("[1.0, 2.0").is_err());
    }

    #[test]
    fn dimension_errors_are_reported() {
        let s = spec(&[2, 3, 1], &[Activation::Tanh, Activation::Linear]);
        let w = FlatWeights(DVector::zeros(5));
        assert!(forward(&s, &w, &DVector::zeros(2)).is_err());
        let w = init_params(&s, 0);
        assert!(forward(&s, &w, &DVector::zeros(3)).is_err());
    }
}
