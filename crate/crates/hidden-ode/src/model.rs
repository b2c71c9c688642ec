//! Hybrid dynamics model: known physics with selected state derivatives
//! replaced by a neural field, Euler discretization, a measurement map, and
//! exact Jacobians of all three.

use nalgebra::{DMatrix, DVector};

use crate::autodiff::{Dual, Scalar};
use crate::benchmarks::fields::{self, CartPoleParams, YeastCoefficients};
use crate::error::{Error, Result};
use crate::net::{self, FlatWeights, MlpSpec};

/// Latent system state of length `d_x`.
pub type StateVector = DVector<f64>;
/// External control input of length `d_u`.
pub type ControlInput = DVector<f64>;
/// Sensor reading of length `d_y`.
pub type Measurement = DVector<f64>;

/// Known part of the continuous-time vector field.
#[derive(Clone, Debug)]
pub enum KnownField {
    /// `ẋ = A·x + B·u`.
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// `ẋ = 0`; every derivative must come from the hidden slot.
    Zero { dim_x: usize, dim_u: usize },
    /// Spiking-neuron membrane dynamics; `u = [applied current]`.
    HodgkinHuxley,
    /// Cart with an inverted pendulum; `u = [horizontal force]`.
    CartPole(CartPoleParams),
    /// `ẍ = -ω²x + u`; `u = [forcing]`.
    HarmonicOscillator { omega: f64 },
    /// Seven-species glycolysis network; autonomous (`d_u = 0`).
    YeastGlycolysis(YeastCoefficients),
}

impl KnownField {
    pub fn dim_x(&self) -> usize {
        match self {
            Self::Linear { a, .. } => a.nrows(),
            Self::Zero { dim_x, .. } => *dim_x,
            Self::HodgkinHuxley | Self::CartPole(_) => 4,
            Self::HarmonicOscillator { .. } => 2,
            Self::YeastGlycolysis(_) => 7,
        }
    }

    pub fn dim_u(&self) -> usize {
        match self {
            Self::Linear { b, .. } => b.ncols(),
            Self::Zero { dim_u, .. } => *dim_u,
            Self::HodgkinHuxley | Self::CartPole(_) | Self::HarmonicOscillator { .. } => 1,
            Self::YeastGlycolysis(_) => 0,
        }
    }

    /// Evaluates the field on any scalar type; `u` entries are treated as
    /// constants, so dual evaluation differentiates with respect to `x` only.
    fn eval<S: Scalar>(&self, x: &[S], u: &[f64]) -> Vec<S> {
        match self {
            Self::Linear { a, b } => (0..a.nrows())
                .map(|i| {
                    let mut acc = S::constant(0.0);
                    for (j, &xj) in x.iter().enumerate() {
                        acc = acc + S::constant(a[(i, j)]) * xj;
                    }
                    for (k, &uk) in u.iter().enumerate() {
                        acc = acc + S::constant(b[(i, k)] * uk);
                    }
                    acc
                })
                .collect(),
            Self::Zero { dim_x, .. } => vec![S::constant(0.0); *dim_x],
            Self::HodgkinHuxley => fields::hodgkin_huxley(x, S::constant(u[0])).to_vec(),
            Self::CartPole(p) => fields::cart_pole(x, S::constant(u[0]), p).to_vec(),
            Self::HarmonicOscillator { omega } => {
                fields::harmonic_oscillator(x, S::constant(u[0]), *omega).to_vec()
            }
            Self::YeastGlycolysis(k) => fields::yeast_glycolysis(x, k).to_vec(),
        }
    }
}

/// Measurement map `y = h(x)` together with its exact Jacobian.
#[derive(Clone)]
pub enum MeasurementMap {
    /// Reads out the listed state components in order.
    Select { dim_x: usize, indices: Vec<usize> },
    /// `y = H·x` for an arbitrary matrix `H`.
    Linear(DMatrix<f64>),
    /// Caller-supplied nonlinear map with a matching analytic Jacobian.
    Custom {
        dim_x: usize,
        dim_y: usize,
        map: fn(&StateVector) -> Measurement,
        jacobian: fn(&StateVector) -> DMatrix<f64>,
    },
}

impl std::fmt::Debug for MeasurementMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Select { dim_x, indices } => f
                .debug_struct("Select")
                .field("dim_x", dim_x)
                .field("indices", indices)
                .finish(),
            Self::Linear(h) => f.debug_tuple("Linear").field(&h.shape()).finish(),
            Self::Custom { dim_x, dim_y, .. } => f
                .debug_struct("Custom")
                .field("dim_x", dim_x)
                .field("dim_y", dim_y)
                .finish(),
        }
    }
}

impl MeasurementMap {
    pub fn dim_x(&self) -> usize {
        match self {
            Self::Select { dim_x, .. } => *dim_x,
            Self::Linear(h) => h.ncols(),
            Self::Custom { dim_x, .. } => *dim_x,
        }
    }

    pub fn dim_y(&self) -> usize {
        match self {
            Self::Select { indices, .. } => indices.len(),
            Self::Linear(h) => h.nrows(),
            Self::Custom { dim_y, .. } => *dim_y,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Select { dim_x, indices } => {
                for &i in indices {
                    if i >= *dim_x {
                        return Err(Error::Config(format!(
                            "measured component {i} out of range for state dimension {dim_x}"
                        )));
                    }
                }
                Ok(())
            }
            Self::Linear(_) | Self::Custom { .. } => Ok(()),
        }
    }

    pub fn apply(&self, x: &StateVector) -> Measurement {
        match self {
            Self::Select { indices, .. } => {
                Measurement::from_iterator(indices.len(), indices.iter().map(|&i| x[i]))
            }
            Self::Linear(h) => h * x,
            Self::Custom { map, .. } => map(x),
        }
    }

    pub fn jacobian(&self, x: &StateVector) -> DMatrix<f64> {
        match self {
            Self::Select { dim_x, indices } => {
                let mut h = DMatrix::zeros(indices.len(), *dim_x);
                for (row, &i) in indices.iter().enumerate() {
                    h[(row, i)] = 1.0;
                }
                h
            }
            Self::Linear(h) => h.clone(),
            Self::Custom { jacobian, .. } => jacobian(x),
        }
    }
}

/// Neural replacement for a subset of the state derivatives.
///
/// The network reads the full state vector and produces one output per entry
/// of `indices`; output row `r` replaces the derivative of state component
/// `indices[r]`.
#[derive(Clone, Debug)]
pub struct HiddenSlot {
    pub spec: MlpSpec,
    pub indices: Vec<usize>,
}

/// Continuous-time model `ẋ = f(x, u)` whose components listed in the hidden
/// slot are produced by a neural field `a(x, θ)` instead of the known physics,
/// together with the measurement map and the discretization step.
#[derive(Clone, Debug)]
pub struct HybridModel {
    known: KnownField,
    hidden: Option<HiddenSlot>,
    measurement: MeasurementMap,
    dt: f64,
}

impl HybridModel {
    /// Builds a model after validating dimensional consistency.
    ///
    /// `dt = 0` is accepted so degenerate single-point configurations remain
    /// expressible in tests; data generation and training always use `dt > 0`.
    pub fn new(
        known: KnownField,
        hidden: Option<HiddenSlot>,
        measurement: MeasurementMap,
        dt: f64,
    ) -> Result<Self> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::Config(format!("time step must be finite and >= 0, got {dt}")));
        }
        let dim_x = known.dim_x();
        if measurement.dim_x() != dim_x {
            return Err(Error::Config(format!(
                "measurement map expects state dimension {}, model has {dim_x}",
                measurement.dim_x()
            )));
        }
        measurement.validate()?;
        if let Some(slot) = &hidden {
            if slot.spec.input_dim() != dim_x {
                return Err(Error::Config(format!(
                    "hidden net reads {} inputs, state dimension is {dim_x}",
                    slot.spec.input_dim()
                )));
            }
            if slot.spec.output_dim() != slot.indices.len() {
                return Err(Error::Config(format!(
                    "hidden net produces {} outputs for {} replaced components",
                    slot.spec.output_dim(),
                    slot.indices.len()
                )));
            }
            let mut seen = vec![false; dim_x];
            for &i in &slot.indices {
                if i >= dim_x {
                    return Err(Error::Config(format!(
                        "hidden component {i} out of range for state dimension {dim_x}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!("hidden component {i} listed twice")));
                }
            }
        }
        Ok(Self { known, hidden, measurement, dt })
    }

    pub fn dim_x(&self) -> usize {
        self.known.dim_x()
    }

    pub fn dim_u(&self) -> usize {
        self.known.dim_u()
    }

    pub fn dim_y(&self) -> usize {
        self.measurement.dim_y()
    }

    /// Number of learnable parameters; zero when nothing is hidden.
    pub fn dim_theta(&self) -> usize {
        self.hidden.as_ref().map_or(0, |s| s.spec.param_count())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn known(&self) -> &KnownField {
        &self.known
    }

    pub fn hidden(&self) -> Option<&HiddenSlot> {
        self.hidden.as_ref()
    }

    /// State components whose dynamics come from the hidden field (empty
    /// when the model has none).
    pub fn hidden_indices(&self) -> &[usize] {
        self.hidden.as_ref().map_or(&[], |slot| &slot.indices)
    }

    pub fn measurement(&self) -> &MeasurementMap {
        &self.measurement
    }

    fn check_dims(&self, x: &StateVector, u: &ControlInput, theta: &FlatWeights) -> Result<()> {
        if x.len() != self.dim_x() {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                self.dim_x()
            )));
        }
        if u.len() != self.dim_u() {
            return Err(Error::Dimension(format!(
                "input has length {}, expected {}",
                u.len(),
                self.dim_u()
            )));
        }
        if theta.len() != self.dim_theta() {
            return Err(Error::Dimension(format!(
                "parameter vector has length {}, expected {}",
                theta.len(),
                self.dim_theta()
            )));
        }
        Ok(())
    }

    /// Continuous-time derivative `ẋ = f(x, u, a(x, θ))`: known physics with
    /// the hidden components overwritten by the neural field.
    pub fn eval_field(
        &self,
        x: &StateVector,
        u: &ControlInput,
        theta: &FlatWeights,
    ) -> Result<StateVector> {
        self.check_dims(x, u, theta)?;
        let known = self.known.eval::<f64>(x.as_slice(), u.as_slice());
        let mut dx = StateVector::from_vec(known);
        if let Some(slot) = &self.hidden {
            let a = net::forward(&slot.spec, theta, x)?;
            for (row, &i) in slot.indices.iter().enumerate() {
                dx[i] = a[row];
            }
        }
        if let Some(i) = dx.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "field evaluation produced a non-finite derivative at component {i}"
            )));
        }
        Ok(dx)
    }

    /// One explicit Euler step `x + dt·f(x, u, a(x, θ))`.
    pub fn discrete_step(
        &self,
        x: &StateVector,
        u: &ControlInput,
        theta: &FlatWeights,
    ) -> Result<StateVector> {
        Ok(x + self.dt * self.eval_field(x, u, theta)?)
    }

    /// Noiseless sensor reading `h(x)`.
    pub fn measure(&self, x: &StateVector) -> Result<Measurement> {
        if x.len() != self.dim_x() {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                self.dim_x()
            )));
        }
        let y = self.measurement.apply(x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "measurement map produced a non-finite value".into(),
            ));
        }
        Ok(y)
    }

    /// Exact Jacobian of [`Self::discrete_step`] with respect to the state:
    /// `I + dt·∂f/∂x`, with hidden rows differentiated through the net.
    pub fn jacobian_state(
        &self,
        x: &StateVector,
        u: &ControlInput,
        theta: &FlatWeights,
    ) -> Result<DMatrix<f64>> {
        self.check_dims(x, u, theta)?;
        let n = self.dim_x();
        let mut jf = DMatrix::zeros(n, n);
        let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        for j in 0..n {
            seeded[j] = Dual::variable(x[j]);
            let col = self.known.eval::<Dual>(&seeded, u.as_slice());
            seeded[j] = Dual::constant(x[j]);
            for (i, d) in col.iter().enumerate() {
                jf[(i, j)] = d.d;
            }
        }
        if let Some(slot) = &self.hidden {
            let ja = net::jacobian_input(&slot.spec, theta, x)?;
            for (row, &i) in slot.indices.iter().enumerate() {
                jf.row_mut(i).copy_from(&ja.row(row));
            }
        }
        Ok(DMatrix::identity(n, n) + self.dt * jf)
    }

    /// Exact Jacobian of [`Self::discrete_step`] with respect to the
    /// parameters: `dt·∂a/∂θ` on the hidden rows, zero elsewhere.
    pub fn jacobian_params(
        &self,
        x: &StateVector,
        u: &ControlInput,
        theta: &FlatWeights,
    ) -> Result<DMatrix<f64>> {
        self.check_dims(x, u, theta)?;
        let mut jp = DMatrix::zeros(self.dim_x(), self.dim_theta());
        if let Some(slot) = &self.hidden {
            let ja = net::jacobian_params(&slot.spec, theta, x)?;
            for (row, &i) in slot.indices.iter().enumerate() {
                jp.row_mut(i).copy_from(&(self.dt * ja.row(row)));
            }
        }
        Ok(jp)
    }

    /// The nonzero row block of the parameter Jacobian: the rows of
    /// [`HybridModel::jacobian_params`] selected by
    /// [`HybridModel::hidden_indices`], in that order. All other rows of the
    /// full Jacobian are structurally zero, so dense algebra that consumes it
    /// can work on this `d_h × d_θ` block instead.
    pub fn jacobian_params_hidden_rows(
        &self,
        x: &StateVector,
        u: &ControlInput,
        theta: &FlatWeights,
    ) -> Result<DMatrix<f64>> {
        self.check_dims(x, u, theta)?;
        match &self.hidden {
            Some(slot) => Ok(self.dt * net::jacobian_params(&slot.spec, theta, x)?),
            None => Ok(DMatrix::zeros(0, self.dim_theta())),
        }
    }

    /// Exact Jacobian of the measurement map at `x`.
    pub fn jacobian_measurement(&self, x: &StateVector) -> Result<DMatrix<f64>> {
        if x.len() != self.dim_x() {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                self.dim_x()
            )));
        }
        Ok(self.measurement.jacobian(x))
    }
}

/// Central-difference Jacobian of an arbitrary vector function; test oracle
/// only — the production path uses exact derivatives.
pub fn fd_jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let probe = f(x);
    let mut jac = DMatrix::zeros(probe.len(), x.len());
    for j in 0..x.len() {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[j] += step;
        lo[j] -= step;
        let col = (f(&hi) - f(&lo)) / (2.0 * step);
        jac.column_mut(j).copy_from(&col);
    }
    jac
}
