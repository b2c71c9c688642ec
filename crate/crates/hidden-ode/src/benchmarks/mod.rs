//! Benchmark systems: ground-truth dynamics, control policies, data
//! generation, and dataset I/O.
//!
//! Each [`Benchmark`] bundles a true vector field with the partial-measurement
//! setup used to learn part of it: which state components are hidden (their
//! dynamics replaced by a network), which are measured, the network
//! architecture, the input policy, and the default simulation protocol.

pub mod dataset;
pub mod fields;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{ControlInput, HiddenSlot, HybridModel, KnownField, MeasurementMap, StateVector};
use crate::net::{Activation, MlpSpec};
use dataset::Dataset;
use fields::{hh_equilibrium_state, CartPoleParams, YeastCoefficients};

/// Linear state-feedback controller `u = −K·(x − x*)`.
#[derive(Clone, Debug)]
pub struct LqrPolicy {
    gain: DMatrix<f64>,
    linearization_point: StateVector,
}

impl LqrPolicy {
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn input(&self, x: &StateVector) -> ControlInput {
        -(&self.gain * (x - &self.linearization_point))
    }
}

/// Solves the continuous-time algebraic Riccati equation
/// `AᵀP + PA − P·B·R⁻¹·Bᵀ·P + Q = 0` by integrating the matrix Riccati ODE
/// to stationarity (classical Runge–Kutta, checked against the algebraic
/// residual), and returns the feedback policy with gain `K = R⁻¹BᵀP` about
/// the origin.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrPolicy> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols())
    {
        return Err(Error::Dimension(format!(
            "inconsistent LQR shapes: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let chol_r = Cholesky::new(r.clone())
        .ok_or_else(|| Error::Config("LQR input weight R must be positive definite".into()))?;
    let rhs = |p: &DMatrix<f64>| -> DMatrix<f64> {
        a.transpose() * p + p * a - p * b * chol_r.solve(&(b.transpose() * p)) + q
    };
    let mut p = q.clone();
    let h = 1e-3;
    const MAX_STEPS: usize = 2_000_000;
    const TOL: f64 = 1e-10;
    let mut residual = f64::INFINITY;
    for step in 0..MAX_STEPS {
        if step % 1000 == 0 {
            residual = rhs(&p).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if residual < TOL {
                break;
            }
            if !residual.is_finite() {
                return Err(Error::Numerical(format!(
                    "Riccati integration diverged at step {step}"
                )));
            }
        }
        let k1 = rhs(&p);
        let k2 = rhs(&(&p + 0.5 * h * &k1));
        let k3 = rhs(&(&p + 0.5 * h * &k2));
        let k4 = rhs(&(&p + h * &k3));
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if residual >= TOL {
        residual = rhs(&p).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    if residual >= TOL {
        return Err(Error::Numerical(format!(
            "Riccati iteration did not converge: residual {residual:e} after {MAX_STEPS} steps"
        )));
    }
    let gain = chol_r.solve(&(b.transpose() * &p));
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("LQR gain is not finite".into()));
    }
    Ok(LqrPolicy { gain, linearization_point: DVector::zeros(n) })
}

/// Linearization of the cart-pole about the upright equilibrium, as
/// `(A, B)` of `ẋ = Ax + Bu`.
pub fn cart_pole_linearization(p: &CartPoleParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let CartPoleParams { cart_mass: big_m, pole_mass: m, pole_length: l, gravity: g } = *p;
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, m * g / big_m, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, (big_m + m) * g / (l * big_m), 0.0,
        ],
    );
    let b = DMatrix::from_column_slice(4, 1, &[0.0, 1.0 / big_m, 0.0, 1.0 / (l * big_m)]);
    (a, b)
}

/// Input policy applied during data generation.
#[derive(Clone, Debug)]
pub enum Policy {
    /// The same input vector at every step (covers "no input" via zeros or
    /// an empty vector).
    Constant(ControlInput),
    /// State feedback.
    Feedback(LqrPolicy),
}

impl Policy {
    pub fn input(&self, x: &StateVector) -> ControlInput {
        match self {
            Policy::Constant(u) => u.clone(),
            Policy::Feedback(lqr) => lqr.input(x),
        }
    }

    pub fn dim_u(&self) -> usize {
        match self {
            Policy::Constant(u) => u.len(),
            Policy::Feedback(lqr) => lqr.gain.nrows(),
        }
    }
}

/// Optional Gaussian disturbances for data generation; the default protocol
/// is noiseless.
#[derive(Clone, Copy, Debug)]
pub struct SimNoise {
    /// Std of the per-step state disturbance (enters scaled by dt).
    pub process_std: f64,
    /// Std of the additive measurement noise.
    pub measurement_std: f64,
    pub seed: u64,
}

/// A complete experimental setup: true dynamics, what is hidden, what is
/// measured, the learner's network, and the data-generation protocol.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: &'static str,
    pub field: KnownField,
    pub hidden: Vec<usize>,
    pub measured: Vec<usize>,
    pub net: MlpSpec,
    pub dt: f64,
    pub default_steps: usize,
    /// True initial state of the data-generation run.
    pub x0: StateVector,
    /// Initial-state guess handed to training (re-used every epoch).
    pub x0_guess: StateVector,
    pub policy: Policy,
}

impl Benchmark {
    /// Single-neuron membrane model: h-gate dynamics hidden and unmeasured,
    /// voltage and the other two gates measured, constant 10 µA/cm² drive,
    /// start at the resting equilibrium of −65 mV.
    pub fn neuron() -> Self {
        let x0 = DVector::from_column_slice(&hh_equilibrium_state(-65.0));
        Benchmark {
            name: "hh",
            field: KnownField::HodgkinHuxley,
            hidden: vec![3],
            measured: vec![0, 1, 2],
            net: MlpSpec::new(
                vec![4, 20, 20, 10, 1],
                vec![Activation::Elu, Activation::Tanh, Activation::Sigmoid, Activation::Linear],
            )
            .expect("static architecture"),
            dt: 1e-3,
            default_steps: 5000,
            x0_guess: x0.clone(),
            x0,
            policy: Policy::Constant(DVector::from_element(1, 10.0)),
        }
    }

    /// Cart-pole stabilized by LQR feedback: both velocities hidden, both
    /// positions measured, started near upright.
    pub fn cart_pole() -> Result<Self> {
        let params = CartPoleParams::default();
        let (a, b) = cart_pole_linearization(&params);
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 10.0, 1.0]));
        let r = DMatrix::from_element(1, 1, 1.0);
        let policy = Policy::Feedback(lqr_gain(&a, &b, &q, &r)?);
        Ok(Benchmark {
            name: "cartpole",
            field: KnownField::CartPole(params),
            hidden: vec![1, 3],
            measured: vec![0, 2],
            net: MlpSpec::new(
                vec![4, 20, 20, 2],
                vec![Activation::Tanh, Activation::Tanh, Activation::Linear],
            )
            .expect("static architecture"),
            dt: 1e-3,
            default_steps: 5000,
            x0: DVector::from_vec(vec![0.0, 0.0, 0.1, 0.0]),
            x0_guess: DVector::zeros(4),
            policy,
        })
    }

    /// Free harmonic oscillator (ω = 2): velocity hidden, position measured,
    /// zero input.
    pub fn oscillator() -> Self {
        Benchmark {
            name: "ho",
            field: KnownField::HarmonicOscillator { omega: 2.0 },
            hidden: vec![1],
            measured: vec![0],
            net: MlpSpec::new(
                vec![2, 16, 16, 1],
                vec![Activation::Tanh, Activation::Tanh, Activation::Linear],
            )
            .expect("static architecture"),
            dt: 1e-3,
            default_steps: 5000,
            x0: DVector::from_vec(vec![1.0, 0.0]),
            x0_guess: DVector::zeros(2),
            policy: Policy::Constant(DVector::from_element(1, 0.0)),
        }
    }

    /// Glycolytic oscillator: the S4 pool's dynamics hidden and unmeasured,
    /// the six other concentrations measured, no input. Initial
    /// concentrations sit at the midpoints of the ranges commonly used for
    /// this model.
    pub fn glycolysis() -> Self {
        // State ordering (S1, S2, S3, S4, S7, S6, S5); hidden component S4.
        let x0 = DVector::from_vec(vec![0.875, 1.175, 0.12, 0.225, 0.075, 1.405, 0.19]);
        Benchmark {
            name: "yeast",
            field: KnownField::YeastGlycolysis(YeastCoefficients::default()),
            hidden: vec![3],
            measured: vec![0, 1, 2, 4, 5, 6],
            net: MlpSpec::new(
                vec![7, 20, 20, 1],
                vec![Activation::Tanh, Activation::Tanh, Activation::Linear],
            )
            .expect("static architecture"),
            dt: 1e-3,
            default_steps: 5000,
            x0_guess: x0.clone(),
            x0,
            policy: Policy::Constant(DVector::zeros(0)),
        }
    }

    /// Looks a benchmark up by its CLI name or a common alias.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "hh" | "hodgkin_huxley" | "neuron" => Ok(Self::neuron()),
            "cartpole" | "cart_pole" | "cart-pole" => Self::cart_pole(),
            "ho" | "harmonic_oscillator" | "oscillator" => Ok(Self::oscillator()),
            "yeast" | "yeast_glycolysis" | "glycolysis" => Ok(Self::glycolysis()),
            other => Err(Error::Config(format!(
                "unknown benchmark '{other}' (expected hh, cartpole, ho, or yeast)"
            ))),
        }
    }

    /// Same benchmark started from a different true initial state (held-out
    /// evaluation protocols).
    pub fn with_initial_state(mut self, x0: StateVector) -> Self {
        self.x0 = x0;
        self
    }

    pub fn dim_x(&self) -> usize {
        self.field.dim_x()
    }

    /// The learner's model: true field with the hidden rows replaced by the
    /// network, partial measurement.
    pub fn hybrid_model(&self) -> Result<HybridModel> {
        HybridModel::new(
            self.field.clone(),
            Some(HiddenSlot { spec: self.net.clone(), indices: self.hidden.clone() }),
            MeasurementMap::Select { dim_x: self.dim_x(), indices: self.measured.clone() },
            self.dt,
        )
    }

    /// The data-generating model: full true field, same partial measurement.
    pub fn truth_model(&self) -> Result<HybridModel> {
        HybridModel::new(
            self.field.clone(),
            None,
            MeasurementMap::Select { dim_x: self.dim_x(), indices: self.measured.clone() },
            self.dt,
        )
    }

    /// Euler-integrates the true field under the benchmark's input policy
    /// and records `(u, y, x)` at every step. Deterministic; with `noise`,
    /// deterministic per seed.
    pub fn simulate(&self, steps: usize, noise: Option<SimNoise>) -> Result<Dataset> {
        if steps == 0 {
            return Err(Error::Config("simulation needs at least one step".into()));
        }
        let truth = self.truth_model()?;
        let empty = crate::net::FlatWeights(DVector::zeros(0));
        let mut draw: Box<dyn FnMut() -> (DVector<f64>, DVector<f64>)> = match noise {
            None => Box::new(move || (DVector::zeros(0), DVector::zeros(0))),
            Some(n) => {
                for (name, std) in
                    [("process_std", n.process_std), ("measurement_std", n.measurement_std)]
                {
                    if !(std.is_finite() && std >= 0.0) {
                        return Err(Error::Config(format!("{name} must be ≥ 0, got {std}")));
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
                let process = Normal::new(0.0, n.process_std)
                    .map_err(|e| Error::Config(format!("bad process noise: {e}")))?;
                let measurement = Normal::new(0.0, n.measurement_std)
                    .map_err(|e| Error::Config(format!("bad measurement noise: {e}")))?;
                let (d_x, d_y) = (self.dim_x(), self.measured.len());
                Box::new(move || {
                    (
                        DVector::from_fn(d_x, |_, _| process.sample(&mut rng)),
                        DVector::from_fn(d_y, |_, _| measurement.sample(&mut rng)),
                    )
                })
            }
        };

        let mut x = self.x0.clone();
        let mut inputs = Vec::with_capacity(steps);
        let mut measurements = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps);
        for i in 0..steps {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "simulation of '{}' diverged at step {i}",
                    self.name
                )));
            }
            let u = self.policy.input(&x);
            let (eps_x, eps_y) = draw();
            let mut y = truth.measure(&x)?;
            if !eps_y.is_empty() {
                y += &eps_y;
            }
            states.push(x.clone());
            measurements.push(y);
            let mut next = truth.discrete_step(&x, &u, &empty)?;
            if !eps_x.is_empty() {
                next += self.dt * eps_x;
            }
            inputs.push(u);
            x = next;
        }
        Dataset::new(0.0, self.dt, inputs, measurements, Some(states))
    }
}
