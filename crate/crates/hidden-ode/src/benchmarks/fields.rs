//! Ground-truth vector fields for the benchmark systems.
//!
//! Every field is written generically over [`Scalar`] so the identical
//! expression evaluates on plain `f64` during simulation and on dual numbers
//! when exact Jacobians are required. Branches guard removable singularities
//! on the primal value, keeping plain and dual evaluation consistent.

use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;

/// Half-width of the interval around a removable singularity inside which the
/// first-order series replaces the direct rational expression.
const RATE_GUARD: f64 = 1e-7;

/// Evaluates `gain * s / (1 - exp(-s / width))`, the saturating opening-rate
/// expression of voltage-gated ion channels.
///
/// The expression has a removable singularity at `s = 0`; inside the guard
/// interval it is replaced by its series `gain * width + gain * s / 2`, which
/// matches both the limit value and the limit slope.
fn gated_rate<S: Scalar>(s: S, gain: f64, width: f64) -> S {
    if s.value().abs() < RATE_GUARD {
        S::constant(gain * width) + S::constant(0.5 * gain) * s
    } else {
        S::constant(gain) * s / (S::constant(1.0) - (-s / S::constant(width)).exp())
    }
}

/// Membrane dynamics of a spiking neuron with sodium, potassium, and leak
/// currents.
///
/// State layout: `x = (V_m, n, m, h)` — membrane potential in mV followed by
/// the potassium activation, sodium activation, and sodium inactivation gates.
/// `i_e` is the externally applied current.
pub fn hodgkin_huxley<S: Scalar>(x: &[S], i_e: S) -> [S; 4] {
    let (v, n, m, h) = (x[0], x[1], x[2], x[3]);
    let one = S::constant(1.0);

    let alpha_n = gated_rate(v + S::constant(55.0), 0.01, 10.0);
    let beta_n = S::constant(0.125) * (-(v + S::constant(65.0)) / S::constant(80.0)).exp();
    let alpha_m = gated_rate(v + S::constant(40.0), 0.1, 10.0);
    let beta_m = S::constant(4.0) * (-(v + S::constant(65.0)) / S::constant(18.0)).exp();
    let alpha_h = S::constant(0.07) * (-(v + S::constant(65.0)) / S::constant(20.0)).exp();
    let beta_h = one / (one + (-(v + S::constant(35.0)) / S::constant(10.0)).exp());

    let dv = i_e
        - S::constant(36.0) * n.powi(4) * (v + S::constant(77.0))
        - S::constant(120.0) * m.powi(3) * h * (v - S::constant(50.0))
        - S::constant(0.3) * (v + S::constant(54.4));
    let dn = alpha_n * (one - n) - beta_n * n;
    let dm = alpha_m * (one - m) - beta_m * m;
    let dh = alpha_h * (one - h) - beta_h * h;
    [dv, dn, dm, dh]
}

/// Voltage-dependent equilibrium values `alpha / (alpha + beta)` of the three
/// neuron gates `(n, m, h)`.
pub fn hh_steady_gates(v: f64) -> [f64; 3] {
    let alpha_n = gated_rate(v + 55.0, 0.01, 10.0);
    let beta_n = 0.125 * (-(v + 65.0) / 80.0).exp();
    let alpha_m = gated_rate(v + 40.0, 0.1, 10.0);
    let beta_m = 4.0 * (-(v + 65.0) / 18.0).exp();
    let alpha_h = 0.07 * (-(v + 65.0) / 20.0).exp();
    let beta_h = 1.0 / (1.0 + (-(v + 35.0) / 10.0).exp());
    [
        alpha_n / (alpha_n + beta_n),
        alpha_m / (alpha_m + beta_m),
        alpha_h / (alpha_h + beta_h),
    ]
}

/// Full neuron state at membrane potential `v` with every gate at its
/// voltage-dependent equilibrium.
pub fn hh_equilibrium_state(v: f64) -> [f64; 4] {
    let [n, m, h] = hh_steady_gates(v);
    [v, n, m, h]
}

/// Physical constants of the cart-pole system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    /// Cart mass `M` in kg.
    pub cart_mass: f64,
    /// Pole point-mass `m` in kg.
    pub pole_mass: f64,
    /// Pole length `l` in m.
    pub pole_length: f64,
    /// Gravitational acceleration `g` in m/s².
    pub gravity: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 0.5,
            gravity: 9.81,
        }
    }
}

/// Cart-pole dynamics with the pole angle measured from the upright position.
///
/// State layout: `x = (z, ż, φ, φ̇)` — cart position, cart velocity, pole
/// angle, pole angular velocity. `u` is the horizontal force on the cart.
/// The pole-velocity term in the cart acceleration enters linearly; this is
/// the defining field of the benchmark, shared verbatim by data generation
/// and evaluation.
pub fn cart_pole<S: Scalar>(x: &[S], u: S, p: &CartPoleParams) -> [S; 4] {
    let (z_dot, phi, phi_dot) = (x[1], x[2], x[3]);
    let (mm, m, l, g) = (p.cart_mass, p.pole_mass, p.pole_length, p.gravity);
    let (sin_phi, cos_phi) = (phi.sin(), phi.cos());

    let den = S::constant(mm + m) - S::constant(m) * cos_phi * cos_phi;
    let z_acc = (-S::constant(m * l) * sin_phi * phi_dot
        + u
        + S::constant(m * g) * cos_phi * sin_phi)
        / den;
    let phi_acc = (-S::constant(m * l) * cos_phi * sin_phi * phi_dot * phi_dot
        + u * cos_phi
        + S::constant((m + mm) * g) * sin_phi)
        / (S::constant(l) * den);
    [z_dot, z_acc, phi_dot, phi_acc]
}

/// Free harmonic oscillator with angular frequency `omega`, forced by `u` on
/// the velocity component.
///
/// State layout: `x = (position, velocity)`.
pub fn harmonic_oscillator<S: Scalar>(x: &[S], u: S, omega: f64) -> [S; 2] {
    [x[1], -S::constant(omega * omega) * x[0] + u]
}

/// Coefficient families of the seven-species yeast glycolysis model, one
/// family per state equation, in expanded polynomial/rational form.
///
/// The defaults reproduce the oscillatory glycolysis model of Wolf &
/// Heinrich (Biochem. J. 346:125, 2000) with the kinetic constants
/// J0=2.5, k1=100, K1=0.52, q=4, k2=6, k3=16, k4=100, k5=1.28, k6=12,
/// N=1, A=4, κ=13, ψ=0.1, k=1.8, rewritten over the state ordering used
/// here (the intracellular species first, then the extracellular pools).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YeastCoefficients {
    pub c: [f64; 3],
    pub d: [f64; 4],
    pub e: [f64; 4],
    pub f: [f64; 5],
    pub g: [f64; 2],
    pub h: [f64; 5],
    pub j: [f64; 3],
}

impl Default for YeastCoefficients {
    fn default() -> Self {
        let inv_k1_4 = 0.52_f64.powi(-4);
        Self {
            c: [2.5, -100.0, inv_k1_4],
            d: [200.0, inv_k1_4, -6.0, 6.0],
            e: [6.0, -64.0, -6.0, 16.0],
            f: [64.0, -13.0, 13.0, -16.0, -100.0],
            g: [1.3, -3.1],
            h: [-200.0, inv_k1_4, 128.0, -32.0, -1.28],
            j: [6.0, -18.0, -100.0],
        }
    }
}

/// Yeast glycolysis network: seven metabolite concentrations with two
/// saturating (Hill-type) glucose-consumption terms and bilinear couplings.
pub fn yeast_glycolysis<S: Scalar>(x: &[S], k: &YeastCoefficients) -> [S; 7] {
    let (x1, x2, x3, x4, x5, x6, x7) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
    let one = S::constant(1.0);
    let x6_4 = x6.powi(4);

    let dx1 = S::constant(k.c[0])
        + S::constant(k.c[1]) * x1 * x6 / (one + S::constant(k.c[2]) * x6_4);
    let dx2 = S::constant(k.d[0]) * x1 * x6 / (one + S::constant(k.d[1]) * x6_4)
        + S::constant(k.d[2]) * x2
        - S::constant(k.d[3]) * x2 * x7;
    let dx3 = S::constant(k.e[0]) * x2
        + S::constant(k.e[1]) * x3
        + S::constant(k.e[2]) * x2 * x7
        + S::constant(k.e[3]) * x3 * x6;
    let dx4 = S::constant(k.f[0]) * x3
        + S::constant(k.f[1]) * x4
        + S::constant(k.f[2]) * x5
        + S::constant(k.f[3]) * x3 * x6
        + S::constant(k.f[4]) * x4 * x7;
    let dx5 = S::constant(k.g[0]) * x4 + S::constant(k.g[1]) * x5;
    let dx6 = S::constant(k.h[2]) * x3
        + S::constant(k.h[4]) * x6
        + S::constant(k.h[3]) * x3 * x6
        + S::constant(k.h[0]) * x1 * x6 / (one + S::constant(k.h[1]) * x6_4);
    let dx7 = S::constant(k.j[0]) * x2
        + S::constant(k.j[1]) * x2 * x7
        + S::constant(k.j[2]) * x4 * x7;
    [dx1, dx2, dx3, dx4, dx5, dx6, dx7]
}
