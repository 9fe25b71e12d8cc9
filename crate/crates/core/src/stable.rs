//! The one-sided α-stable law with Laplace transform `exp(-λ^α)`.
//!
//! The density is evaluated through the Zolotarev integral representation
//!
//! ```text
//! f_α(x) = C_α z^{1/α} ∫_{-π}^{π} U_α(φ) exp(-z U_α(φ)) dφ,
//! z(x)   = α^{1/(1-α)} x^{-α/(1-α)},   C_α = α^{1-1/α} / (2π(1-α)),
//! ```
//!
//! which is the density of Kanter's variable `(α^{1/(1-α)} U_α(u) / W)^{(1-α)/α}`
//! with `u ~ Uniform(0, π)` and `W ~ Exp(1)`. At `α = 1/2` it reduces to the
//! Lévy density `x^{-3/2} e^{-1/(4x)} / (2√π)`.
//!
//! For `z` above the crossover the angular integral is replaced by its
//! Laplace-method (Watson) expansion around `φ = 0`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::quad::{self, Estimate, Tolerance};

/// Errors raised by the stable-density routines.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StableError {
    #[error("alpha = {0} outside (0, 1/2]; t -> ln f_alpha(e^t) is log-concave only for alpha <= 1/2")]
    InvalidAlpha(f64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("{what} = {value} outside the domain")]
    Domain { what: &'static str, value: f64 },
    #[error("quadrature did not converge: estimate {value} with absolute error {abs_error}")]
    NotConverged { value: f64, abs_error: f64 },
}

/// Crossover value of `z(x)` above which the Watson expansion is used.
pub const DEFAULT_CROSSOVER_Z: f64 = 50.0;

/// Acceptance rate below which the tilted sampler switches to the
/// log-concave rejection route.
pub const TILTED_ACCEPTANCE_FLOOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    /// Panel budget for the adaptive angular quadrature.
    pub quadrature_nodes: usize,
    /// Below this `x` the saddle-point expansion replaces quadrature.
    pub small_x_crossover: f64,
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self, StableError> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(StableError::InvalidAlpha(alpha));
        }
        let zs = alpha.powf(1.0 / (1.0 - alpha));
        let small_x_crossover = (zs / DEFAULT_CROSSOVER_Z).powf((1.0 - alpha) / alpha);
        let p = Self {
            alpha,
            quadrature_nodes: 256,
            small_x_crossover,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), StableError> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(StableError::InvalidAlpha(self.alpha));
        }
        if self.quadrature_nodes < 64 {
            return Err(StableError::InvalidParameter {
                name: "quadrature_nodes",
                value: self.quadrature_nodes as f64,
            });
        }
        if !(self.small_x_crossover > 0.0 && self.small_x_crossover.is_finite()) {
            return Err(StableError::InvalidParameter {
                name: "small_x_crossover",
                value: self.small_x_crossover,
            });
        }
        Ok(())
    }
}

/// `U_α(φ) = [sin(αφ)/(α sin φ)]^{α/(1-α)} · sin((1-α)φ)/(α sin φ)` on `(-π, π)`,
/// continued by its limit `(1-α)/α` at `φ = 0`.
pub fn zolotarev_u(phi: f64, alpha: f64) -> Result<f64, StableError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StableError::Domain {
            what: "alpha",
            value: alpha,
        });
    }
    if !(phi.abs() < PI) {
        return Err(StableError::Domain {
            what: "phi",
            value: phi,
        });
    }
    let phi = phi.abs();
    Ok(ln_u(phi, PI - phi, alpha).exp())
}

/// `ln U_α` evaluated from `φ ∈ [0, π)` and `ψ = π - φ`; the complement is
/// passed separately so that `sin φ` stays accurate as `φ → π`.
fn ln_u(phi: f64, psi: f64, alpha: f64) -> f64 {
    if phi < 1e-4 {
        let (l0, l1, l2) = u_log_series(alpha);
        let x = phi * phi;
        return l0 + l1 * x + l2 * x * x;
    }
    let s = if phi > 0.5 * PI { psi.sin() } else { phi.sin() };
    let a = (alpha * phi).sin() / (alpha * s);
    let b = ((1.0 - alpha) * phi).sin() / (alpha * s);
    alpha / (1.0 - alpha) * a.ln() + b.ln()
}

/// Coefficients of `ln U_α(φ) = l0 + l1 φ² + l2 φ⁴ + O(φ⁶)`.
fn u_log_series(alpha: f64) -> (f64, f64, f64) {
    let b = 1.0 - alpha;
    let l0 = (b / alpha).ln();
    let l1 = alpha / 2.0;
    let l2 = (alpha / b * (1.0 - alpha.powi(4)) + (1.0 - b.powi(4))) / 180.0;
    (l0, l1, l2)
}

/// Laplace-method expansion of `∫ e^{-N f(x)} g(x) dx` for even `f`, `g` with
/// a minimum of `f` at zero, from `f₀, f₂, f₄` and `g₀, g₂` (derivatives at 0).
pub fn watson_expand(f_derivs: [f64; 3], g_derivs: [f64; 2], n: f64) -> f64 {
    let [f0, f2, f4] = f_derivs;
    let [g0, g2] = g_derivs;
    (2.0 * PI / f2).sqrt() * g0 * (-n * f0).exp() / n.sqrt() * (1.0 + watson_correction(f2, f4, g0, g2) / n)
}

fn watson_correction(f2: f64, f4: f64, g0: f64, g2: f64) -> f64 {
    -f4 / (8.0 * f2 * f2) + g2 / (2.0 * g0 * f2)
}

/// Leading small-`t` behaviour `α^{1/(1-α)} exp(αt/(α-1))` of `d/dt ln f_α(e^t)`.
pub fn g_asymptotic(t: f64, alpha: f64) -> f64 {
    alpha.powf(1.0 / (1.0 - alpha)) * (alpha * t / (alpha - 1.0)).exp()
}

/// Which representation produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Quadrature,
    Asymptotic,
}

/// A density evaluation with its accuracy metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    pub ln_value: f64,
    pub rel_error: f64,
    pub branch: Branch,
    /// False when quadrature missed the `1e-8` relative target.
    pub accurate: bool,
}

/// `g(t)` and `g'(t)` together with accuracy metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDerivative {
    pub g: f64,
    pub g_prime: f64,
    pub branch: Branch,
    /// False outside the validated range, where an asymptotic form is used.
    pub validated: bool,
}

#[derive(Clone, Copy, Debug)]
struct Moments {
    // I_k = ∫_{-π}^{π} U^k exp(-z (U - u0)) dφ, k = 1, 2, 3
    i: [f64; 3],
    rel_err: f64,
    branch: Branch,
}

/// Precomputed evaluator and sampler for `f_α`.
///
/// Immutable after construction; share it behind an `Arc` across threads.
#[derive(Clone, Debug)]
pub struct StableDensity {
    params: StableParams,
    u0: f64,
    u2: f64,
    u4: f64,
    // z(x) = zs · x^{-α/(1-α)}
    zs: f64,
    z_crossover: f64,
    ln_prefactor: f64,
    table: Option<Arc<LogDensityTable>>,
}

const MOMENT_REL_TOL: f64 = 1e-13;
const UNDERFLOW_EXPONENT: f64 = 800.0;

impl StableDensity {
    pub fn new(params: StableParams) -> Result<Self, StableError> {
        params.validate()?;
        let a = params.alpha;
        let (l0, l1, l2) = u_log_series(a);
        let u0 = l0.exp();
        let zs = a.powf(1.0 / (1.0 - a));
        let z_crossover = zs * params.small_x_crossover.powf(-a / (1.0 - a));
        Ok(Self {
            params,
            u0,
            u2: 2.0 * u0 * l1,
            u4: 24.0 * u0 * (l2 + 0.5 * l1 * l1),
            zs,
            z_crossover,
            ln_prefactor: ((1.0 - 1.0 / a) * a.ln()) - ((1.0 - a) * 2.0 * PI).ln(),
            table: None,
        })
    }

    /// Convenience constructor with default quadrature settings.
    pub fn with_alpha(alpha: f64) -> Result<Self, StableError> {
        Self::new(StableParams::new(alpha)?)
    }

    /// Attaches interpolation tables for `ln f_α(e^t)`, `g` and `g'`, used by
    /// the samplers and the Ward diagnostics.
    pub fn with_table(mut self) -> Self {
        let table = LogDensityTable::build(&self, -60.0, 30.0, 0.01);
        self.table = Some(Arc::new(table));
        self
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    /// `U_α(0)`, `U_α''(0)`, `U_α''''(0)`.
    pub fn u_derivatives(&self) -> [f64; 3] {
        [self.u0, self.u2, self.u4]
    }

    /// `z(x)` for `x > 0`.
    pub fn z_of_x(&self, x: f64) -> f64 {
        let a = self.params.alpha;
        self.zs * x.powf(-a / (1.0 - a))
    }

    fn z_of_t(&self, t: f64) -> f64 {
        let a = self.params.alpha;
        self.zs * (-a / (1.0 - a) * t).exp()
    }

    fn t_of_z(&self, z: f64) -> f64 {
        let a = self.params.alpha;
        -(1.0 - a) / a * (z / self.zs).ln()
    }

    fn moments(&self, z: f64) -> Moments {
        if z > self.z_crossover {
            self.moments_watson(z)
        } else {
            self.moments_quadrature(z)
        }
    }

    fn moments_watson(&self, z: f64) -> Moments {
        let base = (2.0 * PI / (self.u2 * z)).sqrt();
        let c4 = -self.u4 / (8.0 * self.u2 * self.u2);
        let mut i = [0.0; 3];
        for (k, slot) in i.iter_mut().enumerate() {
            let kf = (k + 1) as f64;
            *slot = base * self.u0.powi(k as i32 + 1) * (1.0 + (c4 + kf / (2.0 * self.u0)) / z);
        }
        Moments {
            i,
            rel_err: 1.0 / (z * z),
            branch: Branch::Asymptotic,
        }
    }

    fn moments_quadrature(&self, z: f64) -> Moments {
        let a = self.params.alpha;
        let u0 = self.u0;
        let tol = Tolerance::rel(MOMENT_REL_TOL).with_max_panels(self.params.quadrature_nodes);
        let kernel = |lu: f64| -> [f64; 3] {
            let u = lu.exp();
            let w = (-z * (u - u0)).exp();
            let uw = u * w;
            [uw, uw * u, uw * u * u]
        };
        // φ ∈ [0, π/2]
        let inner = quad::integrate_vec(|phi| kernel(ln_u(phi, PI - phi, a)), 0.0, 0.5 * PI, tol);
        // φ = π - e^{-v}: the integrand decays like exp(-z U) with U → ∞ at π
        let v_lo = (2.0 / PI).ln();
        let mut v_hi = v_lo + 1.0;
        while v_hi < 700.0 {
            let psi = (-v_hi).exp();
            let u = ln_u(PI - psi, psi, a).exp();
            if z * (u - u0) > UNDERFLOW_EXPONENT {
                break;
            }
            v_hi += 1.0;
        }
        let outer = quad::integrate_vec(
            |v| {
                let psi = (-v).exp();
                let mut k = kernel(ln_u(PI - psi, psi, a));
                for x in k.iter_mut() {
                    *x *= psi;
                }
                k
            },
            v_lo,
            v_hi,
            tol,
        );
        let mut i = [0.0; 3];
        let mut rel_err: f64 = 0.0;
        for k in 0..3 {
            i[k] = 2.0 * (inner[k].value + outer[k].value);
            let err = 2.0 * (inner[k].abs_error + outer[k].abs_error);
            rel_err = rel_err.max(err / i[k].abs());
        }
        Moments {
            i,
            rel_err,
            branch: Branch::Quadrature,
        }
    }

    fn ln_density_from_z(&self, z: f64) -> (f64, Moments) {
        let m = self.moments(z);
        let a = self.params.alpha;
        let ln = self.ln_prefactor + z.ln() / a - z * self.u0 + m.i[0].ln();
        (ln, m)
    }

    /// `f_α(x)` with accuracy metadata.
    pub fn density_detailed(&self, x: f64) -> Result<DensityValue, StableError> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(StableError::Domain { what: "x", value: x });
        }
        let (ln, m) = self.ln_density_from_z(self.z_of_x(x));
        Ok(DensityValue {
            value: ln.exp(),
            ln_value: ln,
            rel_error: m.rel_err,
            branch: m.branch,
            accurate: m.branch == Branch::Asymptotic || m.rel_err <= 1e-8,
        })
    }

    /// `f_α(x)`.
    pub fn density(&self, x: f64) -> Result<f64, StableError> {
        self.density_detailed(x).map(|d| d.value)
    }

    /// `ln f_α(x)`, finite even where `f_α(x)` underflows.
    pub fn ln_density(&self, x: f64) -> Result<f64, StableError> {
        self.density_detailed(x).map(|d| d.ln_value)
    }

    /// `ln f_α(e^t)` by direct evaluation.
    pub fn ln_density_at_log(&self, t: f64) -> f64 {
        self.ln_density_from_z(self.z_of_t(t)).0
    }

    /// Range of `t` where `g` is computed from the quadrature representation.
    pub fn g_validated_range(&self) -> (f64, f64) {
        (self.t_of_z(self.z_crossover), self.t_of_z(1e-200))
    }

    /// `g(t) = d/dt ln f_α(e^t)` and `g'(t)`, obtained by differentiating the
    /// integral representation under the integral sign.
    pub fn log_derivative_detailed(&self, t: f64) -> LogDerivative {
        let a = self.params.alpha;
        let (lo, hi) = self.g_validated_range();
        if t > hi {
            // f_α(x) ≍ x^{-α-1} for large x
            return LogDerivative {
                g: -a - 1.0,
                g_prime: 0.0,
                branch: Branch::Asymptotic,
                validated: false,
            };
        }
        let z = self.z_of_t(t);
        let m = self.moments(z);
        let r2 = m.i[1] / m.i[0];
        let r3 = m.i[2] / m.i[0];
        let k = a / (1.0 - a);
        let g = 1.0 / (a - 1.0) + k * z * r2;
        let g_prime = -k * k * z * (r2 - z * (r3 - r2 * r2));
        LogDerivative {
            g,
            g_prime,
            branch: m.branch,
            validated: t >= lo,
        }
    }

    /// `g(t) = d/dt ln f_α(e^t)`; uses the table when attached.
    pub fn log_derivative_g(&self, t: f64) -> f64 {
        if let Some(tab) = &self.table {
            if let Some(v) = tab.g(t) {
                return v;
            }
        }
        self.log_derivative_detailed(t).g
    }

    /// `d²/dt² ln f_α(e^t)`.
    pub fn log_second_derivative(&self, t: f64) -> f64 {
        if let Some(tab) = &self.table {
            if let Some(v) = tab.g_prime(t) {
                return v;
            }
        }
        self.log_derivative_detailed(t).g_prime
    }

    /// Centred finite-difference `g`, kept as a cross-check of the analytic route.
    pub fn log_derivative_g_fd(&self, t: f64, h: f64) -> f64 {
        (self.ln_density_at_log(t + h) - self.ln_density_at_log(t - h)) / (2.0 * h)
    }

    /// `ln f_α(e^t)`; uses the table when attached.
    pub fn ln_density_t(&self, t: f64) -> f64 {
        if let Some(tab) = &self.table {
            if let Some(v) = tab.ln_f(t) {
                return v;
            }
        }
        self.ln_density_at_log(t)
    }

    /// Least-squares fit of `g(t) ≈ C·g_asymptotic(t) + B` over `ts`; returns `C`.
    pub fn fit_asymptotic_constant(&self, ts: &[f64]) -> f64 {
        let a = self.params.alpha;
        let n = ts.len() as f64;
        let xs: Vec<f64> = ts.iter().map(|&t| g_asymptotic(t, a)).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| self.log_derivative_detailed(t).g).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    fn log_window(&self, lambda: f64) -> (f64, f64) {
        let a = self.params.alpha;
        // below s_lo the factor exp(-z u0) is below e^{-80}
        let s_lo = self.t_of_z(80.0 / self.u0);
        let s_hi = if lambda > 0.0 {
            (60.0 / lambda).ln()
        } else {
            // truncated mass e^{-α s}/Γ(1-α) below 1e-14
            (32.0 * core::f64::consts::LN_10 / 2.3) / a
        };
        (s_lo, s_hi.max(s_lo + 1.0))
    }

    /// `∫₀^∞ e^{-λx} f_α(x) dx`, integrated in `s = ln x`; should equal `exp(-λ^α)`.
    pub fn laplace_transform(&self, lambda: f64) -> Result<Estimate, StableError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(StableError::Domain {
                what: "lambda",
                value: lambda,
            });
        }
        let (s_lo, s_hi) = self.log_window(lambda);
        let e = quad::integrate(
            |s| (-lambda * s.exp() + s + self.ln_density_at_log(s)).exp(),
            s_lo,
            s_hi,
            Tolerance::rel(1e-11).with_max_panels(400),
        );
        if !e.converged {
            return Err(StableError::NotConverged {
                value: e.value,
                abs_error: e.abs_error,
            });
        }
        Ok(e)
    }

    /// `∫₀^∞ f_α(x) dx` with the analytic `x^{-α}/Γ(1-α)` tail beyond the window.
    pub fn total_mass(&self) -> Result<Estimate, StableError> {
        let a = self.params.alpha;
        let (s_lo, s_hi) = self.log_window(0.0);
        let e = quad::integrate(
            |s| (s + self.ln_density_at_log(s)).exp(),
            s_lo,
            s_hi,
            Tolerance::rel(1e-11).with_max_panels(400),
        );
        let tail = (-a * s_hi).exp() / libm::tgamma(1.0 - a);
        if !e.converged {
            return Err(StableError::NotConverged {
                value: e.value + tail,
                abs_error: e.abs_error,
            });
        }
        Ok(Estimate {
            value: e.value + tail,
            ..e
        })
    }

    /// `P(S ≤ x)` by integration of the density in log-space.
    pub fn cdf(&self, x: f64) -> Result<f64, StableError> {
        if !(x > 0.0) {
            return Err(StableError::Domain { what: "x", value: x });
        }
        let (s_lo, _) = self.log_window(0.0);
        let s = x.ln();
        if s <= s_lo {
            return Ok(0.0);
        }
        let e = quad::integrate(
            |s| (s + self.ln_density_at_log(s)).exp(),
            s_lo,
            s,
            Tolerance::rel(1e-11).with_max_panels(400),
        );
        Ok(e.value)
    }

    /// Normalised density of `t = ln κ` when `κ ∝ e^{-cκ} f_α(κ)`.
    pub fn tilted_ln_density_t(&self, t: f64, c: f64) -> f64 {
        -c * t.exp() + t + self.ln_density_t(t) + c.powf(self.params.alpha)
    }
}

/// Report from [`logconcavity_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct LogConcavityReport {
    /// Largest discrete second difference of `t ↦ ln f_α(e^t)`.
    pub max_second_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks discrete concavity of `t ↦ ln f_α(e^t)` on a strictly increasing grid.
///
/// For a non-uniform grid the second difference at `t_i` is
/// `(s_{i+1/2} - s_{i-1/2})·(h_{i-1} + h_i)/2` with `s` the chord slopes, which
/// is the usual `L_{i+1} - 2L_i + L_{i-1}` on uniform grids.
pub fn logconcavity_check(sd: &StableDensity, grid: &[f64]) -> Result<LogConcavityReport, StableError> {
    if grid.len() < 3 {
        return Err(StableError::InvalidParameter {
            name: "grid length",
            value: grid.len() as f64,
        });
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(StableError::InvalidParameter {
            name: "grid monotonicity",
            value: f64::NAN,
        });
    }
    let ln: Vec<f64> = grid.iter().map(|&t| sd.ln_density_at_log(t)).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..grid.len() - 1 {
        let h1 = grid[i] - grid[i - 1];
        let h2 = grid[i + 1] - grid[i];
        let d = ((ln[i + 1] - ln[i]) / h2 - (ln[i] - ln[i - 1]) / h1) * 0.5 * (h1 + h2);
        worst = worst.max(d);
    }
    let tolerance = 1e-8;
    Ok(LogConcavityReport {
        max_second_difference: worst,
        tolerance,
        pass: worst <= tolerance,
    })
}

/// One draw with Laplace transform `exp(-λ^α)` (Kanter's construction).
pub fn sample_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let w: f64 = Exp1.sample(rng);
    let zs_ln = alpha.ln() / (1.0 - alpha);
    ((1.0 - alpha) / alpha * (zs_ln + ln_u(u, PI - u, alpha) - w.ln())).exp()
}

/// How a tilted draw was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiltedRoute {
    /// Stable proposals accepted with probability `e^{-cS}`.
    Rejection { proposals: u32 },
    /// Exact rejection for the log-concave law of `t = ln κ`.
    LogConcave { proposals: u32 },
}

/// Expected acceptance rate `e^{-c^α}` of the stable-proposal route.
pub fn tilted_acceptance_rate(alpha: f64, c: f64) -> f64 {
    (-c.powf(alpha)).exp()
}

/// One draw of `κ` with density `∝ e^{-cκ} f_α(κ)`, `c ≥ 0`.
pub fn sample_tilted_stable<R: Rng + ?Sized>(rng: &mut R, sd: &StableDensity, c: f64) -> f64 {
    sample_tilted_stable_detailed(rng, sd, c).0
}

/// As [`sample_tilted_stable`], also reporting the route and proposal count.
///
/// When the stable-proposal acceptance rate `e^{-c^α}` drops below
/// [`TILTED_ACCEPTANCE_FLOOR`] the draw switches to exact rejection from the
/// envelope `min(1, e^{1-|y|})` of the standardised log-concave density of
/// `t = ln κ` (acceptance 1/4); that route needs the normalising constant,
/// which is `e^{-c^α}` by the Laplace identity.
pub fn sample_tilted_stable_detailed<R: Rng + ?Sized>(rng: &mut R, sd: &StableDensity, c: f64) -> (f64, TiltedRoute) {
    let alpha = sd.alpha();
    assert!(c >= 0.0 && c.is_finite(), "tilt c = {c} must be finite and non-negative");
    if tilted_acceptance_rate(alpha, c) >= TILTED_ACCEPTANCE_FLOOR {
        let mut proposals = 0u32;
        loop {
            proposals += 1;
            let s = sample_stable(rng, alpha);
            let v: f64 = rng.sample(Open01);
            if v.ln() <= -c * s {
                return (s, TiltedRoute::Rejection { proposals });
            }
        }
    }
    let mode = tilted_mode(sd, c);
    let ln_m = sd.tilted_ln_density_t(mode, c);
    let m = ln_m.exp();
    let mut proposals = 0u32;
    loop {
        proposals += 1;
        let pick: f64 = rng.random();
        let y = if pick < 0.5 {
            2.0 * rng.random::<f64>() - 1.0
        } else {
            let e: f64 = Exp1.sample(rng);
            if rng.random::<bool>() {
                1.0 + e
            } else {
                -1.0 - e
            }
        };
        let ln_env = if y.abs() <= 1.0 { 0.0 } else { 1.0 - y.abs() };
        let u: f64 = rng.sample(Open01);
        let t = mode + y / m;
        if u.ln() + ln_env <= sd.tilted_ln_density_t(t, c) - ln_m {
            return (t.exp(), TiltedRoute::LogConcave { proposals });
        }
    }
}

/// Mode of `t ↦ -c e^t + t + ln f_α(e^t)`, the root of `1 + g(t) = c e^t`.
pub fn tilted_mode(sd: &StableDensity, c: f64) -> f64 {
    let slope = |t: f64| 1.0 + sd.log_derivative_g(t) - c * t.exp();
    let a = sd.alpha();
    let mut t0 = if c > 0.0 {
        (1.0 - a) * (a.ln() / (1.0 - a) - c.ln())
    } else {
        0.0
    };
    if !t0.is_finite() {
        t0 = 0.0;
    }
    let (mut lo, mut hi) = (t0 - 1.0, t0 + 1.0);
    while slope(lo) <= 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while slope(hi) >= 0.0 {
        hi += 2.0 * (hi - lo);
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let s = slope(t);
        if s > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = sd.log_second_derivative(t) - c * t.exp();
        let mut next = t - s / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() < 1e-13 * (1.0 + t.abs()) || hi - lo < 1e-13 {
            return next;
        }
        t = next;
    }
    t
}

/// Cubic-Hermite tables of `ln f_α(e^t)` (slopes `g`) and `g` (slopes `g'`)
/// on a uniform `t` grid.
#[derive(Clone, Debug)]
pub struct LogDensityTable {
    t0: f64,
    h: f64,
    ln_f: Vec<f64>,
    g: Vec<f64>,
    g_prime: Vec<f64>,
}

impl LogDensityTable {
    pub fn build(sd: &StableDensity, t_lo: f64, t_hi: f64, h: f64) -> Self {
        let n = ((t_hi - t_lo) / h).round() as usize + 1;
        let mut ln_f = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut g_prime = Vec::with_capacity(n);
        let a = sd.alpha();
        let k = a / (1.0 - a);
        for i in 0..n {
            let t = t_lo + i as f64 * h;
            let z = sd.z_of_t(t);
            let m = sd.moments(z);
            let r2 = m.i[1] / m.i[0];
            let r3 = m.i[2] / m.i[0];
            ln_f.push(sd.ln_prefactor + z.ln() / a - z * sd.u0 + m.i[0].ln());
            g.push(1.0 / (a - 1.0) + k * z * r2);
            g_prime.push(-k * k * z * (r2 - z * (r3 - r2 * r2)));
        }
        Self {
            t0: t_lo,
            h,
            ln_f,
            g,
            g_prime,
        }
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let x = (t - self.t0) / self.h;
        if !(x >= 0.0) {
            return None;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.ln_f.len() {
            return None;
        }
        Some((i, x - i as f64))
    }

    fn hermite(&self, v: &[f64], d: &[f64], i: usize, s: f64) -> f64 {
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * v[i] + h10 * self.h * d[i] + h01 * v[i + 1] + h11 * self.h * d[i + 1]
    }

    pub fn ln_f(&self, t: f64) -> Option<f64> {
        self.locate(t).map(|(i, s)| self.hermite(&self.ln_f, &self.g, i, s))
    }

    pub fn g(&self, t: f64) -> Option<f64> {
        self.locate(t).map(|(i, s)| self.hermite(&self.g, &self.g_prime, i, s))
    }

    pub fn g_prime(&self, t: f64) -> Option<f64> {
        // derivative of the cubic Hermite interpolant of g
        self.locate(t).map(|(i, s)| {
            let s2 = s * s;
            let d00 = 6.0 * s2 - 6.0 * s;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d01 = -6.0 * s2 + 6.0 * s;
            let d11 = 3.0 * s2 - 2.0 * s;
            (d00 * self.g[i] + d01 * self.g[i + 1]) / self.h + d10 * self.g_prime[i] + d11 * self.g_prime[i + 1]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn levy(x: f64) -> f64 {
        x.powf(-1.5) * (-0.25 / x).exp() / (2.0 * PI.sqrt())
    }

    #[test]
    fn rejects_alpha_above_half() {
        assert_eq!(StableParams::new(0.7), Err(StableError::InvalidAlpha(0.7)));
        assert!(StableParams::new(0.0).is_err());
        assert!(StableParams::new(0.5).is_ok());
    }

    #[test]
    fn zolotarev_u_domain_and_evenness() {
        assert!(zolotarev_u(PI, 0.3).is_err());
        assert!(zolotarev_u(-3.5, 0.3).is_err());
        for &phi in &[0.1, 0.7, 2.0, 3.1] {
            let a = zolotarev_u(phi, 0.3).unwrap();
            let b = zolotarev_u(-phi, 0.3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zolotarev_u_at_half_is_sec_squared() {
        for &phi in &[1e-6, 0.3, 1.0, 2.5, 3.0] {
            let v = zolotarev_u(phi, 0.5).unwrap();
            let exact = 1.0 / (0.5 * phi).cos().powi(2);
            assert!((v / exact - 1.0).abs() < 1e-13, "{phi}: {v} vs {exact}");
        }
    }

    #[test]
    fn zolotarev_u_continuous_at_zero() {
        for &a in &[0.2, 0.3, 0.45] {
            // Richardson extrapolation of U(h) = U(0) + c h² to h = 0
            let h = 1e-3;
            let extrapolated = (4.0 * zolotarev_u(h / 2.0, a).unwrap() - zolotarev_u(h, a).unwrap()) / 3.0;
            let near_zero = zolotarev_u(1e-8, a).unwrap();
            assert!((near_zero - extrapolated).abs() < 1e-6);
            assert!((near_zero - (1.0 - a) / a).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matches_levy() {
        let sd = StableDensity::with_alpha(0.5).unwrap();
        assert!((sd.density(1.0).unwrap() - (-0.25f64).exp() / (2.0 * PI.sqrt())).abs() < 1e-12);
        for &x in &[0.05, 0.3, 2.0, 17.0, 50.0] {
            let rel = sd.density(x).unwrap() / levy(x) - 1.0;
            assert!(rel.abs() < 1e-10, "x = {x}: rel {rel}");
        }
    }

    #[test]
    fn density_domain_error() {
        let sd = StableDensity::with_alpha(0.3).unwrap();
        assert!(sd.density(0.0).is_err());
        assert!(sd.density(-1.0).is_err());
    }

    #[test]
    fn unit_lambda_transform() {
        for &a in &[0.2, 0.35, 0.5] {
            let sd = StableDensity::with_alpha(a).unwrap();
            let v = sd.laplace_transform(1.0).unwrap().value;
            assert!((v / (-1.0f64).exp() - 1.0).abs() < 1e-8, "alpha {a}: {v}");
        }
    }

    #[test]
    fn total_mass_is_one() {
        for &a in &[0.2, 0.3, 0.5] {
            let sd = StableDensity::with_alpha(a).unwrap();
            let m = sd.total_mass().unwrap().value;
            assert!((m - 1.0).abs() < 1e-6, "alpha {a}: {m}");
        }
    }

    #[test]
    fn heavy_tail_order() {
        let sd = StableDensity::with_alpha(0.3).unwrap();
        let vals: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&x: &f64| x.powf(1.3) * sd.density(x).unwrap()).collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min > 0.0 && (max - min) / max < 0.5, "{vals:?}");
    }

    #[test]
    fn watson_gaussian_case() {
        let v = watson_expand([0.0, 2.0, 0.0], [1.0, 0.0], 100.0);
        assert!((v - PI.sqrt() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn watson_branch_matches_quadrature_at_crossover() {
        for &a in &[0.2, 0.3, 0.5] {
            let sd = StableDensity::with_alpha(a).unwrap();
            let z = sd.z_crossover;
            let w = sd.moments_watson(z).i[0];
            let q = sd.moments_quadrature(z).i[0];
            assert!((w / q - 1.0).abs() < 0.05, "alpha {a}: {w} vs {q}");
        }
    }

    #[test]
    fn g_asymptotic_values() {
        let v = g_asymptotic(-10.0, 0.5);
        assert!((v - 0.25 * 10f64.exp()).abs() < 1e-9 * v);
        assert!(g_asymptotic(-200.0, 0.3) > g_asymptotic(-100.0, 0.3));
    }

    #[test]
    fn g_analytic_matches_finite_differences() {
        let sd = StableDensity::with_alpha(0.3).unwrap();
        let mut t = -3.0;
        while t <= 3.0 {
            let a = sd.log_derivative_detailed(t).g;
            let fd = sd.log_derivative_g_fd(t, 1e-4);
            assert!((a - fd).abs() < 1e-4, "t {t}: {a} vs {fd}");
            t += 0.5;
        }
    }

    #[test]
    fn g_decreasing_and_bounded_below() {
        let sd = StableDensity::with_alpha(0.4).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=60 {
            let t = -10.0 + 0.5 * i as f64;
            let g = sd.log_derivative_detailed(t).g;
            assert!(g <= prev + 1e-12);
            assert!(g >= -1.4 - 1e-9);
            prev = g;
        }
    }

    #[test]
    fn g_asymptotic_ratio_at_minus_twenty() {
        let sd = StableDensity::with_alpha(0.4).unwrap();
        let r = g_asymptotic(-20.0, 0.4) / sd.log_derivative_detailed(-20.0).g;
        assert!((0.5..=2.0).contains(&r), "{r}");
    }

    #[test]
    fn fitted_asymptotic_constant_is_one() {
        let sd = StableDensity::with_alpha(0.3).unwrap();
        let ts: Vec<f64> = (0..20).map(|i| -40.0 + i as f64).collect();
        let c = sd.fit_asymptotic_constant(&ts);
        assert!((c - 1.0).abs() < 1e-3, "{c}");
    }

    #[test]
    fn logconcavity_verdicts() {
        let grid: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
        for &a in &[0.3, 0.5] {
            let sd = StableDensity::with_alpha(a).unwrap();
            let r = logconcavity_check(&sd, &grid).unwrap();
            assert!(r.pass, "alpha {a}: {r:?}");
            let shifted: Vec<f64> = grid.iter().map(|t| t + 0.37).collect();
            assert_eq!(logconcavity_check(&sd, &shifted).unwrap().pass, r.pass);
        }
        let sd = StableDensity::with_alpha(0.3).unwrap();
        assert!(logconcavity_check(&sd, &[0.0, 1.0]).is_err());
        assert!(logconcavity_check(&sd, &[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn table_agrees_with_direct_evaluation() {
        let sd = StableDensity::with_alpha(0.3).unwrap().with_table();
        for &t in &[-12.345, -3.21, 0.005, 2.5, 7.77] {
            let d = sd.log_derivative_detailed(t);
            assert!((sd.log_derivative_g(t) - d.g).abs() < 1e-8 * (1.0 + d.g.abs()));
            assert!((sd.ln_density_t(t) - sd.ln_density_at_log(t)).abs() < 1e-9 * (1.0 + d.g.abs()));
            assert!((sd.log_second_derivative(t) - d.g_prime).abs() < 1e-5 * (1.0 + d.g_prime.abs()));
        }
    }

    #[test]
    fn tilted_mode_solves_stationarity() {
        let sd = StableDensity::with_alpha(0.3).unwrap().with_table();
        for &c in &[1.0, 50.0, 1e4] {
            let m = tilted_mode(&sd, c);
            let s = 1.0 + sd.log_derivative_g(m) - c * m.exp();
            assert!(s.abs() < 1e-8, "c {c}: slope {s}");
        }
    }

    #[test]
    fn large_tilt_uses_log_concave_route() {
        let sd = StableDensity::with_alpha(0.3).unwrap().with_table();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, route) = sample_tilted_stable_detailed(&mut rng, &sd, 1e4);
        assert!(k > 0.0);
        assert!(matches!(route, TiltedRoute::LogConcave { .. }));
        let (_, route) = sample_tilted_stable_detailed(&mut rng, &sd, 1.0);
        assert!(matches!(route, TiltedRoute::Rejection { .. }));
    }

    #[test]
    fn stable_draw_unit_laplace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = (-sample_stable(&mut rng, 0.3)).exp();
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - (-1.0f64).exp()).abs() < 3.0 * se, "{mean} ± {se}");
    }
}
