//! Blocked Gibbs sampler for the extended torus measure
//!
//! ```text
//! exp(-Σ_{jk} (1 + β(φ_j-φ_k)²) e^{t_jk} - ε Σ_j φ_j²) Π_{jk} f_α(e^{t_jk}) e^{t_jk} dt dφ
//! ```
//!
//! whose `φ`-marginal is `Π V(φ_j-φ_k) e^{-εφ²}` with `V(x) = e^{-(1+βx²)^α}`
//! (the Laplace identity of `f_α`). Given `t`, `φ` is the centred Gaussian with
//! density `∝ exp(-[φ; Dφ])`, weights `β e^t`, so `Cov = (2D)⁻¹`. Given `φ`,
//! the `κ = e^t` are independent with densities `∝ e^{-cκ} f_α(κ)`,
//! `c = 1 + β(φ_j-φ_k)²`.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::lattice::{EdgeWeightedOperator, LatticeError, SolverOptions, TestVector, TorusLattice};
use crate::linalg::{BandedCholesky, FoldedOrdering, LinalgError};
use crate::rng::{self, Stream, StreamState};
use crate::stable::{sample_tilted_stable, StableDensity, StableError};
use crate::stats::{batch_means, TraceSummary};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid model parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("the phi update needs epsilon > 0: the massless torus measure is not normalisable")]
    MasslessUpdate,
    #[error("state arrays do not match the lattice: {0}")]
    Shape(&'static str),
    #[error("non-finite value in {what} at sweep {sweep}")]
    NonFinite {
        what: &'static str,
        sweep: u64,
        state: Box<FieldState>,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Stable(#[from] StableError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub lattice: TorusLattice,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, lattice: TorusLattice) -> Result<Self, SamplerError> {
        let p = Self {
            alpha,
            beta,
            epsilon,
            lattice,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(SamplerError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "must lie in (0, 1/2] for f_alpha(e^t) to be log-concave",
            });
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SamplerError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must be positive",
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SamplerError::InvalidParameter {
                name: "epsilon",
                value: self.epsilon,
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    /// `V(x) = (1 + βx²)^α`.
    pub fn potential(&self, x: f64) -> f64 {
        (1.0 + self.beta * x * x).powf(self.alpha)
    }

    /// `H(φ) = Σ_{jk} V(φ_j - φ_k) + ε Σ φ_j²`, the exponent of the `φ`-marginal.
    pub fn hamiltonian(&self, phi: &[f64]) -> f64 {
        let lat = &self.lattice;
        let mut h = self.epsilon * phi.iter().map(|x| x * x).sum::<f64>();
        for e in 0..lat.num_edges() {
            let (j, k, _) = lat.edge_endpoints(e);
            h += self.potential(phi[j] - phi[k]);
        }
        h
    }
}

/// Joint configuration `(φ, t)` with its random stream.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub phi: Vec<f64>,
    pub t: Vec<f64>,
    pub params: ModelParams,
    pub rng: Stream,
    pub sweep_count: u64,
}

impl FieldState {
    /// `φ ≡ 0`, `t ≡ 0`, stream 0 of `seed`.
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self::with_stream(params, seed, 0)
    }

    /// Like [`FieldState::new`] on stream `stream` of `seed`, for independent
    /// chains sharing one seed.
    pub fn with_stream(params: ModelParams, seed: u64, stream: u64) -> Self {
        let lat = params.lattice;
        Self {
            phi: vec![0.0; lat.num_vertices()],
            t: vec![0.0; lat.num_edges()],
            params,
            rng: rng::substream(seed, stream),
            sweep_count: 0,
        }
    }

    pub fn from_parts(
        params: ModelParams,
        phi: Vec<f64>,
        t: Vec<f64>,
        rng_state: StreamState,
        sweep_count: u64,
    ) -> Result<Self, SamplerError> {
        params.validate()?;
        let lat = params.lattice;
        if phi.len() != lat.num_vertices() {
            return Err(SamplerError::Shape("phi length"));
        }
        if t.len() != lat.num_edges() {
            return Err(SamplerError::Shape("t length"));
        }
        if phi.iter().chain(&t).any(|x| !x.is_finite()) {
            return Err(SamplerError::Shape("non-finite entries"));
        }
        Ok(Self {
            phi,
            t,
            params,
            rng: rng_state.restore(),
            sweep_count,
        })
    }

    pub fn rng_state(&self) -> StreamState {
        StreamState::capture(&self.rng)
    }

    /// `φ_j - φ_k` across edge `e`.
    pub fn gradient(&self, e: usize) -> f64 {
        let (j, k, _) = self.params.lattice.edge_endpoints(e);
        self.phi[j] - self.phi[k]
    }

    /// Conductances `ω_e = 2β e^{t_e}` of the associated random walk.
    pub fn conductances(&self) -> Vec<f64> {
        self.t.iter().map(|t| 2.0 * self.params.beta * t.exp()).collect()
    }
}

/// How the Gaussian `φ` update is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiMethod {
    /// Banded Cholesky of `2D` in a folded vertex ordering.
    Banded,
    /// Perturbation sampling: solve `2D x = b` with `Cov(b) = 2D`.
    ConjugateGradient,
}

/// Largest `n·b²` for which the banded factorisation is used by default.
pub const BANDED_WORK_LIMIT: f64 = 5e7;

/// Systematic-scan Gibbs sampler: all `t`, then all `φ`.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    params: ModelParams,
    stable: Arc<StableDensity>,
    method: PhiMethod,
    ordering: Option<FoldedOrdering>,
    cg_tol: f64,
}

impl GibbsSampler {
    pub fn new(params: ModelParams) -> Result<Self, SamplerError> {
        params.validate()?;
        let sd = StableDensity::with_alpha(params.alpha)?.with_table();
        Ok(Self::with_stable(params, Arc::new(sd)))
    }

    /// Reuses a density, normally one built with [`StableDensity::with_table`]
    /// (without the table every `t` update integrates the density directly).
    /// Its `α` must match `params`.
    pub fn with_stable(params: ModelParams, stable: Arc<StableDensity>) -> Self {
        assert_eq!(stable.alpha(), params.alpha, "stable density built for a different alpha");
        let lat = params.lattice;
        let ord = FoldedOrdering::new(&lat);
        let work = lat.num_vertices() as f64 * (ord.bandwidth as f64).powi(2);
        let method = if work <= BANDED_WORK_LIMIT {
            PhiMethod::Banded
        } else {
            PhiMethod::ConjugateGradient
        };
        Self {
            params,
            stable,
            method,
            ordering: Some(ord),
            cg_tol: 1e-10,
        }
    }

    pub fn with_method(mut self, method: PhiMethod) -> Self {
        self.method = method;
        self
    }

    pub fn method(&self) -> PhiMethod {
        self.method
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn stable(&self) -> &Arc<StableDensity> {
        &self.stable
    }

    fn check_state(&self, state: &FieldState) -> Result<(), SamplerError> {
        if state.params != self.params {
            return Err(SamplerError::Shape("state parameters differ from the sampler's"));
        }
        Ok(())
    }

    /// Exact draw of `φ` given `t`.
    pub fn update_phi(&self, state: &mut FieldState) -> Result<(), SamplerError> {
        self.check_state(state)?;
        let p = &self.params;
        if p.epsilon <= 0.0 {
            return Err(SamplerError::MasslessUpdate);
        }
        let lat = p.lattice;
        match self.method {
            PhiMethod::Banded => {
                let ord = self.ordering.as_ref().expect("ordering built at construction");
                let n = lat.num_vertices();
                let b = ord.bandwidth;
                let w = b + 1;
                let mut band = vec![0.0; n * w];
                for v in 0..n {
                    band[ord.position[v] * w + b] = 2.0 * p.epsilon;
                }
                for e in 0..lat.num_edges() {
                    let (j, k, _) = lat.edge_endpoints(e);
                    let c = 2.0 * p.beta * state.t[e].exp();
                    let (pj, pk) = (ord.position[j], ord.position[k]);
                    band[pj * w + b] += c;
                    band[pk * w + b] += c;
                    let (hi, lo) = if pj > pk { (pj, pk) } else { (pk, pj) };
                    band[hi * w + (lo + b - hi)] -= c;
                }
                let chol = BandedCholesky::factor(n, b, band)?;
                let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut state.rng)).collect();
                chol.solve_upper(&mut x);
                for v in 0..n {
                    state.phi[v] = x[ord.position[v]];
                }
            }
            PhiMethod::ConjugateGradient => {
                let op = EdgeWeightedOperator::from_t(lat, &state.t, p.beta, p.epsilon)?;
                let n = lat.num_vertices();
                let mut rhs = vec![0.0; n];
                for (e, &w) in op.weights().iter().enumerate() {
                    let (j, k, _) = lat.edge_endpoints(e);
                    let xi: f64 = StandardNormal.sample(&mut state.rng);
                    let s = (2.0 * w).sqrt() * xi;
                    rhs[j] += s;
                    rhs[k] -= s;
                }
                let m = (2.0 * p.epsilon).sqrt();
                for r in rhs.iter_mut() {
                    let xi: f64 = StandardNormal.sample(&mut state.rng);
                    *r = 0.5 * (*r + m * xi);
                }
                let sol = op.solve(&TestVector::new(rhs), SolverOptions::with_tol(self.cg_tol))?;
                state.phi = sol.values;
            }
        }
        Ok(())
    }

    /// Independent tilted-stable draws of every `t_e` given `φ`.
    pub fn update_t(&self, state: &mut FieldState) -> Result<(), SamplerError> {
        self.check_state(state)?;
        let beta = self.params.beta;
        for e in 0..state.t.len() {
            let g = state.gradient(e);
            let c = 1.0 + beta * g * g;
            state.t[e] = sample_tilted_stable(&mut state.rng, &self.stable, c).ln();
        }
        Ok(())
    }

    pub fn sweep(&self, state: &mut FieldState) -> Result<(), SamplerError> {
        self.update_t(state)?;
        self.update_phi(state)?;
        state.sweep_count += 1;
        Ok(())
    }

    /// Runs `n_burn` sweeps, then records the observables after every
    /// `thin`-th sweep until `n_keep` samples are collected.
    pub fn run(&self, state: &mut FieldState, spec: &RunSpec, observables: &[Observable]) -> Result<ChainOutput, SamplerError> {
        assert!(spec.n_keep >= 1 && spec.thin >= 1, "n_keep and thin must be positive");
        for _ in 0..spec.n_burn {
            self.sweep(state)?;
        }
        let mut traces: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(spec.n_keep)).collect();
        for _ in 0..spec.n_keep {
            for _ in 0..spec.thin {
                self.sweep(state)?;
            }
            for (o, trace) in observables.iter().zip(traces.iter_mut()) {
                let x = o.evaluate(state, &self.stable);
                if !x.is_finite() {
                    return Err(SamplerError::NonFinite {
                        what: "observable",
                        sweep: state.sweep_count,
                        state: Box::new(state.clone()),
                    });
                }
                trace.push(x);
            }
        }
        let summaries = traces.iter().map(|t| batch_means(t)).collect();
        Ok(ChainOutput {
            summaries,
            traces: if spec.keep_traces { Some(traces) } else { None },
            sweeps: state.sweep_count,
        })
    }
}

/// Chain length settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub keep_traces: bool,
}

impl RunSpec {
    pub fn new(n_burn: usize, n_keep: usize, thin: usize) -> Self {
        Self {
            n_burn,
            n_keep,
            thin,
            keep_traces: false,
        }
    }

    pub fn with_traces(mut self) -> Self {
        self.keep_traces = true;
        self
    }
}

/// Which edges an edge observable refers to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Edges {
    One(usize),
    /// Average over all edges of the torus.
    Mean,
}

/// Scalar functions of the state recorded by [`GibbsSampler::run`].
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `φ_v^power`.
    Phi { vertex: usize, power: i32 },
    /// `(φ_v - φ̄)²`, the field with its zero mode removed.
    CenteredPhiSquared { vertex: usize },
    /// `(φ_j - φ_k)^power`.
    Gradient { edges: Edges, power: i32 },
    /// `t_e^power`.
    T { edges: Edges, power: i32 },
    /// `e^{λ t_e}`.
    ExpT { edges: Edges, lambda: f64 },
    /// `g(t_e) = d/dt ln f_α(e^t)` at `t_e`.
    LogDerivativeG { edges: Edges },
    /// `e^{t_e}(1 + s·β(φ_j-φ_k)²)`.
    WardTerm { edges: Edges, gradient_factor: f64 },
    /// `g(t_e) - e^{t_e}(1 + s·β(φ_j-φ_k)²) + 1`, a Ward residual sample.
    WardResidual { edges: Edges, gradient_factor: f64 },
    /// `(v·φ)^power`.
    Linear { v: Vec<f64>, power: i32 },
}

impl Observable {
    pub fn evaluate(&self, state: &FieldState, stable: &StableDensity) -> f64 {
        let per_edge = |edges: &Edges, f: &dyn Fn(usize) -> f64| match *edges {
            Edges::One(e) => f(e),
            Edges::Mean => (0..state.t.len()).map(f).sum::<f64>() / state.t.len() as f64,
        };
        match self {
            Observable::Phi { vertex, power } => state.phi[*vertex].powi(*power),
            Observable::CenteredPhiSquared { vertex } => {
                let mean = state.phi.iter().sum::<f64>() / state.phi.len() as f64;
                (state.phi[*vertex] - mean).powi(2)
            }
            Observable::Gradient { edges, power } => per_edge(edges, &|e| state.gradient(e).powi(*power)),
            Observable::T { edges, power } => per_edge(edges, &|e| state.t[e].powi(*power)),
            Observable::ExpT { edges, lambda } => per_edge(edges, &|e| (lambda * state.t[e]).exp()),
            Observable::LogDerivativeG { edges } => per_edge(edges, &|e| stable.log_derivative_g(state.t[e])),
            Observable::WardTerm { edges, gradient_factor } => per_edge(edges, &|e| {
                let g = state.gradient(e);
                state.t[e].exp() * (1.0 + gradient_factor * state.params.beta * g * g)
            }),
            Observable::WardResidual { edges, gradient_factor } => per_edge(edges, &|e| {
                let g = state.gradient(e);
                stable.log_derivative_g(state.t[e]) - state.t[e].exp() * (1.0 + gradient_factor * state.params.beta * g * g) + 1.0
            }),
            Observable::Linear { v, power } => {
                let s: f64 = v.iter().zip(&state.phi).map(|(a, b)| a * b).sum();
                s.powi(*power)
            }
        }
    }
}

/// Summaries (and optionally traces) of a run, in observable order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub summaries: Vec<TraceSummary>,
    pub traces: Option<Vec<Vec<f64>>>,
    pub sweeps: u64,
}

/// Builds a sampler and a fresh state from `seed`, then runs it.
pub fn run_chain(params: ModelParams, seed: u64, spec: &RunSpec, observables: &[Observable]) -> Result<ChainOutput, SamplerError> {
    let sampler = GibbsSampler::new(params)?;
    let mut state = FieldState::new(params, seed);
    sampler.run(&mut state, spec, observables)
}
