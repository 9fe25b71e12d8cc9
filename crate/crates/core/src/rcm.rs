//! Variable-speed random walks among conductances `ω` on the torus, followed on
//! the universal cover, and their heat kernels.
//!
//! At `x` the walk waits an exponential time of rate `u(x) = Σ_{y∼x} ω_{xy}`
//! and then jumps to `y` with probability `ω_{xy}/u(x)`, i.e. its generator is
//! `Lf(x) = Σ_y ω_{xy}(f(y) - f(x))`. The counting measure is reversible.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::diagnostics::{DiagnosticReport, Verdict};
use crate::lattice::{EdgeWeightedOperator, LatticeError, SolverOptions, TestVector, TorusLattice};
use crate::linalg::DenseMatrix;
use crate::rng;
use crate::stats::{linear_fit, RunningStats};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RcmError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("dense heat kernel limited to {limit} vertices, lattice has {vertices}")]
    TooLarge { vertices: usize, limit: usize },
    #[error("time {0} must be finite and non-negative")]
    InvalidTime(f64),
}

/// Largest lattice for the dense matrix-exponential heat kernel.
pub const DENSE_LIMIT: usize = 512;

/// Conductances on the torus with the vertex measures `u(x) = Σ ω` and `v(x) = Σ 1/ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    lattice: TorusLattice,
    omega: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Environment {
    pub fn new(lattice: TorusLattice, omega: Vec<f64>) -> Result<Self, RcmError> {
        // validates length and positivity
        EdgeWeightedOperator::generator(lattice, &omega)?;
        let mut u = vec![0.0; lattice.num_vertices()];
        let mut v = vec![0.0; lattice.num_vertices()];
        for (e, &w) in omega.iter().enumerate() {
            let (j, k, _) = lattice.edge_endpoints(e);
            u[j] += w;
            u[k] += w;
            v[j] += 1.0 / w;
            v[k] += 1.0 / w;
        }
        Ok(Self { lattice, omega, u, v })
    }

    pub fn constant(lattice: TorusLattice, w: f64) -> Result<Self, RcmError> {
        Self::new(lattice, vec![w; lattice.num_edges()])
    }

    /// `ω_e = 2β e^{t_e}`.
    pub fn from_t(lattice: TorusLattice, t: &[f64], beta: f64) -> Result<Self, RcmError> {
        Self::new(lattice, t.iter().map(|t| 2.0 * beta * t.exp()).collect())
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn u_measure(&self) -> &[f64] {
        &self.u
    }

    pub fn v_measure(&self) -> &[f64] {
        &self.v
    }

    fn jump<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> (usize, usize, bool) {
        let lat = &self.lattice;
        let target = rng.random::<f64>() * self.u[x];
        let mut acc = 0.0;
        let mut last = (x, 0, true);
        for a in 0..lat.dim() {
            let fwd = lat.neighbor(x, a, true);
            let back = lat.neighbor(x, a, false);
            acc += self.omega[lat.edge(x, a)];
            if target < acc {
                return (fwd, a, true);
            }
            acc += self.omega[lat.edge(back, a)];
            if target < acc {
                return (back, a, false);
            }
            last = (back, a, false);
        }
        last
    }
}

/// A trajectory on the universal cover.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkPath {
    pub start: usize,
    /// Jump times, strictly increasing and `≤ horizon`.
    pub times: Vec<f64>,
    /// Unwrapped positions after each jump, `dim` integers per entry; the
    /// first entry is the origin at time 0.
    pub positions: Vec<i64>,
    pub horizon: f64,
    pub dim: usize,
}

impl WalkPath {
    pub fn jumps(&self) -> usize {
        self.times.len()
    }

    /// Unwrapped displacement at the horizon.
    pub fn end(&self) -> &[i64] {
        &self.positions[self.positions.len() - self.dim..]
    }
}

/// Simulates the walk from `x0` up to time `horizon`, keeping the whole path.
pub fn simulate_vsrw<R: Rng + ?Sized>(env: &Environment, x0: usize, horizon: f64, rng: &mut R) -> WalkPath {
    let d = env.lattice.dim();
    let mut positions = vec![0i64; d];
    let mut pos = vec![0i64; d];
    let mut times = Vec::new();
    let mut x = x0;
    let mut time = 0.0;
    loop {
        let hold: f64 = Exp1.sample(rng);
        time += hold / env.u[x];
        if time > horizon {
            break;
        }
        let (y, a, fwd) = env.jump(x, rng);
        pos[a] += if fwd { 1 } else { -1 };
        x = y;
        times.push(time);
        positions.extend_from_slice(&pos);
    }
    WalkPath {
        start: x0,
        times,
        positions,
        horizon,
        dim: d,
    }
}

/// Where one walker is at each of a sorted list of times.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkSnapshots {
    /// Torus vertex at each time.
    pub vertices: Vec<usize>,
    /// Unwrapped displacement at each time, `dim` integers per time.
    pub displacements: Vec<i64>,
    /// Whether `|X_a(s)| ≥ N/2` for some axis and some `s` up to each time.
    pub wrapped: Vec<bool>,
    pub jumps: u64,
}

/// Runs one walker from `x0`, recording it at the increasing `times`.
pub fn walk_snapshots<R: Rng + ?Sized>(env: &Environment, x0: usize, times: &[f64], rng: &mut R) -> WalkSnapshots {
    let lat = &env.lattice;
    let d = lat.dim();
    let half = (lat.side() / 2) as i64;
    let mut pos = vec![0i64; d];
    let mut out = WalkSnapshots {
        vertices: Vec::with_capacity(times.len()),
        displacements: Vec::with_capacity(times.len() * d),
        wrapped: Vec::with_capacity(times.len()),
        jumps: 0,
    };
    let mut x = x0;
    let mut wrapped = false;
    let hold: f64 = Exp1.sample(rng);
    let mut next = hold / env.u[x];
    for &t in times {
        while next <= t {
            let (y, a, fwd) = env.jump(x, rng);
            pos[a] += if fwd { 1 } else { -1 };
            wrapped |= pos[a].abs() >= half;
            x = y;
            out.jumps += 1;
            let hold: f64 = Exp1.sample(rng);
            next += hold / env.u[x];
        }
        out.vertices.push(x);
        out.displacements.extend_from_slice(&pos);
        out.wrapped.push(wrapped);
    }
    out
}

/// Monte Carlo heat kernel `p̂(t, x, ·)` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatKernelEstimate {
    pub times: Vec<f64>,
    /// `probabilities[i][y]` estimates `P_x[X_{t_i} = y]`.
    pub probabilities: Vec<Vec<f64>>,
    pub walkers: usize,
    /// Walkers that reached distance `N/2` along an axis by each time.
    pub wraps: Vec<usize>,
}

impl HeatKernelEstimate {
    /// Binomial standard error of `p̂(t_i, x, y)`.
    pub fn std_error(&self, i: usize, y: usize) -> f64 {
        let p = self.probabilities[i][y];
        (p * (1.0 - p) / self.walkers as f64).sqrt()
    }
}

/// Empirical heat kernel from `walkers` independent walkers; walker `i` uses
/// stream `i` of `seed`.
pub fn heat_kernel_mc(env: &Environment, x: usize, times: &[f64], walkers: usize, seed: u64) -> Result<HeatKernelEstimate, RcmError> {
    check_times(times)?;
    let n = env.lattice.num_vertices();
    let mut counts = vec![vec![0u64; n]; times.len()];
    let mut wraps = vec![0usize; times.len()];
    for w in 0..walkers {
        let mut rng = rng::substream(seed, w as u64);
        let snap = walk_snapshots(env, x, times, &mut rng);
        for (i, &y) in snap.vertices.iter().enumerate() {
            counts[i][y] += 1;
            wraps[i] += snap.wrapped[i] as usize;
        }
    }
    let probabilities = counts
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / walkers as f64).collect())
        .collect();
    Ok(HeatKernelEstimate {
        times: times.to_vec(),
        probabilities,
        walkers,
        wraps,
    })
}

fn check_times(times: &[f64]) -> Result<(), RcmError> {
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t.is_finite()) {
            return Err(RcmError::InvalidTime(t));
        }
        prev = t;
    }
    Ok(())
}

/// Dense generator matrix `L` of the walk.
pub fn generator_matrix(env: &Environment) -> DenseMatrix {
    let lat = &env.lattice;
    let mut m = DenseMatrix::zeros(lat.num_vertices());
    for (e, &w) in env.omega.iter().enumerate() {
        let (j, k, _) = lat.edge_endpoints(e);
        m[(j, k)] += w;
        m[(k, j)] += w;
        m[(j, j)] -= w;
        m[(k, k)] -= w;
    }
    m
}

/// `p(t, x, ·)` from the matrix exponential `e^{tL}`, for small lattices.
pub fn heat_kernel_exact(env: &Environment, x: usize, times: &[f64]) -> Result<Vec<Vec<f64>>, RcmError> {
    let n = env.lattice.num_vertices();
    if n > DENSE_LIMIT {
        return Err(RcmError::TooLarge {
            vertices: n,
            limit: DENSE_LIMIT,
        });
    }
    check_times(times)?;
    let l = generator_matrix(env);
    Ok(times
        .iter()
        .map(|&t| {
            let mut a = l.clone();
            a.scale(t);
            let e = a.expm();
            (0..n).map(|y| e[(x, y)]).collect()
        })
        .collect())
}

/// `p(t, x, ·)` by uniformization: with `Λ ≥ max u`, `P = I + L/Λ` is
/// stochastic and `e^{tL} = Σ_k Poisson(Λt)(k) P^k`. One sequence `P^k δ_x`
/// serves every time; each time's sum stops once its remaining Poisson mass
/// is below `tol`.
pub fn heat_kernel_uniformized(env: &Environment, x: usize, times: &[f64], tol: f64) -> Result<Vec<Vec<f64>>, RcmError> {
    check_times(times)?;
    let lat = &env.lattice;
    let n = lat.num_vertices();
    let rate = env.u.iter().cloned().fold(0.0, f64::max);
    let means: Vec<f64> = times.iter().map(|t| rate * t).collect();
    // P^k δ_x is a probability vector, so the truncation error is the tail mass
    let k_caps: Vec<u64> = means.iter().map(|m| (m + 12.0 * m.sqrt() + 50.0) as u64).collect();
    let mut out = vec![vec![0.0; n]; times.len()];
    let mut mass = vec![0.0; times.len()];
    let mut done = vec![false; times.len()];
    let mut p = vec![0.0; n];
    p[x] = 1.0;
    let mut next = vec![0.0; n];
    let mut k: u64 = 0;
    loop {
        for i in 0..times.len() {
            if done[i] {
                continue;
            }
            let m = means[i];
            let ln_w = -m + k as f64 * m.ln() - libm::lgamma(k as f64 + 1.0);
            let w = ln_w.exp();
            if w > 0.0 {
                for (a, b) in out[i].iter_mut().zip(&p) {
                    *a += w * b;
                }
                mass[i] += w;
            }
            if 1.0 - mass[i] < tol || k >= k_caps[i] {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
        // p ← P p for the symmetric P
        for (i, v) in next.iter_mut().enumerate() {
            *v = p[i] * (1.0 - env.u[i] / rate);
        }
        for (e, &w) in env.omega.iter().enumerate() {
            let (j, kk, _) = lat.edge_endpoints(e);
            let c = w / rate;
            next[j] += c * p[kk];
            next[kk] += c * p[j];
        }
        core::mem::swap(&mut p, &mut next);
        k += 1;
    }
    Ok(out)
}

/// `sup_y p(t, x, y)` per time.
pub fn kernel_sup(kernels: &[Vec<f64>]) -> Vec<f64> {
    kernels.iter().map(|k| k.iter().cloned().fold(0.0, f64::max)).collect()
}

/// Checks the envelope `t^{d/2} sup_y p(t, 0, y)` on an ensemble.
///
/// `sups[k][i]` is `sup_y p(t_i, 0, y)` in environment `k`. Each environment's
/// envelope is regressed on `t` over the times `≥ onset`; the check passes iff
/// the mean slope is not positive at 95% confidence (`mean - 1.645·SE ≤ 0`,
/// one-sided) and every envelope value is finite.
pub fn heat_kernel_decay_check(times: &[f64], sups: &[Vec<f64>], dim: usize, onset: f64) -> DiagnosticReport {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= onset).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let mut slopes = RunningStats::new();
    let mut envelope_max: f64 = 0.0;
    let mut finite = true;
    for s in sups {
        let ys: Vec<f64> = idx.iter().map(|&i| times[i].powf(dim as f64 / 2.0) * s[i]).collect();
        finite &= ys.iter().all(|y| y.is_finite());
        envelope_max = ys.iter().cloned().fold(envelope_max, f64::max);
        slopes.push(linear_fit(&xs, &ys).0);
    }
    let se = if slopes.count > 1 { slopes.std_error() } else { 0.0 };
    let upper_ok = slopes.mean - 1.645 * se <= 0.0;
    let verdict = if finite && upper_ok { Verdict::Pass } else { Verdict::Fail };
    let mut r = DiagnosticReport {
        name: "heat_kernel_envelope_slope".into(),
        estimate: slopes.mean,
        std_error: se,
        bound_or_target: 0.0,
        verdict,
        metadata: Vec::new(),
    }
    .with_meta("onset", onset)
    .with_meta("envelope_max", envelope_max)
    .with_meta("environments", sups.len() as f64);
    for (j, &i) in idx.iter().enumerate() {
        let mean = sups.iter().map(|s| s[i]).sum::<f64>() / sups.len() as f64;
        r = r.with_meta(&alloc::format!("envelope@t={}", xs[j]), xs[j].powf(dim as f64 / 2.0) * mean);
    }
    r
}

/// Moments of `X_T` pooled over walkers and environments.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementStats {
    pub horizon: f64,
    pub dim: usize,
    /// `Cov(X_T)/T`, row-major `d×d`.
    pub sigma: Vec<f64>,
    /// Standard errors of the entries of `sigma`.
    pub sigma_se: Vec<f64>,
    /// Kurtosis `E[X_a⁴]/E[X_a²]²` per axis with standard errors.
    pub kurtosis: Vec<(f64, f64)>,
    pub samples: usize,
    pub wraps: usize,
}

/// Displacement covariance at several horizons. Walker `i` in environment
/// `k` uses stream `k·2³² + i` of `seed`; each environment starts walkers
/// from `walkers` evenly spaced vertices.
pub fn displacement_stats(envs: &[Environment], horizons: &[f64], walkers: usize, seed: u64) -> Result<Vec<DisplacementStats>, RcmError> {
    check_times(horizons)?;
    let d = envs[0].lattice.dim();
    let nh = horizons.len();
    // products X_a X_b and fourth powers, per horizon
    let mut prod: Vec<Vec<RunningStats>> = vec![vec![RunningStats::new(); d * d]; nh];
    let mut mean: Vec<Vec<RunningStats>> = vec![vec![RunningStats::new(); d]; nh];
    let mut fourth: Vec<Vec<RunningStats>> = vec![vec![RunningStats::new(); d]; nh];
    let mut wraps = vec![0usize; nh];
    for (k, env) in envs.iter().enumerate() {
        let n = env.lattice.num_vertices();
        for w in 0..walkers {
            let mut rng = rng::substream(seed, ((k as u64) << 32) | w as u64);
            let x0 = (w * n / walkers.max(1)) % n;
            let snap = walk_snapshots(env, x0, horizons, &mut rng);
            for h in 0..nh {
                let x = &snap.displacements[h * d..(h + 1) * d];
                wraps[h] += snap.wrapped[h] as usize;
                for a in 0..d {
                    let xa = x[a] as f64;
                    mean[h][a].push(xa);
                    fourth[h][a].push(xa.powi(4));
                    for b in 0..d {
                        prod[h][a * d + b].push(xa * x[b] as f64);
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(nh);
    for h in 0..nh {
        let t = horizons[h];
        let mut sigma = vec![0.0; d * d];
        let mut sigma_se = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let p = &prod[h][a * d + b];
                sigma[a * d + b] = (p.mean - mean[h][a].mean * mean[h][b].mean) / t;
                sigma_se[a * d + b] = p.std_error() / t;
            }
        }
        let kurtosis = (0..d)
            .map(|a| {
                let m2 = prod[h][a * d + a].mean;
                let m4 = &fourth[h][a];
                let k = m4.mean / (m2 * m2);
                // delta method with the dominant fourth-moment fluctuation
                let se = k * ((m4.std_error() / m4.mean).powi(2) + 4.0 * (prod[h][a * d + a].std_error() / m2).powi(2)).sqrt();
                (k, se)
            })
            .collect();
        out.push(DisplacementStats {
            horizon: t,
            dim: d,
            sigma,
            sigma_se,
            kurtosis,
            samples: prod[h][0].count as usize,
            wraps: wraps[h],
        });
    }
    Ok(out)
}

/// Stabilisation of `Cov(X_T)/T` over the last doubling of `T`.
///
/// Passes iff every diagonal entry changes by less than 10% between the
/// last two horizons (which should differ by a factor 2); inconclusive if
/// the change is within twice its standard error of the 10% threshold
/// without crossing it. Wraps invalidate the run.
pub fn qfclt_check(stats: &[DisplacementStats]) -> DiagnosticReport {
    let last = &stats[stats.len() - 1];
    let prev = &stats[stats.len() - 2];
    let d = last.dim;
    let mut worst: f64 = 0.0;
    let mut worst_se: f64 = 0.0;
    for a in 0..d {
        let i = a * d + a;
        let rel = (last.sigma[i] - prev.sigma[i]).abs() / prev.sigma[i];
        if rel >= worst {
            worst = rel;
            let se = (last.sigma_se[i].powi(2) + prev.sigma_se[i].powi(2)).sqrt() / prev.sigma[i];
            worst_se = se;
        }
    }
    let verdict = if last.wraps > 0 {
        Verdict::Fail
    } else if worst < 0.1 {
        Verdict::Pass
    } else if worst - 2.0 * worst_se < 0.1 {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    let mut r = DiagnosticReport {
        name: "qfclt_stabilisation".into(),
        estimate: worst,
        std_error: worst_se,
        bound_or_target: 0.1,
        verdict,
        metadata: Vec::new(),
    };
    for s in stats {
        for a in 0..d {
            r = r.with_meta(&alloc::format!("sigma_{a}{a}@T={}", s.horizon), s.sigma[a * d + a]);
        }
        r = r.with_meta(&alloc::format!("wraps@T={}", s.horizon), s.wraps as f64);
    }
    r
}

/// Effective conductivity of the periodic network: for each axis `a`,
/// `q_aa = (1/N^d) Σ_e ω_e (δ_{axis(e),a} + ∇_e χ_a)²` with the corrector
/// `χ_a` solving `-∇·ω(e_a + ∇χ_a) = 0`; off-diagonal entries from the
/// polarised form. This is the homogenized matrix of the torus-periodic
/// medium.
pub fn periodic_effective_conductivity(env: &Environment, tol: f64) -> Result<Vec<f64>, RcmError> {
    let lat = env.lattice;
    let d = lat.dim();
    let n = lat.num_vertices();
    let op = EdgeWeightedOperator::generator(lat, &env.omega)?;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        // right-hand side ∇*(ω e_a): each axis-a edge pushes ω into its head, out of its tail
        let mut rhs = vec![0.0; n];
        for (e, &w) in env.omega.iter().enumerate() {
            let (j, k, axis) = lat.edge_endpoints(e);
            if axis == a {
                rhs[j] += w;
                rhs[k] -= w;
            }
        }
        let chi = op.solve(&TestVector::projected(rhs), SolverOptions::with_tol(tol))?.values;
        let g: Vec<f64> = (0..lat.num_edges())
            .map(|e| {
                let (j, k, axis) = lat.edge_endpoints(e);
                (axis == a) as u8 as f64 + chi[k] - chi[j]
            })
            .collect();
        grads.push(g);
    }
    let mut q = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            q[a * d + b] = env.omega.iter().enumerate().map(|(e, w)| w * grads[a][e] * grads[b][e]).sum::<f64>() / n as f64;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_invariants() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let env = Environment::new(lat, (0..lat.num_edges()).map(|e| 0.5 + (e % 5) as f64).collect()).unwrap();
        let mut rng = rng::substream(3, 0);
        let path = simulate_vsrw(&env, 0, 20.0, &mut rng);
        assert!(path.times.windows(2).all(|w| w[1] > w[0]));
        assert!(path.times.iter().all(|&t| t <= 20.0));
        for k in 1..path.positions.len() / 2 {
            let a = &path.positions[(k - 1) * 2..k * 2];
            let b = &path.positions[k * 2..(k + 1) * 2];
            let step: i64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            assert_eq!(step, 1);
        }
    }

    #[test]
    fn jump_count_is_poisson_on_constant_ring() {
        let lat = TorusLattice::new(1, 16).unwrap();
        let env = Environment::constant(lat, 1.0).unwrap();
        let mut stats = RunningStats::new();
        for w in 0..20_000 {
            let mut rng = rng::substream(8, w);
            stats.push(simulate_vsrw(&env, 0, 3.0, &mut rng).jumps() as f64);
        }
        assert!((stats.mean - 6.0).abs() < 3.0 * stats.std_error());
        assert!((stats.variance() - 6.0).abs() < 0.3);
    }

    #[test]
    fn exact_kernel_is_stochastic_and_symmetric() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let env = Environment::new(lat, (0..8).map(|e| 0.3 + e as f64 * 0.4).collect()).unwrap();
        let from0 = heat_kernel_exact(&env, 0, &[0.0, 1.5]).unwrap();
        assert_eq!(from0[0][0], 1.0);
        assert!((from0[1].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let from3 = heat_kernel_exact(&env, 3, &[1.5]).unwrap();
        assert!((from0[1][3] - from3[0][0]).abs() < 1e-12);
    }

    #[test]
    fn uniformization_matches_expm() {
        let lat = TorusLattice::new(2, 5).unwrap();
        let env = Environment::new(lat, (0..lat.num_edges()).map(|e| 0.2 + ((e * 7) % 11) as f64 * 0.3).collect()).unwrap();
        let ts = [0.5, 2.0, 7.0];
        let a = heat_kernel_exact(&env, 4, &ts).unwrap();
        let b = heat_kernel_uniformized(&env, 4, &ts, 1e-14).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_conductivity_is_w() {
        let lat = TorusLattice::new(2, 6).unwrap();
        let env = Environment::constant(lat, 2.5).unwrap();
        let q = periodic_effective_conductivity(&env, 1e-12).unwrap();
        assert!((q[0] - 2.5).abs() < 1e-10 && (q[3] - 2.5).abs() < 1e-10 && q[1].abs() < 1e-10);
    }

    #[test]
    fn layered_conductivity_has_harmonic_and_arithmetic_means() {
        // ω depends only on the x-coordinate of the edge's tail: series along x, parallel along y
        let lat = TorusLattice::new(2, 4).unwrap();
        let vals = [1.0, 2.0, 4.0, 8.0];
        let omega: Vec<f64> = (0..lat.num_edges()).map(|e| vals[lat.coord(e / 2, 0)]).collect();
        let env = Environment::new(lat, omega).unwrap();
        let q = periodic_effective_conductivity(&env, 1e-13).unwrap();
        let harmonic = 4.0 / vals.iter().map(|v| 1.0 / v).sum::<f64>();
        let arithmetic = vals.iter().sum::<f64>() / 4.0;
        assert!((q[0] - harmonic).abs() < 1e-9, "{q:?}");
        assert!((q[3] - arithmetic).abs() < 1e-9, "{q:?}");
    }
}
