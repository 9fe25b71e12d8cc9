//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p gradlat --test acceptance`.

use std::sync::Arc;
use std::time::Instant;

use gradlat::config::RawConfig;
use gradlat::experiments::{self, Outcome};
use gradlat::{run, Action};
use gradlat_core::diagnostics::{self, DiagnosticReport, Verdict};
use gradlat_core::lattice::{green_form_bound_check, EdgeWeightedOperator, TestVector, TorusLattice};
use gradlat_core::rcm::{displacement_stats, Environment};
use gradlat_core::rng::substream;
use gradlat_core::sampler::{Edges, FieldState, GibbsSampler, ModelParams, Observable, RunSpec};
use gradlat_core::scaling::estimate_q;
use gradlat_core::stable::{logconcavity_check, StableDensity};
use gradlat_core::stats::{batch_means, pool_independent, TraceSummary};
use rand::Rng;

struct Line {
    id: u32,
    pass: bool,
    summary: String,
}

fn main() {
    let criteria: Vec<(u32, fn() -> (bool, String))> = vec![
        (1, laplace_identity),
        (2, levy_closed_form),
        (3, log_concavity),
        (4, metropolis_oracle),
        (5, ward_identity),
        (6, exp_moments),
        (7, moment_ratio),
        (8, green_bound),
        (9, vsrw_constant),
        (10, heat_kernel_envelope),
        (11, scaling_limit),
        (12, determinism),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut lines = Vec::new();
    for (id, f) in criteria {
        if filter.is_some_and(|k| k != id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = f();
        let line = Line {
            id,
            pass,
            summary: format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64()),
        };
        println!("criterion {:>2}: {} {}", line.id, if line.pass { "PASS" } else { "FAIL" }, line.summary);
        lines.push(line);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", lines.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}

// 1. ∫ e^{-λκ} f_α(κ) dκ = e^{-λ^α}
fn laplace_identity() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for alpha in [0.2, 0.3, 0.4, 0.5] {
        let sd = StableDensity::with_alpha(alpha).unwrap();
        for lambda in experiments::log_grid(0.1, 10.0, 50) {
            let est = sd.laplace_transform(lambda).unwrap();
            let exact = (-lambda.powf(alpha)).exp();
            worst = worst.max((est.value - exact).abs() / exact);
        }
    }
    (worst < 1e-6, format!("Laplace transform, max relative error {worst:.2e} (< 1e-6)"))
}

// 2. α = 1/2 is the Lévy density x^{-3/2} e^{-1/(4x)} / (2√π)
fn levy_closed_form() -> (bool, String) {
    let sd = StableDensity::with_alpha(0.5).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..400 {
        let x = 0.05 * (1000f64).powf(i as f64 / 399.0);
        let levy = x.powf(-1.5) * (-1.0 / (4.0 * x)).exp() / (2.0 * std::f64::consts::PI.sqrt());
        worst = worst.max((sd.density(x).unwrap() - levy).abs() / levy);
    }
    (worst < 1e-8, format!("Lévy closed form on [0.05, 50], max relative error {worst:.2e} (< 1e-8)"))
}

// 3. second differences of ln f_α(e^t) on [-5, 5]
fn log_concavity() -> (bool, String) {
    let grid: Vec<f64> = (0..=1000).map(|i| -5.0 + 0.01 * i as f64).collect();
    let mut worst = f64::NEG_INFINITY;
    for alpha in [0.2, 0.5] {
        let sd = StableDensity::with_alpha(alpha).unwrap();
        let r = logconcavity_check(&sd, &grid).unwrap();
        worst = worst.max(r.max_second_difference);
    }
    (worst <= 1e-8, format!("max second difference of ln f(e^t) {worst:.2e} (≤ 1e-8)"))
}

/// Random-walk Metropolis on `exp(-H(φ))`, single-site updates.
fn metropolis(params: &ModelParams, seed: u64, burn: usize, keep: usize, step: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let lat = params.lattice;
    let n = lat.num_vertices();
    let (alpha, beta, eps) = (params.alpha, params.beta, params.epsilon);
    let v = |x: f64| (1.0 + beta * x * x).powf(alpha);
    // energy terms touching site j
    let local = |phi: &[f64], j: usize, x: f64| {
        let mut h = eps * x * x;
        for a in 0..lat.dim() {
            h += v(x - phi[lat.neighbor(j, a, true)]);
            h += v(x - phi[lat.neighbor(j, a, false)]);
        }
        h
    };
    let mut rng = substream(seed, 0);
    let mut phi = vec![0.0; n];
    let (mut a0, mut a1) = (Vec::with_capacity(keep), Vec::with_capacity(keep));
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    for s in 0..burn + keep {
        for j in 0..n {
            let y = phi[j] + step * (2.0 * rng.random::<f64>() - 1.0);
            let dh = local(&phi, j, y) - local(&phi, j, phi[j]);
            proposed += 1;
            if dh <= 0.0 || rng.random::<f64>() < (-dh).exp() {
                phi[j] = y;
                accepted += 1;
            }
        }
        if s >= burn {
            a0.push(phi[0] * phi[0]);
            let d = phi[0] - phi[lat.neighbor(0, 0, true)];
            a1.push(d * d);
        }
    }
    (a0, a1, accepted as f64 / proposed as f64)
}

// 4. Gibbs φ-marginal against a direct Metropolis chain
fn metropolis_oracle() -> (bool, String) {
    let lat = TorusLattice::new(1, 4).unwrap();
    let params = ModelParams::new(0.3, 1.0, 0.5, lat).unwrap();
    let keep = 200_000;
    let obs = [
        Observable::Phi { vertex: 0, power: 2 },
        Observable::Gradient {
            edges: Edges::One(lat.edge(0, 0)),
            power: 2,
        },
    ];
    let gibbs = gradlat_core::sampler::run_chain(params, 11, &RunSpec::new(1000, keep, 1), &obs).unwrap();
    let (m0, m1, acc) = metropolis(&params, 12, 5000, keep, 2.5);
    let (o0, o1) = (batch_means(&m0), batch_means(&m1));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, g, m) in [("<phi0^2>", gibbs.summaries[0], o0), ("<(phi0-phi1)^2>", gibbs.summaries[1], o1)] {
        let se = (g.std_error.powi(2) + m.std_error.powi(2)).sqrt();
        let z = (g.mean - m.mean) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("{name} gibbs {:.4}±{:.4} metropolis {:.4}±{:.4} z={z:+.2}", g.mean, g.std_error, m.mean, m.std_error));
    }
    (ok, format!("{} ({keep} kept each, Metropolis acceptance {acc:.2})", parts.join("; ")))
}

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx` (Newton on the
/// orthonormal recurrence).
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `(⟨R_full⟩, ⟨R_half⟩)` on the 4-vertex ring by quadrature: the φ-marginal
/// is integrated with a tensor Gauss–Hermite rule, and for each φ the
/// tilted-stable law of `t` on edge 0 by the trapezoid rule on a `t` grid,
/// with `g = d/dt ln f(e^t)` taken by central differences of the density.
fn ring_ward_quadrature(alpha: f64) -> (f64, f64) {
    let (beta, eps) = (1.0, 0.5);
    let sd = StableDensity::with_alpha(alpha).unwrap();
    let h = 0.005;
    let ts: Vec<f64> = (0..=9200).map(|i| -40.0 + h * i as f64).collect();
    let lnf: Vec<f64> = ts.iter().map(|&t| sd.ln_density_t(t)).collect();
    let g: Vec<f64> = (0..ts.len())
        .map(|i| {
            if i == 0 || i + 1 == ts.len() {
                0.0
            } else {
                (lnf[i + 1] - lnf[i - 1]) / (2.0 * h)
            }
        })
        .collect();
    // per-c expectations E_c[g], E_c[e^t] under ∝ exp(-c e^t + t) f(e^t)
    let tilted = |c: f64| -> (f64, f64) {
        let (mut z, mut eg, mut ek) = (0.0, 0.0, 0.0);
        for i in 1..ts.len() - 1 {
            let l = lnf[i] - c * ts[i].exp() + ts[i];
            if !l.is_finite() {
                continue;
            }
            let w = l.exp();
            z += w;
            eg += w * g[i];
            ek += w * ts[i].exp();
        }
        (eg / z, ek / z)
    };
    let (x, w) = gauss_hermite(14);
    let n = x.len();
    let (mut zsum, mut full, mut half) = (0.0, 0.0, 0.0);
    for i0 in 0..n {
        for i1 in 0..n {
            // edge 0 joins sites 0 and 1; the (g, e^t) expectations depend on it only
            let phi01 = std::f64::consts::SQRT_2 * (x[i0] - x[i1]);
            let d2 = phi01 * phi01;
            let c = 1.0 + beta * d2;
            let (eg, ek) = tilted(c);
            let r_full = eg - ek * (1.0 + beta * d2) + 1.0;
            let r_half = eg - ek * (1.0 + 0.5 * beta * d2) + 1.0;
            for i2 in 0..n {
                for i3 in 0..n {
                    // e^{-x²} weights with φ = √2 x match e^{-φ²/2}
                    let phi = [x[i0], x[i1], x[i2], x[i3]].map(|v| std::f64::consts::SQRT_2 * v);
                    let mut hval = 0.0;
                    for j in 0..4 {
                        let d = phi[j] - phi[(j + 1) % 4];
                        hval += (1.0 + beta * d * d).powf(alpha);
                        hval += (eps - 0.5) * phi[j] * phi[j];
                    }
                    let wt = w[i0] * w[i1] * w[i2] * w[i3] * (-hval).exp();
                    zsum += wt;
                    full += wt * r_full;
                    half += wt * r_half;
                }
            }
        }
    }
    (full / zsum, half / zsum)
}

// 5. exactly one Ward residual vanishes, confirmed by the ring quadrature
fn ward_identity() -> (bool, String) {
    let lat = TorusLattice::new(2, 8).unwrap();
    let obs = diagnostics::ward_observables(Edges::Mean);
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.3, 0.4] {
        let params = ModelParams::new(alpha, 1.0, 0.1, lat).unwrap();
        let stable = Arc::new(StableDensity::with_alpha(alpha).unwrap().with_table());
        let outs: Vec<_> = (0..4u64)
            .map(|k| {
                let g = GibbsSampler::with_stable(params, Arc::clone(&stable));
                let mut s = FieldState::with_stream(params, 21, k);
                g.run(&mut s, &RunSpec::new(500, 5000, 2), &obs).unwrap()
            })
            .collect();
        let pooled: Vec<TraceSummary> = (0..3).map(|i| pool_independent(&outs.iter().map(|o| o.summaries[i]).collect::<Vec<_>>())).collect();
        let report = diagnostics::ward_check(&[pooled[0], pooled[1], pooled[2]], 0.05);
        let (q_full, q_half) = ring_ward_quadrature(alpha);
        // the quadrature itself is accurate to roughly 1e-6
        let oracle = if q_full.abs() < 1e-4 && q_half.abs() > 1e-2 {
            Some(diagnostics::WardForm::Full)
        } else if q_half.abs() < 1e-4 && q_full.abs() > 1e-2 {
            Some(diagnostics::WardForm::Half)
        } else {
            None
        };
        let agree = report.verdict == Verdict::Pass && report.vanishing.is_some() && report.vanishing == oracle;
        ok &= agree;
        parts.push(format!(
            "α={alpha}: R_full {:+.2e}±{:.1e}, R_half {:+.2e}±{:.1e}, SE/<e^t> {:.1e}, vanishing {:?}; ring quadrature R_full {q_full:+.1e} R_half {q_half:+.3e}",
            pooled[0].mean,
            pooled[0].std_error,
            pooled[1].mean,
            pooled[1].std_error,
            pooled[0].std_error / pooled[2].mean,
            report.vanishing,
        ));
    }
    (ok, parts.join("; "))
}

fn moments_outcome() -> &'static Outcome {
    use std::sync::OnceLock;
    static CELL: OnceLock<Outcome> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = RawConfig::from_toml(
            "experiment = \"moments\"\n[model]\nalpha = 0.3\nepsilon = 0.1\ndim = 2\n[chain]\nseed = 31\nburn = 500\nkeep = 4000\nthin = 2\nchains = 4\n",
        )
        .unwrap()
        .validate()
        .unwrap();
        experiments::moments(&cfg).unwrap()
    })
}

fn find<'a>(o: &'a Outcome, prefix: &str) -> Vec<&'a DiagnosticReport> {
    o.reports.iter().map(|(_, r)| r).filter(|r| r.name.starts_with(prefix)).collect()
}

// 6. ⟨e^{λt}⟩ across N ∈ {4, 8, 16}
fn exp_moments() -> (bool, String) {
    let o = moments_outcome();
    let rs = find(o, "exp_moment");
    let ok = rs.len() == 4 && rs.iter().all(|r| r.verdict == Verdict::Pass);
    let parts: Vec<String> = rs.iter().map(|r| format!("{} max/min {:.3}", r.name, r.estimate)).collect();
    (ok, format!("{} (< 2, d=2, α=0.3, ε=0.1)", parts.join(", ")))
}

// 7. ⟨(φ·v)^{2p}⟩ / [v; Gᵖv]^p across N
fn moment_ratio() -> (bool, String) {
    let o = moments_outcome();
    let rs = find(o, "phi_moment_ratio");
    let ok = rs.len() == 2 && rs.iter().all(|r| r.verdict == Verdict::Pass);
    let parts: Vec<String> = rs.iter().map(|r| format!("{} max/min {:.3}", r.name, r.estimate)).collect();
    (ok, format!("{} (< 2, nearest-neighbour dipole)", parts.join(", ")))
}

// 8. [v; G(t) v] ≤ Σ (∇Gᵖv)² / (βe^t) on random (t, v)
fn green_bound() -> (bool, String) {
    let lat = TorusLattice::new(2, 8).unwrap();
    let mut rng = substream(41, 0);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for trial in 0..100 {
        let spread = 0.5 + 2.5 * rng.random::<f64>();
        let t: Vec<f64> = (0..lat.num_edges()).map(|_| spread * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let beta = 0.5 + rng.random::<f64>();
        let mass = if trial % 2 == 0 { 0.0 } else { 0.5 * rng.random::<f64>() };
        let op = EdgeWeightedOperator::from_t(lat, &t, beta, mass).unwrap();
        let v = TestVector::projected((0..lat.num_vertices()).map(|_| rng.random::<f64>() - 0.5).collect());
        let r = green_form_bound_check(&op, &v, 1e-8).unwrap();
        if !r.pass {
            violations += 1;
        }
        tightest = tightest.max(r.lhs / r.rhs);
    }
    (violations == 0, format!("{violations} violations in 100 trials, largest lhs/rhs {tightest:.4}"))
}

// 9. constant conductance w: Cov(X_T)/T = 2w·I and q̂ = w·I
fn vsrw_constant() -> (bool, String) {
    let w = 1.5;
    let lat = TorusLattice::new(3, 64).unwrap();
    let env = Environment::constant(lat, w).unwrap();
    let horizon = 10.0;
    let stats = displacement_stats(std::slice::from_ref(&env), &[horizon], 20_000, 51).unwrap();
    let s = &stats[0];
    let q = estimate_q(std::slice::from_ref(&env), horizon, 20_000, 52).unwrap();
    let mut worst_sigma: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let i = a * 3 + b;
            let target = if a == b { 1.0 } else { 0.0 };
            worst_sigma = worst_sigma.max((s.sigma[i] - 2.0 * w * target).abs() / s.sigma_se[i]);
            worst_q = worst_q.max((q.q[i] - w * target).abs() / q.se[i]);
        }
    }
    let ok = worst_sigma <= 3.0 && worst_q <= 3.0 && s.wraps == 0 && q.wraps == 0;
    (
        ok,
        format!(
            "w={w}, d=3, N=64, T={horizon}: max |Cov/T - 2w I|/SE {worst_sigma:.2}, max |q̂ - w I|/SE {worst_q:.2}, q̂ diag [{:.4}, {:.4}, {:.4}], wraps {}",
            q.q[0], q.q[4], q.q[8], s.wraps + q.wraps
        ),
    )
}

// 10. t^{d/2} sup_y p(t, 0, y) on sampled d = 3 environments
fn heat_kernel_envelope() -> (bool, String) {
    let cfg = RawConfig::from_toml(
        "experiment = \"rcm\"\n[model]\nalpha = 0.4\nepsilon = 0.01\ndim = 3\nside = 32\n[chain]\nseed = 61\nburn = 40\n[rcm]\nenvironments = 8\nspacing = 5\nwalkers = 500\nhorizons = [2.5, 5.0]\n",
    )
    .unwrap()
    .validate()
    .unwrap();
    let o = experiments::rcm_experiment(&cfg).unwrap();
    let r = find(&o, "heat_kernel_envelope_slope")[0];
    let env = |t: &str| r.metadata.iter().find(|(k, _)| k == &format!("envelope@t={t}")).map(|(_, v)| *v).unwrap_or(f64::NAN);
    (
        r.verdict == Verdict::Pass,
        format!(
            "mean envelope slope {:+.2e} ± {:.1e} over t ∈ [5, 50], 8 environments (N=32, α=0.4); envelope {:.4} at t=5, {:.4} at t=50",
            r.estimate,
            r.std_error,
            env("5"),
            env("50")
        ),
    )
}

// 11. quenched variances along δ → continuum (f, (-Q)⁻¹ f) with q̂; constant-ω control
fn scaling_limit() -> (bool, String) {
    let cfg = RawConfig::from_toml(
        "experiment = \"scaling\"\n[model]\nalpha = 0.4\nepsilon = 0.01\ndim = 3\nside = 32\n[chain]\nseed = 71\nburn = 60\n[scaling]\nenvironments = 16\nspacing = 5\n",
    )
    .unwrap()
    .validate()
    .unwrap();
    let o = experiments::scaling_experiment(&cfg).unwrap();
    let limit = find(&o, "scaling_limit")[0];
    let control = find(&o, "scaling_control")[0];
    let meta = |r: &DiagnosticReport, k: &str| r.metadata.iter().find(|(n, _)| n == k).map(|(_, v)| *v).unwrap_or(f64::NAN);
    let ok = limit.verdict == Verdict::Pass && control.verdict == Verdict::Pass;
    (
        ok,
        format!(
            "means δ=1/2 {:.4}, 1/4 {:.4}, 1/8 {:.4} (increments {:.4}, {:.4}); continuum {:.4}, gap {:.1}% (≤ 15%); control gap {:.2}% (≤ 3%)",
            meta(limit, "mean@delta=0.5"),
            meta(limit, "mean@delta=0.25"),
            meta(limit, "mean@delta=0.125"),
            meta(limit, "increment0"),
            meta(limit, "increment1"),
            limit.bound_or_target,
            100.0 * meta(limit, "relative_gap"),
            100.0 * meta(control, "relative_gap"),
        ),
    )
}

// 12. reruns reproduce byte-identical CSVs; split runs reproduce checkpoints
fn determinism() -> (bool, String) {
    let configs = [
        "experiment = \"sample\"\nmodel.side = 4\nchain.keep = 50\nchain.burn = 10\n",
        "experiment = \"stable-check\"\nstable.points = 5\n",
        "experiment = \"ward\"\nmodel.side = 4\nchain.keep = 200\nchain.burn = 10\nchain.thin = 1\n",
        "experiment = \"moments\"\nmoments.sides = [3, 4]\nchain.keep = 200\nchain.burn = 10\nchain.thin = 1\n",
        "experiment = \"scaling\"\nmodel.dim = 3\nmodel.side = 16\nmodel.alpha = 0.4\nchain.burn = 2\nscaling.deltas = [0.5, 0.25]\nscaling.environments = 2\nscaling.spacing = 2\nscaling.walkers = 50\nscaling.horizon = 2.0\n",
        "experiment = \"rcm\"\nmodel.side = 6\nchain.burn = 2\nrcm.environments = 2\nrcm.spacing = 2\nrcm.walkers = 50\nrcm.times = [1.0, 2.0, 4.0]\nrcm.onset = 1.0\nrcm.horizons = [1.0, 2.0]\n",
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, text) in configs.iter().enumerate() {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let mut raw = RawConfig::from_toml(text).unwrap();
            raw.chain.seed = Some(81);
            raw.output.dir = dir.path().join(format!("{i}-{rep}"));
            let cfg = raw.validate().unwrap();
            let summary = run(&cfg, &Action::Fresh { sweeps: None }).unwrap();
            outs.push(summary.artifacts);
        }
        for (a, b) in outs[0].iter().zip(&outs[1]) {
            if a.extension().is_some_and(|e| e == "csv") {
                compared += 1;
                if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                    ok = false;
                    mismatched.push(a.display().to_string());
                }
            }
        }
    }
    // split run: 30 sweeps vs 13 + resume 17
    let base = "experiment = \"sample\"\nmodel.side = 5\nchain.burn = 3\nchain.thin = 2\nchain.chains = 1\nchain.seed = 82\n";
    let cfg_at = |sub: &str| {
        let mut raw = RawConfig::from_toml(base).unwrap();
        raw.output.dir = dir.path().join(sub);
        raw.validate().unwrap()
    };
    run(&cfg_at("full"), &Action::Fresh { sweeps: Some(30) }).unwrap();
    run(&cfg_at("first"), &Action::Fresh { sweeps: Some(13) }).unwrap();
    run(
        &cfg_at("second"),
        &Action::Resume {
            checkpoint: dir.path().join("first/chain-0.ckpt"),
            sweeps: 17,
        },
    )
    .unwrap();
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    let ckpt_equal = read("full/chain-0.ckpt") == read("second/chain-0.ckpt");
    let rows = |p: &str| -> Vec<String> { String::from_utf8(read(p)).unwrap().lines().skip(1).map(String::from).collect() };
    let mut joined = rows("first/sample_trace.csv");
    joined.extend(rows("second/sample_trace.csv"));
    let trace_equal = joined == rows("full/sample_trace.csv");
    ok &= ckpt_equal && trace_equal;
    (
        ok,
        format!(
            "{compared} CSV artifacts over 6 experiments byte-identical{}; split-run checkpoint identical: {ckpt_equal}, trace identical: {trace_equal}",
            if mismatched.is_empty() { String::new() } else { format!(" except {mismatched:?}") }
        ),
    )
}
