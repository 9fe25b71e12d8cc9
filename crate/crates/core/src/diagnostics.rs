//! Verdicts for the Ward identity, moment bounds and tightness estimates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::sampler::{Edges, Observable};
use crate::stats::TraceSummary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Worst of several verdicts: any fail, else any inconclusive, else pass.
    pub fn combine<I: IntoIterator<Item = Verdict>>(verdicts: I) -> Verdict {
        let mut out = Verdict::Pass;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub bound_or_target: f64,
    pub verdict: Verdict,
    pub metadata: Vec<(String, f64)>,
}

impl DiagnosticReport {
    /// Identity check: pass iff `|estimate - target| ≤ 3·SE`; inconclusive
    /// when `SE > max_rel_se · scale` (with `scale` the size of the quantity).
    pub fn identity(name: &str, estimate: f64, std_error: f64, target: f64, scale: f64, max_rel_se: f64) -> Self {
        let verdict = if !estimate.is_finite() || !std_error.is_finite() {
            Verdict::Fail
        } else if std_error > max_rel_se * scale.abs() {
            Verdict::Inconclusive
        } else if (estimate - target).abs() <= 3.0 * std_error {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.to_string(),
            estimate,
            std_error,
            bound_or_target: target,
            verdict,
            metadata: Vec::new(),
        }
    }

    /// Inequality check: pass iff `estimate ≤ bound·(1 + tol)`.
    pub fn upper_bound(name: &str, estimate: f64, std_error: f64, bound: f64, tol: f64) -> Self {
        let verdict = if estimate.is_finite() && estimate <= bound * (1.0 + tol) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.to_string(),
            estimate,
            std_error,
            bound_or_target: bound,
            verdict,
            metadata: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.metadata.push((key.to_string(), value));
        self
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

/// The two candidate forms of the Ward identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WardForm {
    /// `⟨g(t)⟩ - ⟨e^t(1 + β(φ_j-φ_k)²)⟩ + 1`.
    Full,
    /// `⟨g(t)⟩ - ⟨e^t(1 + ½β(φ_j-φ_k)²)⟩ + 1`.
    Half,
}

/// Observables feeding [`ward_check`]: full residual, half residual, `e^t`.
pub fn ward_observables(edges: Edges) -> [Observable; 3] {
    [
        Observable::WardResidual {
            edges,
            gradient_factor: 1.0,
        },
        Observable::WardResidual {
            edges,
            gradient_factor: 0.5,
        },
        Observable::ExpT { edges, lambda: 1.0 },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct WardReport {
    pub full: DiagnosticReport,
    pub half: DiagnosticReport,
    /// The form whose residual is statistically zero, when exactly one is.
    pub vanishing: Option<WardForm>,
    pub verdict: Verdict,
}

/// Both Ward residuals with their standard errors. The identity is
/// confirmed when exactly one residual is within 3 SE of zero and its SE is
/// below `max_rel_se · ⟨e^t⟩`.
pub fn ward_check(summaries: &[TraceSummary; 3], max_rel_se: f64) -> WardReport {
    let [full, half, exp_t] = summaries;
    let scale = exp_t.mean;
    let full = DiagnosticReport::identity("ward_full", full.mean, full.std_error, 0.0, scale, max_rel_se)
        .with_meta("mean_exp_t", scale);
    let half = DiagnosticReport::identity("ward_half", half.mean, half.std_error, 0.0, scale, max_rel_se)
        .with_meta("mean_exp_t", scale);
    let (vanishing, verdict) = match (full.verdict, half.verdict) {
        (Verdict::Pass, Verdict::Fail) => (Some(WardForm::Full), Verdict::Pass),
        (Verdict::Fail, Verdict::Pass) => (Some(WardForm::Half), Verdict::Pass),
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => (None, Verdict::Inconclusive),
        _ => (None, Verdict::Fail),
    };
    WardReport {
        full,
        half,
        vanishing,
        verdict,
    }
}

/// Spread `max/min` of positive estimates; infinite if any is non-positive or non-finite.
pub fn spread(values: &[f64]) -> f64 {
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return f64::INFINITY;
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn stability_report(name: &str, labels: &[f64], estimates: &[TraceSummary], limit: f64, max_rel_se: f64) -> DiagnosticReport {
    let means: Vec<f64> = estimates.iter().map(|s| s.mean).collect();
    let ratio = spread(&means);
    let noisy = estimates.iter().any(|s| !(s.std_error <= max_rel_se * s.mean.abs()));
    let verdict = if !ratio.is_finite() {
        Verdict::Fail
    } else if noisy {
        Verdict::Inconclusive
    } else if ratio < limit {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut r = DiagnosticReport {
        name: name.to_string(),
        estimate: ratio,
        std_error: f64::NAN,
        bound_or_target: limit,
        verdict,
        metadata: Vec::new(),
    };
    for (label, s) in labels.iter().zip(estimates) {
        r = r
            .with_meta(&format!("estimate@{label}"), s.mean)
            .with_meta(&format!("se@{label}"), s.std_error);
    }
    r
}

/// `⟨e^{λt}⟩` per lattice size `N`: pass iff all finite with `max/min < 2`;
/// inconclusive when an SE exceeds `max_rel_se` of its estimate.
pub fn exp_moment_check(lambda: f64, sides: &[usize], estimates: &[TraceSummary], max_rel_se: f64) -> DiagnosticReport {
    let labels: Vec<f64> = sides.iter().map(|&n| n as f64).collect();
    stability_report(&format!("exp_moment[lambda={lambda}]"), &labels, estimates, 2.0, max_rel_se).with_meta("lambda", lambda)
}

/// Per-edge `Var(t_e)`: pass iff all finite, positive, and `max/min < 1.5`.
pub fn t_variance_check(variances: &[f64]) -> DiagnosticReport {
    let ratio = spread(variances);
    let mean = variances.iter().sum::<f64>() / variances.len() as f64;
    let verdict = if ratio.is_finite() && ratio < 1.5 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    DiagnosticReport {
        name: "t_variance".to_string(),
        estimate: ratio,
        std_error: f64::NAN,
        bound_or_target: 1.5,
        verdict,
        metadata: Vec::new(),
    }
    .with_meta("mean_variance", mean)
}

/// `⟨(φ·v)^{2p}⟩ / [v; Gᵖv]^p` across lattice sizes: pass iff `max/min < 2`.
///
/// `estimates[i]` is the Monte Carlo `⟨(φ·v)^{2p}⟩` and `green_forms[i]` the
/// value `[v; Gᵖv]` on the lattice of side `sides[i]`.
pub fn phi_moment_bound_check(
    p: u32,
    sides: &[usize],
    estimates: &[TraceSummary],
    green_forms: &[f64],
    max_rel_se: f64,
) -> DiagnosticReport {
    let ratios: Vec<TraceSummary> = estimates
        .iter()
        .zip(green_forms)
        .map(|(s, &b)| {
            let bp = b.powi(p as i32);
            TraceSummary {
                mean: s.mean / bp,
                std_error: s.std_error / bp,
                variance: s.variance / (bp * bp),
                ..*s
            }
        })
        .collect();
    let labels: Vec<f64> = sides.iter().map(|&n| n as f64).collect();
    stability_report(&format!("phi_moment_ratio[p={p}]"), &labels, &ratios, 2.0, max_rel_se).with_meta("p", p as f64)
}

/// One cell of the tightness grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TightnessPoint {
    pub side: usize,
    pub epsilon: f64,
    /// `⟨φ₀²⟩`.
    pub raw: TraceSummary,
    /// `⟨(φ₀ - φ̄)²⟩`.
    pub centered: TraceSummary,
}

/// Boundedness of the single-site variance over an `(N, ε)` grid.
///
/// On the torus the spatial mean `φ̄` decouples from the gradient field and is
/// Gaussian with variance `1/(2εN^d)`, so the raw `⟨φ₀²⟩` carries that
/// finite-volume zero mode. The verdict uses the centred variance, which is
/// what stays bounded when `N → ∞` before `ε → 0`: pass iff its `max/min < 2`
/// over the grid.
pub fn tightness_proxy(dim: usize, points: &[TightnessPoint]) -> DiagnosticReport {
    let centered: Vec<f64> = points.iter().map(|p| p.centered.mean).collect();
    let ratio = spread(&centered);
    let verdict = if ratio.is_finite() && ratio < 2.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut r = DiagnosticReport {
        name: "tightness".to_string(),
        estimate: ratio,
        std_error: f64::NAN,
        bound_or_target: 2.0,
        verdict,
        metadata: Vec::new(),
    };
    for p in points {
        let zero_mode = 1.0 / (2.0 * p.epsilon * (p.side as f64).powi(dim as i32));
        r = r
            .with_meta(&format!("raw@N={},eps={}", p.side, p.epsilon), p.raw.mean)
            .with_meta(&format!("centered@N={},eps={}", p.side, p.epsilon), p.centered.mean)
            .with_meta(&format!("zero_mode@N={},eps={}", p.side, p.epsilon), zero_mode);
    }
    r
}
