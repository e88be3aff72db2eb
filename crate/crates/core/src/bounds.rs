//! Catalog of analytic right-hand sides for the typicality, equilibration and
//! decoherence bounds, plus the comparison rule used to score empirical
//! left-hand sides against them.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::eigen::hermitian_eig;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{reduce_pure, ComplexMatrix, Subsystem};
use crate::states::{purity_matrix, trace_distance_matrices, Subspace};

/// Levy-type constant for observables on a random pure state.
pub const C_MICROCANONICAL: f64 = 1.0 / (36.0 * PI * PI * PI);
/// Constant in the reduced-state concentration bound.
pub const C_CANONICAL: f64 = 1.0 / (18.0 * PI * PI * PI);
/// Constant in the effective-dimension tail bound.
pub const C_DEFF_TAIL: f64 = LN_2 * LN_2 / (72.0 * PI * PI * PI);
/// Constant in the entanglement tail bounds.
pub const C_ENTANGLED: f64 = 1.0 / (14.0 * LN_2);
/// Constant in Levy's lemma on the real sphere.
pub const C_LEVY: f64 = 1.0 / (9.0 * PI * PI * PI);

/// Relative tolerance for approximate (`≈`) statements.
pub const APPROXIMATE_REL_TOL: f64 = 0.10;
/// Number of standard errors granted to Monte Carlo estimates.
pub const STDERR_ALLOWANCE: f64 = 3.0;
/// Relative floating-point slack added to every comparison.
pub const FLOAT_SLACK: f64 = 1e-9;
/// Largest dimension for which the pairing maximum is solved exactly.
pub const EXACT_PAIRING_MAX_DIM: usize = 20;

macro_rules! theorem_ids {
    ($($variant:ident => $name:literal, $formula:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum TheoremId {
            $($variant,)*
        }

        impl TheoremId {
            pub const ALL: &'static [TheoremId] = &[$(TheoremId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(TheoremId::$variant => $name,)*
                }
            }

            /// Human-readable statement of the analytic right-hand side.
            pub fn formula(self) -> &'static str {
                match self {
                    $(TheoremId::$variant => $formula,)*
                }
            }
        }

        impl FromStr for TheoremId {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok(TheoremId::$variant),)*
                    other => Err(Error::InvalidArgument(format!("unknown theorem id `{other}`"))),
                }
            }
        }
    };
}

theorem_ids! {
    McVarianceIdentity => "MC_VARIANCE_IDENTITY",
        "<(Tr[B psi] - <B>_mc)^2>_psi = (<B^2>_mc - <B>_mc^2)/(d_R+1)";
    McConcentration => "MC_CONCENTRATION",
        "P{|Tr[B psi] - <B>_mc| >= eps} <= 2 exp(-C d_R eps^2/|B|^2), C = 1/(36 pi^3)";
    McVarianceConcentration => "MC_VARIANCE_CONCENTRATION",
        "P{|var_psi - var_mc| > |B|^2 eps} <= min_delta 2e^{-C d_R (eps-delta)} + 2e^{-C d_R delta^2}";
    CoarseGrained => "COARSE_GRAINED",
        "P{max_A |Tr[A psi] - <A>_mc| >= eps} <= 2m exp(-C d_R eps^2/(m^2 |A|^2)), C = 1/(36 pi^3)";
    CanonicalReduction => "CANONICAL_REDUCTION",
        "P{D(rho_S, rho_S^mc) >= 2 eps + 2 sqrt(d_S/d_eff(rho_B^mc))} <= 2 exp(-C d_R eps^2), C = 1/(18 pi^3)";
    DeffSubspaceMean => "DEFF_SUBSPACE_MEAN",
        "<d_eff(omega)>_psi >= d_R/2";
    DeffSubspaceTail => "DEFF_SUBSPACE_TAIL",
        "P{d_eff(omega) < d_R/4} <= 2 exp(-C sqrt(d_R)), C = ln(2)^2/(72 pi^3)";
    DeffProductMean => "DEFF_PRODUCT_MEAN",
        "<d_eff(omega)>_product >= (d_SR+1)(d_BR+1)/4";
    DeffMeanEnergy => "DEFF_MEAN_ENERGY",
        "<Tr[omega^2]>_E ~ (2E^2/d^2) sum_k 1/E_k^2; <d_eff> >~ (d/2)(E_0/E_mean)^2";
    ExpectationEquilibration => "EXPECTATION_EQUILIBRATION",
        "<(Tr[A rho_t] - Tr[A omega])^2>_t <= |A|^2/d_eff(omega)";
    SubsystemEquilibration => "SUBSYSTEM_EQUILIBRATION",
        "<D(rho_S(t), omega_S)>_t <= 1/2 sqrt(d_S/d_eff(omega_B)) <= 1/2 sqrt(d_S^2/d_eff(omega))";
    PurityEquilibration => "PURITY_EQUILIBRATION",
        "|<p_S(t)>_t - Tr[omega_S^2]| <= Tr[omega_B^2] + 2 Tr[omega^2] <= (d_S+2)/d_eff(omega)";
    Ergodicity => "ERGODICITY",
        "P{|<Tr[B psi_t]>_t - <B>_mc| >= eps} <= 2 exp(-C d_R eps^2/|$[B]|^2), C = 1/(36 pi^3)";
    Speed => "SPEED",
        "<v_S(t)>_t <= |H_S + H_SB| sqrt(d_S^3/d_eff(omega))";
    PurityRateAvg => "PURITY_RATE_AVG",
        "<|dp_S/dt|>_t <= 2 |H_SB| sqrt(d_S^3/d_eff(omega))";
    PurityRateInstant => "PURITY_RATE_INSTANT",
        "|dp_S/dt| <= 2 p_S sqrt(2 I_SB) |H_SB|; pure: 4 p_S sqrt(S(rho_S)) |H_SB|";
    CommutatorLower => "COMMUTATOR_LOWER",
        "|[rho, A]|_1 >= 2 max_pairings sum_(k,l) |a_k - a_l| |rho_kl|";
    Decoherence => "DECOHERENCE",
        "max_pairings sum_(k,l) |E_k - E_l| |rho_S,kl| <= |H_SB| + 1/2 |d rho_S/dt|_1";
    Isi => "ISI",
        "<D(rho_S(t), sigma_S(t))>_t <= 1/2 sqrt(d_S/d_eff(omega_B)) + 1/2 sqrt(d_S/d_eff(omega'_B)) + delta";
    IsiLindenDelta => "ISI_LINDEN_DELTA",
        "<D(omega_S, rho_S^mc)>_psi <= sqrt(d_S delta_L/(4 d_R))";
    EntangledStateTail => "ENTANGLED_STATE_TAIL",
        "P{D(rho_S, 1/d_S) >= eps} <= 2 (10 d_S/eps)^(2 d_S) exp(-C d_B eps^2), C = 1/(14 ln 2)";
    EntangledEigsTail => "ENTANGLED_EIGS_TAIL",
        "P{exists k: D(Tr_B |E_k><E_k|, 1/d_S) >= eps} <= 2d (10 d_S/eps)^(2 d_S) exp(-C d_B eps^2)";
    Levy => "LEVY",
        "P{|f(x) - <f>| >= eps} <= 2 exp(-C d eps^2/eta^2), C = 1/(9 pi^3)";
    EqTimeHeisenberg => "EQ_TIME_HEISENBERG",
        "T >= 1/Delta E (times initial distance travelled)";
    EqTimePurity => "EQ_TIME_PURITY",
        "T >= log(1/p_eq)/(4 sqrt(log d_S) |H_SB|)";
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Direction of the comparison between an empirical quantity and the
/// analytic value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    /// `lhs ≤ rhs`.
    AtMost,
    /// `lhs ≥ rhs`.
    AtLeast,
    /// `lhs = rhs`, compared two-sided.
    Equals,
    /// `|lhs − rhs| ≤ rel_tol·|rhs|`.
    Approximately { rel_tol: f64 },
}

impl TheoremId {
    pub fn relation(self) -> Relation {
        use TheoremId::*;
        match self {
            McVarianceIdentity => Relation::Equals,
            DeffMeanEnergy => Relation::Approximately {
                rel_tol: APPROXIMATE_REL_TOL,
            },
            DeffSubspaceMean | DeffProductMean | CommutatorLower | EqTimeHeisenberg
            | EqTimePurity => Relation::AtLeast,
            _ => Relation::AtMost,
        }
    }

    /// True when the right-hand side is a probability.
    pub fn is_probability(self) -> bool {
        use TheoremId::*;
        matches!(
            self,
            McConcentration
                | McVarianceConcentration
                | CoarseGrained
                | CanonicalReduction
                | DeffSubspaceTail
                | Ergodicity
                | EntangledStateTail
                | EntangledEigsTail
                | Levy
        )
    }
}

/// Parameters consumed by the catalog. Each entry reads only the fields it
/// needs and reports the first missing one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundContext {
    pub d: Option<usize>,
    pub d_s: Option<usize>,
    pub d_b: Option<usize>,
    pub d_r: Option<usize>,
    pub d_sr: Option<usize>,
    pub d_br: Option<usize>,
    /// `‖B‖∞`.
    pub norm_b: Option<f64>,
    /// `‖A‖∞`.
    pub norm_a: Option<f64>,
    /// `‖H_SB‖∞`.
    pub norm_h_sb: Option<f64>,
    /// `‖H_S⊗I + H_SB‖∞`.
    pub norm_h_s_sb: Option<f64>,
    /// `‖$[B]‖∞`.
    pub norm_dephased_b: Option<f64>,
    /// `d_eff(ω)`.
    pub d_eff: Option<f64>,
    /// `d_eff(ω^B)`.
    pub d_eff_b: Option<f64>,
    /// `d_eff` of the second bath time average in the initial-state
    /// independence bound.
    pub d_eff_b_other: Option<f64>,
    pub epsilon: Option<f64>,
    /// Marginal-similarity parameter, or the Linden weighted purity for
    /// `ISI_LINDEN_DELTA`.
    pub delta: Option<f64>,
    pub m: Option<usize>,
    pub eta: Option<f64>,
    pub energy: Option<f64>,
    pub e0: Option<f64>,
    pub e_mean: Option<f64>,
    pub spectrum: Option<Vec<f64>>,
    pub p_eq: Option<f64>,
    pub delta_e: Option<f64>,
    /// `⟨B⟩_mc`.
    pub mc_mean: Option<f64>,
    /// `⟨B²⟩_mc`.
    pub mc_second_moment: Option<f64>,
    /// `Tr[(ω^B)²]`.
    pub purity_omega_b: Option<f64>,
    /// `Tr[ω²]`.
    pub purity_omega: Option<f64>,
    /// `p^S_t = Tr[(ρ^S_t)²]`.
    pub purity_s: Option<f64>,
    /// `‖ρ^S_t‖∞`.
    pub norm_rho_s: Option<f64>,
    /// Quantum mutual information `I_SB` in nats.
    pub mutual_information: Option<f64>,
    /// `S(ρ^S)` in nats.
    pub entropy_s: Option<f64>,
    /// Raw maximum pairing sum `max Σ |a_k − a_l| |ρ_kl|`.
    pub pairing_sum: Option<f64>,
    /// `½‖dρ^S/dt‖₁`.
    pub speed: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingContext(name))
}

fn need_dim(v: Option<usize>, name: &'static str) -> Result<f64> {
    let d = need(v, name)?;
    if d == 0 {
        return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
    }
    Ok(d as f64)
}

fn need_nonneg(v: Option<f64>, name: &'static str) -> Result<f64> {
    let x = need(v, name)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be finite and non-negative, got {x}"
        )));
    }
    Ok(x)
}

fn need_positive(v: Option<f64>, name: &'static str) -> Result<f64> {
    let x = need_nonneg(v, name)?;
    if x == 0.0 {
        return Err(Error::InvalidArgument(format!("{name} must be positive")));
    }
    Ok(x)
}

fn need_spectrum(ctx: &BoundContext) -> Result<&[f64]> {
    let s = ctx
        .spectrum
        .as_deref()
        .ok_or(Error::MissingContext("spectrum"))?;
    if s.is_empty() || s.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(
            "spectrum must be non-empty and strictly positive".into(),
        ));
    }
    Ok(s)
}

/// `2e^{−x}`, the common two-sided Levy-type tail.
fn two_exp(x: f64) -> f64 {
    2.0 * (-x).exp()
}

/// Analytic right-hand side (or exact identity value) of a catalog entry.
pub fn evaluate_bound(theorem: TheoremId, ctx: &BoundContext) -> Result<f64> {
    use TheoremId::*;
    Ok(match theorem {
        McVarianceIdentity => {
            let d_r = need_dim(ctx.d_r, "d_r")?;
            let mean = need(ctx.mc_mean, "mc_mean")?;
            let second = need(ctx.mc_second_moment, "mc_second_moment")?;
            (second - mean * mean) / (d_r + 1.0)
        }
        McConcentration => {
            let d_r = need_dim(ctx.d_r, "d_r")?;
            let eps = need_nonneg(ctx.epsilon, "epsilon")?;
            let b = need_positive(ctx.norm_b, "norm_b")?;
            two_exp(C_MICROCANONICAL * d_r * eps * eps / (b * b))
        }
        McVarianceConcentration => {
            let forms = variance_concentration_forms(ctx)?;
            forms.min_over_delta
        }
        CoarseGrained => {
            let d_r = need_dim(ctx.d_r, "d_r")?;
            let eps = need_nonneg(ctx.epsilon, "epsilon")?;
            let m = need_dim(ctx.m, "m")?;
            let a = need_positive(ctx.norm_a, "norm_a")?;
            2.0 * m * (-(C_MICROCANONICAL * d_r * eps * eps / (m * m * a * a))).exp()
        }
        CanonicalReduction => {
            let d_r = need_dim(ctx.d_r, "d_r")?;
            let eps = need_nonneg(ctx.epsilon, "epsilon")?;
            two_exp(C_CANONICAL * d_r * eps * eps)
        }
        DeffSubspaceMean => need_dim(ctx.d_r, "d_r")? / 2.0,
        DeffSubspaceTail => two_exp(C_DEFF_TAIL * need_dim(ctx.d_r, "d_r")?.sqrt()),
        DeffProductMean => {
            let d_sr = need_dim(ctx.d_sr, "d_sr")?;
            let d_br = need_dim(ctx.d_br, "d_br")?;
            (d_sr + 1.0) * (d_br + 1.0) / 4.0
        }
        DeffMeanEnergy => {
            let spectrum = need_spectrum(ctx)?;
            let e = need_positive(ctx.energy, "energy")?;
            let d = spectrum.len() as f64;
            2.0 * e * e / (d * d) * spectrum.iter().map(|&ek| 1.0 / (ek * ek)).sum::<f64>()
        }
        ExpectationEquilibration => {
            let a = need_nonneg(ctx.norm_a, "norm_a")?;
            a * a / need_positive(ctx.d_eff, "d_eff")?
        }
        SubsystemEquilibration => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            0.5 * (d_s / need_positive(ctx.d_eff_b, "d_eff_b")?).sqrt()
        }
        PurityEquilibration => {
            need_nonneg(ctx.purity_omega_b, "purity_omega_b")?
                + 2.0 * need_nonneg(ctx.purity_omega, "purity_omega")?
        }
        Ergodicity => {
            let d_r = need_dim(ctx.d_r, "d_r")?;
            let eps = need_nonneg(ctx.epsilon, "epsilon")?;
            let b = need_positive(ctx.norm_dephased_b, "norm_dephased_b")?;
            two_exp(C_MICROCANONICAL * d_r * eps * eps / (b * b))
        }
        Speed => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            need_nonneg(ctx.norm_h_s_sb, "norm_h_s_sb")?
                * (d_s.powi(3) / need_positive(ctx.d_eff, "d_eff")?).sqrt()
        }
        PurityRateAvg => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            2.0 * need_nonneg(ctx.norm_h_sb, "norm_h_sb")?
                * (d_s.powi(3) / need_positive(ctx.d_eff, "d_eff")?).sqrt()
        }
        PurityRateInstant => {
            let p = need_nonneg(ctx.purity_s, "purity_s")?;
            let i = need_nonneg(ctx.mutual_information, "mutual_information")?;
            2.0 * p * (2.0 * i).sqrt() * need_nonneg(ctx.norm_h_sb, "norm_h_sb")?
        }
        CommutatorLower => 2.0 * need_nonneg(ctx.pairing_sum, "pairing_sum")?,
        Decoherence => need_nonneg(ctx.norm_h_sb, "norm_h_sb")? + need_nonneg(ctx.speed, "speed")?,
        Isi => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            let a = need_positive(ctx.d_eff_b, "d_eff_b")?;
            let b = need_positive(ctx.d_eff_b_other, "d_eff_b_other")?;
            0.5 * (d_s / a).sqrt() + 0.5 * (d_s / b).sqrt() + need_nonneg(ctx.delta, "delta")?
        }
        IsiLindenDelta => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            let d_r = need_dim(ctx.d_r, "d_r")?;
            (d_s * need_nonneg(ctx.delta, "delta")? / (4.0 * d_r)).sqrt()
        }
        EntangledStateTail => entangled_tail(ctx)?,
        EntangledEigsTail => need_dim(ctx.d, "d")? * entangled_tail(ctx)?,
        Levy => {
            let d = need_dim(ctx.d, "d")?;
            let eps = need_nonneg(ctx.epsilon, "epsilon")?;
            let eta = need_positive(ctx.eta, "eta")?;
            two_exp(C_LEVY * d * eps * eps / (eta * eta))
        }
        EqTimeHeisenberg => 1.0 / need_positive(ctx.delta_e, "delta_e")?,
        EqTimePurity => {
            let d_s = need_dim(ctx.d_s, "d_s")?;
            let p_eq = need_positive(ctx.p_eq, "p_eq")?;
            let h = need_positive(ctx.norm_h_sb, "norm_h_sb")?;
            if d_s < 2.0 {
                return Err(Error::InvalidArgument(
                    "EQ_TIME_PURITY needs d_s >= 2".into(),
                ));
            }
            (1.0 / p_eq).ln() / (4.0 * d_s.ln().sqrt() * h)
        }
    })
}

fn entangled_tail(ctx: &BoundContext) -> Result<f64> {
    let d_s = need_dim(ctx.d_s, "d_s")?;
    let d_b = need_dim(ctx.d_b, "d_b")?;
    let eps = need_positive(ctx.epsilon, "epsilon")?;
    let log = LN_2 + 2.0 * d_s * (10.0 * d_s / eps).ln() - C_ENTANGLED * d_b * eps * eps;
    Ok(log.exp())
}

/// The three readings of the variance-concentration bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConcentrationForms {
    /// `min_{0≤δ≤ε} 2e^{−C d_R (ε−δ)} + 2e^{−C d_R δ²}`.
    pub min_over_delta: f64,
    /// Minimizing `δ` found numerically.
    pub argmin: f64,
    /// The bracketed expression evaluated at `δ* = ½(√(1+4ε) − 1)`, which
    /// equals `4e^{−C d_R (1+2ε−√(1+4ε))/2}`.
    pub closed: f64,
    /// `4e^{−C d_R (1+2ε−√(1+4ε))}` with the exponent as printed, which can
    /// fall below `min_over_delta`.
    pub closed_as_printed: f64,
}

pub fn variance_concentration_forms(ctx: &BoundContext) -> Result<VarianceConcentrationForms> {
    let d_r = need_dim(ctx.d_r, "d_r")?;
    let eps = need_nonneg(ctx.epsilon, "epsilon")?;
    let c = C_MICROCANONICAL * d_r;
    let f = |delta: f64| two_exp(c * (eps - delta)) + two_exp(c * delta * delta);

    const GRID: usize = 4096;
    let mut best = (0.0, f(0.0));
    for i in 1..=GRID {
        let delta = eps * i as f64 / GRID as f64;
        let v = f(delta);
        if v < best.1 {
            best = (delta, v);
        }
    }
    // golden-section refinement inside the neighbouring grid cells
    let step = eps / GRID as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(eps));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) < best.1 {
        best = (mid, f(mid));
    }

    let root = (1.0 + 4.0 * eps).sqrt();
    let delta_star = 0.5 * (root - 1.0);
    let closed = f(delta_star);
    if f(delta_star) < best.1 {
        best = (delta_star, closed);
    }
    let closed_as_printed = 4.0 * (-(c * (1.0 + 2.0 * eps - root))).exp();
    debug_assert!(closed >= best.1);
    Ok(VarianceConcentrationForms {
        min_over_delta: best.1,
        argmin: best.0,
        closed,
        closed_as_printed,
    })
}

/// Every printed form of a catalog entry, first entry equal to
/// [`evaluate_bound`]. Forms whose context fields are missing are skipped.
pub fn evaluate_forms(theorem: TheoremId, ctx: &BoundContext) -> Result<Vec<(&'static str, f64)>> {
    use TheoremId::*;
    let primary = evaluate_bound(theorem, ctx)?;
    let mut forms = vec![("primary", primary)];
    let mut push = |name: &'static str, v: Result<f64>| {
        if let Ok(v) = v {
            forms.push((name, v));
        }
    };
    match theorem {
        McVarianceConcentration => {
            let vc = variance_concentration_forms(ctx)?;
            push("closed", Ok(vc.closed));
            push("closed_as_printed", Ok(vc.closed_as_printed));
        }
        CanonicalReduction => push("threshold", canonical_threshold(ctx)),
        DeffMeanEnergy => {
            let spectrum = need_spectrum(ctx)?;
            let d = spectrum.len() as f64;
            let e0 = ctx
                .e0
                .unwrap_or_else(|| spectrum.iter().copied().fold(f64::INFINITY, f64::min));
            let e_mean = ctx
                .e_mean
                .unwrap_or_else(|| spectrum.iter().sum::<f64>() / d);
            push("deff_lower", Ok(1.0 / primary));
            push("purity_crude", Ok(2.0 / d * e_mean * e_mean / (e0 * e0)));
            push("deff_crude", Ok(d / 2.0 * e0 * e0 / (e_mean * e_mean)));
        }
        SubsystemEquilibration => push(
            "global",
            need_dim(ctx.d_s, "d_s")
                .and_then(|d_s| Ok(0.5 * (d_s * d_s / need_positive(ctx.d_eff, "d_eff")?).sqrt())),
        ),
        PurityEquilibration => push(
            "global",
            need_dim(ctx.d_s, "d_s")
                .and_then(|d_s| Ok((d_s + 2.0) / need_positive(ctx.d_eff, "d_eff")?)),
        ),
        PurityRateInstant => {
            push(
                "operator_norm",
                need_nonneg(ctx.norm_rho_s, "norm_rho_s").and_then(|n| {
                    Ok(2.0
                        * n
                        * (2.0 * need_nonneg(ctx.mutual_information, "mutual_information")?).sqrt()
                        * need_nonneg(ctx.norm_h_sb, "norm_h_sb")?)
                }),
            );
            push(
                "pure",
                need_nonneg(ctx.purity_s, "purity_s").and_then(|p| {
                    Ok(4.0
                        * p
                        * need_nonneg(ctx.entropy_s, "entropy_s")?.sqrt()
                        * need_nonneg(ctx.norm_h_sb, "norm_h_sb")?)
                }),
            );
        }
        _ => {}
    }
    Ok(forms)
}

/// Deviation threshold `2ε + 2√(d_S/d_eff(ρ^B_mc))` of the reduced-state
/// concentration bound.
pub fn canonical_threshold(ctx: &BoundContext) -> Result<f64> {
    let eps = need_nonneg(ctx.epsilon, "epsilon")?;
    let d_s = need_dim(ctx.d_s, "d_s")?;
    Ok(2.0 * eps + 2.0 * (d_s / need_positive(ctx.d_eff_b, "d_eff_b")?).sqrt())
}

/// Largest value a probability- or distance-type right-hand side can take
/// while still carrying information.
pub fn trivial_bound(theorem: TheoremId, ctx: &BoundContext) -> Option<f64> {
    use TheoremId::*;
    if theorem.is_probability() {
        return Some(1.0);
    }
    match theorem {
        SubsystemEquilibration | Isi | IsiLindenDelta | PurityEquilibration => Some(1.0),
        ExpectationEquilibration => ctx.norm_a.map(|a| a * a),
        _ => None,
    }
}

/// An empirical statistic with its standard error (0 for exact values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub theorem: TheoremId,
    pub lhs: f64,
    pub stderr: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub vacuous: bool,
    /// Signed slack in the direction of the relation; negative means the
    /// comparison failed before the statistical allowance.
    pub margin: f64,
    pub trial: u64,
}

impl BoundReport {
    pub fn with_trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }

    /// An unsatisfied bound that carries information.
    pub fn is_violation(&self) -> bool {
        !self.satisfied && !self.vacuous
    }
}

/// Evaluates the catalog entry and compares `lhs` against it.
pub fn check_bound(theorem: TheoremId, lhs: Estimate, ctx: &BoundContext) -> Result<BoundReport> {
    let rhs = evaluate_bound(theorem, ctx)?;
    Ok(compare(theorem, lhs, rhs, trivial_bound(theorem, ctx)))
}

/// Compares `lhs` against an explicitly supplied right-hand side using the
/// relation of `theorem`.
pub fn compare(theorem: TheoremId, lhs: Estimate, rhs: f64, trivial: Option<f64>) -> BoundReport {
    let allowance = STDERR_ALLOWANCE * lhs.stderr + FLOAT_SLACK * rhs.abs().max(1.0);
    let (margin, satisfied) = match theorem.relation() {
        Relation::AtMost => {
            let m = rhs - lhs.value;
            (m, m + allowance >= 0.0)
        }
        Relation::AtLeast => {
            let m = lhs.value - rhs;
            (m, m + allowance >= 0.0)
        }
        Relation::Equals => {
            let m = -(lhs.value - rhs).abs();
            (m, m + allowance >= 0.0)
        }
        Relation::Approximately { rel_tol } => {
            let m = rel_tol * rhs.abs() - (lhs.value - rhs).abs();
            (m, m + allowance >= 0.0)
        }
    };
    let vacuous = theorem.relation() == Relation::AtMost && trivial.is_some_and(|t| rhs >= t);
    BoundReport {
        theorem,
        lhs: lhs.value,
        stderr: lhs.stderr,
        rhs,
        satisfied: satisfied && lhs.value.is_finite(),
        vacuous,
        margin,
        trial: 0,
    }
}

/// Result of maximizing `Σ_(k,l) |a_k − a_l| |ρ_kl|` over sets of disjoint
/// index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub sum: f64,
    pub pairs: Vec<(usize, usize)>,
    /// False when the greedy fallback was used; `sum` is then a lower bound
    /// on the maximum.
    pub exact: bool,
}

/// Maximum-weight matching on the complete graph with edge weights
/// `|a_k − a_l| |ρ_kl|`, with `ρ` expressed in the eigenbasis of the
/// observable whose eigenvalues are `values`.
pub fn max_pairing(values: &[f64], rho: &ComplexMatrix) -> Result<Pairing> {
    let d = values.len();
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{d} values for a {}x{} matrix",
            rho.rows(),
            rho.cols()
        )));
    }
    let w = |k: usize, l: usize| (values[k] - values[l]).abs() * rho[(k, l)].norm();
    if d <= EXACT_PAIRING_MAX_DIM {
        Ok(exact_pairing(d, w))
    } else {
        Ok(greedy_pairing(d, w))
    }
}

pub fn max_pairing_offdiagonal_sum(values: &[f64], rho: &ComplexMatrix) -> Result<f64> {
    Ok(max_pairing(values, rho)?.sum)
}

fn exact_pairing(d: usize, w: impl Fn(usize, usize) -> f64) -> Pairing {
    // best[mask] is the optimum over the vertices in `mask`; the lowest vertex
    // is either left alone or paired with another member.
    let full = (1usize << d) - 1;
    let mut best = vec![0.0f64; full + 1];
    let mut choice = vec![usize::MAX; full + 1];
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut value = best[rest];
        let mut pick = usize::MAX;
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let v = w(i, j) + best[rest & !(1 << j)];
            if v > value {
                value = v;
                pick = j;
            }
        }
        best[mask] = value;
        choice[mask] = pick;
    }
    let mut pairs = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        mask &= !(1 << i);
        let j = choice[mask | (1 << i)];
        if j != usize::MAX {
            pairs.push((i, j));
            mask &= !(1 << j);
        }
    }
    Pairing {
        sum: best[full],
        pairs,
        exact: true,
    }
}

fn greedy_pairing(d: usize, w: impl Fn(usize, usize) -> f64) -> Pairing {
    let mut edges: Vec<(f64, usize, usize)> = (0..d)
        .flat_map(|k| (k + 1..d).map(move |l| (k, l)))
        .map(|(k, l)| (w(k, l), k, l))
        .collect();
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used = vec![false; d];
    let mut pairs = Vec::new();
    let mut sum = 0.0;
    for (weight, k, l) in edges {
        if weight > 0.0 && !used[k] && !used[l] {
            used[k] = true;
            used[l] = true;
            pairs.push((k, l));
            sum += weight;
        }
    }
    Pairing {
        sum,
        pairs,
        exact: false,
    }
}

/// Pairing sum for `ρ` against the Hermitian observable `a`, both given in
/// the same basis.
pub fn commutator_pairing(rho: &ComplexMatrix, a: &ComplexMatrix) -> Result<Pairing> {
    let eig = hermitian_eig(a)?;
    let v = &eig.eigenbasis;
    let in_basis = v.adjoint().matmul(rho)?.matmul(v)?;
    max_pairing(&eig.eigenvalues, &in_basis)
}

/// Largest pairwise trace distance between the system marginals of the
/// selected eigenvectors.
pub fn max_marginal_spread(h: &Hamiltonian, indices: &[usize]) -> Result<f64> {
    let marginals = eigen_marginals(h, indices)?;
    let mut worst = 0.0f64;
    for i in 0..marginals.len() {
        for j in i + 1..marginals.len() {
            worst = worst.max(trace_distance_matrices(&marginals[i], &marginals[j])?);
        }
    }
    Ok(worst)
}

/// `max_k 2·D(Tr_B|E_k⟩⟨E_k|, I/d_S)` over the selected eigenvectors.
pub fn max_marginal_entanglement_defect(h: &Hamiltonian, indices: &[usize]) -> Result<f64> {
    let d_s = h.dims().d_s;
    let mixed = ComplexMatrix::identity(d_s).scale_real(1.0 / d_s as f64);
    let mut worst = 0.0f64;
    for m in eigen_marginals(h, indices)? {
        worst = worst.max(2.0 * trace_distance_matrices(&m, &mixed)?);
    }
    Ok(worst)
}

fn eigen_marginals(h: &Hamiltonian, indices: &[usize]) -> Result<Vec<ComplexMatrix>> {
    let dims = h.dims();
    indices
        .iter()
        .map(|&k| {
            if k >= h.dim() {
                return Err(Error::InvalidArgument(format!(
                    "eigenvector index {k} out of range"
                )));
            }
            Ok(reduce_pure(
                &h.eigenvector(k),
                dims.d_s,
                dims.d_b,
                Subsystem::S,
            ))
        })
        .collect()
}

/// `δ = Σ_k ⟨E_k|Π_R/d_R|E_k⟩ Tr_S[(Tr_B|E_k⟩⟨E_k|)²]`.
pub fn linden_delta(h: &Hamiltonian, subspace: &Subspace) -> Result<f64> {
    if subspace.dims() != h.dims() {
        return Err(Error::DimensionMismatch(
            "subspace and Hamiltonian dimensions differ".into(),
        ));
    }
    let dims = h.dims();
    let d_r = subspace.dim() as f64;
    let mut delta = 0.0;
    for k in 0..h.dim() {
        let v = h.eigenvector(k);
        let weight: f64 = subspace
            .basis()
            .iter()
            .map(|b| crate::linalg::inner(b, &v).norm_sqr())
            .sum::<f64>()
            / d_r;
        if weight > 0.0 {
            delta += weight * purity_matrix(&reduce_pure(&v, dims.d_s, dims.d_b, Subsystem::S));
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;
    use crate::linalg::{schatten_norm, NormKind};
    use crate::states::Dims;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn catalog_round_trips_through_strings() {
        assert_eq!(TheoremId::ALL.len(), 25);
        for &id in TheoremId::ALL {
            assert_eq!(id.as_str().parse::<TheoremId>().unwrap(), id);
            assert!(!id.formula().is_empty());
        }
        assert!("NOPE".parse::<TheoremId>().is_err());
    }

    #[test]
    fn reference_values() {
        let ctx = BoundContext {
            norm_a: Some(1.0),
            d_eff: Some(100.0),
            ..Default::default()
        };
        assert!(close(
            evaluate_bound(TheoremId::ExpectationEquilibration, &ctx).unwrap(),
            0.01,
            1e-14
        ));

        let ctx = BoundContext {
            d_s: Some(2),
            d_eff_b: Some(200.0),
            ..Default::default()
        };
        assert!(close(
            evaluate_bound(TheoremId::SubsystemEquilibration, &ctx).unwrap(),
            0.05,
            1e-14
        ));

        let ctx = BoundContext {
            d_r: Some(64),
            ..Default::default()
        };
        assert_eq!(
            evaluate_bound(TheoremId::DeffSubspaceMean, &ctx).unwrap(),
            32.0
        );

        let ctx = BoundContext {
            d_sr: Some(4),
            d_br: Some(32),
            ..Default::default()
        };
        assert_eq!(
            evaluate_bound(TheoremId::DeffProductMean, &ctx).unwrap(),
            41.25
        );
    }

    #[test]
    fn microcanonical_tail_is_vacuous_at_desk_scale() {
        let ctx = BoundContext {
            d_r: Some(1000),
            epsilon: Some(0.1),
            norm_b: Some(1.0),
            ..Default::default()
        };
        let rhs = evaluate_bound(TheoremId::McConcentration, &ctx).unwrap();
        // 1/(36π³) = 8.95876e-4, so the exponent is 8.95876e-3.
        assert!((C_MICROCANONICAL - 8.958_759_565e-4).abs() < 1e-13);
        assert!((rhs - 2.0 * (-10.0 * C_MICROCANONICAL).exp()).abs() < 1e-15);
        assert!((rhs - 1.982_162_5).abs() < 1e-6);
        let report = check_bound(TheoremId::McConcentration, Estimate::exact(0.0), &ctx).unwrap();
        assert!(report.vacuous && report.satisfied && !report.is_violation());
    }

    #[test]
    fn missing_fields_are_named() {
        let err = evaluate_bound(
            TheoremId::Levy,
            &BoundContext {
                d: Some(10),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(err, Error::MissingContext("epsilon"));
        let err = evaluate_bound(
            TheoremId::DeffSubspaceMean,
            &BoundContext {
                d_r: Some(0),
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn every_entry_evaluates_on_a_full_context() {
        let ctx = BoundContext {
            d: Some(64),
            d_s: Some(2),
            d_b: Some(32),
            d_r: Some(64),
            d_sr: Some(2),
            d_br: Some(32),
            norm_b: Some(1.0),
            norm_a: Some(1.0),
            norm_h_sb: Some(0.1),
            norm_h_s_sb: Some(1.0),
            norm_dephased_b: Some(1.0),
            d_eff: Some(30.0),
            d_eff_b: Some(20.0),
            d_eff_b_other: Some(25.0),
            epsilon: Some(0.2),
            delta: Some(0.01),
            m: Some(3),
            eta: Some(1.0),
            energy: Some(1.5),
            e0: Some(1.0),
            e_mean: Some(2.0),
            spectrum: Some(vec![1.0, 1.5, 2.0, 3.0]),
            p_eq: Some(0.6),
            delta_e: Some(0.5),
            mc_mean: Some(0.5),
            mc_second_moment: Some(0.5),
            purity_omega_b: Some(0.05),
            purity_omega: Some(0.03),
            purity_s: Some(0.8),
            norm_rho_s: Some(0.85),
            mutual_information: Some(0.3),
            entropy_s: Some(0.15),
            pairing_sum: Some(0.2),
            speed: Some(0.1),
        };
        for &id in TheoremId::ALL {
            let v = evaluate_bound(id, &ctx).unwrap();
            assert!(v.is_finite() && v >= 0.0, "{id}: {v}");
            let forms = evaluate_forms(id, &ctx).unwrap();
            assert_eq!(forms[0].1, v);
        }
        let forms = evaluate_forms(TheoremId::PurityRateInstant, &ctx).unwrap();
        assert_eq!(forms.len(), 3);
        // pure form agrees with the mutual-information form when I = 2S
        let pure_ctx = BoundContext {
            mutual_information: Some(0.3),
            entropy_s: Some(0.15),
            ..ctx
        };
        let forms = evaluate_forms(TheoremId::PurityRateInstant, &pure_ctx).unwrap();
        assert!(close(forms[0].1, forms[2].1, 1e-14));
    }

    #[test]
    fn variance_concentration_forms_are_consistent() {
        for (d_r, eps) in [
            (32, 0.1),
            (1000, 0.5),
            (100_000, 0.3),
            (10_000_000, 0.05),
            (10, 0.0),
        ] {
            let ctx = BoundContext {
                d_r: Some(d_r),
                epsilon: Some(eps),
                ..Default::default()
            };
            let f = variance_concentration_forms(&ctx).unwrap();
            assert!(f.closed >= f.min_over_delta, "{f:?}");
            assert!(f.argmin >= 0.0 && f.argmin <= eps);
            let root = (1.0 + 4.0 * eps).sqrt();
            let expected =
                4.0 * (-(C_MICROCANONICAL * d_r as f64 * (1.0 + 2.0 * eps - root) / 2.0)).exp();
            assert!(close(f.closed, expected, 1e-12));
        }
        // deep in the tail the printed exponent undercuts the minimum
        let ctx = BoundContext {
            d_r: Some(10_000_000),
            epsilon: Some(0.05),
            ..Default::default()
        };
        let f = variance_concentration_forms(&ctx).unwrap();
        assert!(f.closed_as_printed < f.min_over_delta);
    }

    #[test]
    fn entangled_tail_handles_overflow() {
        let ctx = BoundContext {
            d: Some(128),
            d_s: Some(2),
            d_b: Some(64),
            epsilon: Some(0.05),
            ..Default::default()
        };
        let state = evaluate_bound(TheoremId::EntangledStateTail, &ctx).unwrap();
        let eigs = evaluate_bound(TheoremId::EntangledEigsTail, &ctx).unwrap();
        assert!(state > 1.0);
        assert!(close(eigs, 128.0 * state, 1e-12));
        let report = check_bound(TheoremId::EntangledEigsTail, Estimate::exact(1.0), &ctx).unwrap();
        assert!(report.vacuous && report.satisfied);
    }

    #[test]
    fn comparison_rules() {
        let ctx = BoundContext {
            norm_a: Some(1.0),
            d_eff: Some(100.0),
            ..Default::default()
        };
        let r = check_bound(
            TheoremId::ExpectationEquilibration,
            Estimate::exact(0.008),
            &ctx,
        )
        .unwrap();
        assert!(r.satisfied && !r.vacuous && r.margin > 0.0);
        let r = check_bound(
            TheoremId::ExpectationEquilibration,
            Estimate::exact(0.02),
            &ctx,
        )
        .unwrap();
        assert!(r.is_violation());
        let r = check_bound(
            TheoremId::ExpectationEquilibration,
            Estimate::new(0.0105, 0.001),
            &ctx,
        )
        .unwrap();
        assert!(r.satisfied);

        let ctx = BoundContext {
            d_r: Some(32),
            mc_mean: Some(0.5),
            mc_second_moment: Some(0.5),
            ..Default::default()
        };
        let rhs = evaluate_bound(TheoremId::McVarianceIdentity, &ctx).unwrap();
        assert!(close(rhs, 0.25 / 33.0, 1e-15));
        let r = check_bound(TheoremId::McVarianceIdentity, Estimate::exact(rhs), &ctx).unwrap();
        assert!(r.satisfied && r.margin == 0.0);
        let r = check_bound(
            TheoremId::McVarianceIdentity,
            Estimate::new(rhs * 1.1, 0.0001),
            &ctx,
        )
        .unwrap();
        assert!(!r.satisfied);
        let r = check_bound(
            TheoremId::McVarianceIdentity,
            Estimate::new(rhs * 0.9, 0.0001),
            &ctx,
        )
        .unwrap();
        assert!(!r.satisfied);

        let ctx = BoundContext {
            d_r: Some(64),
            ..Default::default()
        };
        assert!(
            check_bound(TheoremId::DeffSubspaceMean, Estimate::exact(40.0), &ctx)
                .unwrap()
                .satisfied
        );
        assert!(
            !check_bound(TheoremId::DeffSubspaceMean, Estimate::exact(20.0), &ctx)
                .unwrap()
                .satisfied
        );

        let ctx = BoundContext {
            spectrum: Some(vec![1.0, 3.0]),
            energy: Some(1.5),
            ..Default::default()
        };
        let rhs = evaluate_bound(TheoremId::DeffMeanEnergy, &ctx).unwrap();
        assert!(close(rhs, 2.0 * 2.25 / 4.0 * (1.0 + 1.0 / 9.0), 1e-14));
        assert!(
            check_bound(TheoremId::DeffMeanEnergy, Estimate::exact(rhs * 1.09), &ctx)
                .unwrap()
                .satisfied
        );
        assert!(
            !check_bound(TheoremId::DeffMeanEnergy, Estimate::exact(rhs * 1.2), &ctx)
                .unwrap()
                .satisfied
        );
    }

    #[test]
    fn equilibration_time_bounds() {
        let ctx = BoundContext {
            d_s: Some(2),
            p_eq: Some(0.5),
            norm_h_sb: Some(0.1),
            delta_e: Some(4.0),
            ..Default::default()
        };
        let t = evaluate_bound(TheoremId::EqTimePurity, &ctx).unwrap();
        assert!(close(t, 2f64.ln() / (0.4 * 2f64.ln().sqrt()), 1e-14));
        assert_eq!(
            evaluate_bound(TheoremId::EqTimeHeisenberg, &ctx).unwrap(),
            0.25
        );
        assert!(
            check_bound(TheoremId::EqTimeHeisenberg, Estimate::exact(1.0), &ctx)
                .unwrap()
                .satisfied
        );
    }

    #[test]
    fn pairing_examples() {
        let plus = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let p = max_pairing(&[0.0, 1.0], &plus).unwrap();
        assert!(p.exact);
        assert!(close(p.sum, 0.5, 1e-15));
        let a = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let norm = schatten_norm(
            &commutator(&plus, &a)
                .unwrap()
                .scale(Complex64::new(0.0, 1.0)),
            NormKind::Trace,
        )
        .unwrap();
        assert!(close(norm, 1.0, 1e-12));
        assert!(close(2.0 * p.sum, norm, 1e-12));

        let diag = ComplexMatrix::from_real_diagonal(&[0.2, 0.3, 0.5]);
        assert_eq!(
            max_pairing_offdiagonal_sum(&[1.0, 2.0, 4.0], &diag).unwrap(),
            0.0
        );
        assert!(max_pairing(&[1.0], &diag).is_err());
    }

    #[test]
    fn exact_pairing_matches_brute_force() {
        fn brute(d: usize, w: &dyn Fn(usize, usize) -> f64, used: u32) -> f64 {
            let Some(i) = (0..d).find(|&i| used & (1 << i) == 0) else {
                return 0.0;
            };
            let mut best = brute(d, w, used | (1 << i));
            for j in i + 1..d {
                if used & (1 << j) == 0 {
                    best = best.max(w(i, j) + brute(d, w, used | (1 << i) | (1 << j)));
                }
            }
            best
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=8 {
            let weights: Vec<f64> = (0..d * d).map(|_| rng.random::<f64>()).collect();
            let w = |k: usize, l: usize| weights[k.min(l) * d + k.max(l)];
            let exact = exact_pairing(d, w);
            assert!(close(exact.sum, brute(d, &w, 0), 1e-12));
            let from_pairs: f64 = exact.pairs.iter().map(|&(k, l)| w(k, l)).sum();
            assert!(close(from_pairs, exact.sum, 1e-12));
            assert!(greedy_pairing(d, w).sum <= exact.sum + 1e-12);
        }
    }

    #[test]
    fn greedy_used_above_exact_limit() {
        let d = EXACT_PAIRING_MAX_DIM + 2;
        let values: Vec<f64> = (0..d).map(|k| k as f64).collect();
        let rho = ComplexMatrix::from_fn(d, d, |_, _| Complex64::new(1.0 / d as f64, 0.0));
        let p = max_pairing(&values, &rho).unwrap();
        assert!(!p.exact);
        assert!(p.sum > 0.0);
    }

    #[test]
    fn product_eigenbasis_marginals() {
        // diagonal Hamiltonian: eigenvectors are product basis states
        let h = Hamiltonian::diagonal(&[0.0, 1.0, 3.0, 7.0], Dims::new(2, 2).unwrap()).unwrap();
        assert!(close(
            max_marginal_spread(&h, &[0, 1, 2, 3]).unwrap(),
            1.0,
            1e-12
        ));
        assert!(close(
            max_marginal_entanglement_defect(&h, &[0]).unwrap(),
            1.0,
            1e-12
        ));
        let sub = Subspace::full(h.dims());
        assert!(close(linden_delta(&h, &sub).unwrap(), 1.0, 1e-12));
    }
}
