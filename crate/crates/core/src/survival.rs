//! Event rates, survival function and the integrated future risk.
//!
//! Collision probabilities per prediction step become event rates. Rates of
//! all partners add up to the critical rate; together with a constant escape
//! rate they define an inhomogeneous Poisson process whose survival function
//! discounts later events. The risk is the probability mass of critical
//! events within the prediction horizon.
//!
//! Rates are piecewise constant on the prediction grid: sample k holds on
//! `[k·Δs, (k+1)·Δs)`. Both the survival exponent and the risk integral are
//! evaluated exactly for that piecewise-constant profile.

use serde::{Deserialize, Serialize};

use crate::collision::{collision_probability, CollisionConfig};
use crate::error::{Error, Result};
use crate::geometry::VehicleId;
use crate::predict::PredictedTrajectory;

/// How the configured escape value is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EscapeReading {
    /// The value is a time constant τ₀ in seconds; the rate is 1/τ₀.
    #[default]
    TimeConstant,
    /// The value is the rate itself in 1/s.
    Rate,
}

/// Escape rate τ₀⁻¹ in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EscapeRate(f64);

impl EscapeRate {
    pub const DEFAULT_TIME_CONSTANT: f64 = 3.0;

    /// `tau0` in seconds; infinity disables escape events.
    pub fn from_time_constant(tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0) {
            return Err(Error::param("tau0", format!("must be > 0, got {tau0}")));
        }
        Ok(EscapeRate(1.0 / tau0))
    }

    pub fn from_rate(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::param("escape_rate", format!("must be finite and >= 0, got {rate}")));
        }
        Ok(EscapeRate(rate))
    }

    pub fn from_config(value: f64, reading: EscapeReading) -> Result<Self> {
        match reading {
            EscapeReading::TimeConstant => Self::from_time_constant(value),
            EscapeReading::Rate => Self::from_rate(value),
        }
    }

    pub fn per_second(self) -> f64 {
        self.0
    }
}

impl Default for EscapeRate {
    fn default() -> Self {
        EscapeRate(1.0 / Self::DEFAULT_TIME_CONSTANT)
    }
}

/// Collision rate contributed by one partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerRate {
    pub partner: VehicleId,
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub ds: f64,
    /// Total critical rate τ⁻¹_crit(s), 1/s.
    pub critical: Vec<f64>,
    pub partners: Vec<PartnerRate>,
    /// Loss-of-control rate in curves; kept as an explicit zero slot.
    pub curvature: Vec<f64>,
}

impl RateProfile {
    /// Profile with a given critical rate and no per-partner breakdown.
    pub fn from_critical(critical: Vec<f64>, ds: f64) -> Result<Self> {
        check_ds(ds)?;
        check_rates(&critical)?;
        let curvature = vec![0.0; critical.len()];
        Ok(RateProfile { ds, critical, partners: Vec::new(), curvature })
    }

    /// Sums per-partner rates into the critical rate.
    pub fn from_partners(len: usize, ds: f64, partners: Vec<PartnerRate>) -> Result<Self> {
        check_ds(ds)?;
        let mut critical = vec![0.0; len];
        for p in &partners {
            if p.rate.len() != len {
                return Err(Error::Alignment(format!(
                    "partner {} has {} rate samples, expected {len}",
                    p.partner,
                    p.rate.len()
                )));
            }
            check_rates(&p.rate)?;
            for (c, r) in critical.iter_mut().zip(&p.rate) {
                *c += r;
            }
        }
        let curvature = vec![0.0; len];
        Ok(RateProfile { ds, critical, partners, curvature })
    }

    pub fn len(&self) -> usize {
        self.critical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.critical.is_empty()
    }

    fn total_critical(&self, k: usize) -> f64 {
        self.critical[k] + self.curvature[k]
    }

    /// Mean critical rate over the interval [s_k, s_k+1].
    fn interval_critical(&self, k: usize) -> f64 {
        0.5 * (self.total_critical(k) + self.total_critical(k + 1))
    }
}

fn check_ds(ds: f64) -> Result<()> {
    if !(ds > 0.0) {
        return Err(Error::param("ds", format!("must be > 0, got {ds}")));
    }
    Ok(())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    match rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        Some(r) => Err(Error::param("rate", format!("must be finite and >= 0, got {r}"))),
        None => Ok(()),
    }
}

/// τ⁻¹_coll = P_coll / Δt, pointwise.
pub fn collision_rate(probabilities: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::param("probability", format!("must lie in [0, 1], got {p}")));
    }
    Ok(probabilities.iter().map(|p| p / dt).collect())
}

/// S(k·Δs) for every grid sample; `S[0] = 1`.
///
/// The rate is taken as the mean of the two end samples on each interval.
pub fn survival_function(rate: &RateProfile, escape: EscapeRate) -> Vec<f64> {
    let eta = escape.per_second();
    let mut out = Vec::with_capacity(rate.len());
    let mut exponent = 0.0_f64;
    for k in 0..rate.len() {
        out.push((-exponent).exp());
        if k + 1 < rate.len() {
            exponent += (eta + rate.interval_critical(k)) * rate.ds;
        }
    }
    out
}

/// Integrated critical-event probability over `[0, s_max)`.
///
/// On each grid interval the critical rate ρ is the mean of its end
/// samples and the total rate λ = η + ρ is held constant, so the interval
/// contributes ρ/λ · S(s_k) · (1 − e^{−λΔs}).
pub fn integrated_risk(rate: &RateProfile, escape: EscapeRate, s_max: f64) -> Result<f64> {
    if !(s_max >= 0.0) {
        return Err(Error::param("s_max", format!("must be >= 0, got {s_max}")));
    }
    let eta = escape.per_second();
    let survival = survival_function(rate, escape);
    let steps = ((s_max / rate.ds).round() as usize).min(rate.len().saturating_sub(1));
    let mut risk = 0.0;
    for k in 0..steps {
        let rho = rate.interval_critical(k);
        if rho == 0.0 {
            continue;
        }
        let lambda = eta + rho;
        risk += rho / lambda * survival[k] * (-(-lambda * rate.ds).exp_m1());
    }
    Ok(risk.clamp(0.0, 1.0))
}

/// Risk of one ego vehicle at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub ego: VehicleId,
    pub t: f64,
    pub risk: f64,
    pub survival: Vec<f64>,
    pub rate: RateProfile,
}

/// Parameters for combining predictions into a risk value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskConfig {
    pub collision: CollisionConfig,
    pub escape: EscapeRate,
    /// Step of the collision-probability interval Δt in τ⁻¹ = P/Δt, s.
    pub dt: f64,
    pub s_max: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            collision: CollisionConfig::default(),
            escape: EscapeRate::default(),
            dt: 0.1,
            s_max: 12.0,
        }
    }
}

/// Exponent beyond which the overlap of two footprints is treated as zero:
/// e^{-40} is below 1e-17, far under any reported risk resolution.
const NEGLIGIBLE_EXPONENT: f64 = 40.0;

fn negligible(a: &crate::collision::GaussianFootprint, b: &crate::collision::GaussianFootprint) -> bool {
    let gap = a.mean.distance(b.mean) - a.center_spread() - b.center_spread();
    if gap <= 0.0 {
        return false;
    }
    let var = a.max_variance() + b.max_variance();
    gap * gap / (2.0 * var) > NEGLIGIBLE_EXPONENT
}

/// Collision probability with `partner` at every grid sample.
pub fn pairwise_probabilities(
    ego: &PredictedTrajectory,
    partner: &PredictedTrajectory,
    collision: &CollisionConfig,
) -> Result<Vec<f64>> {
    if ego.samples.len() != partner.samples.len() || ego.ds != partner.ds {
        return Err(Error::Alignment(format!(
            "ego {} has {} samples at Δs={}, partner {} has {} at Δs={}",
            ego.vehicle,
            ego.samples.len(),
            ego.ds,
            partner.vehicle,
            partner.samples.len(),
            partner.ds
        )));
    }
    ego.samples
        .iter()
        .zip(&partner.samples)
        .map(|(a, b)| {
            let fa = collision.footprint(a.position, a.heading, a.sigma_lon, &ego.path, a.arclength)?;
            let fb = collision.footprint(b.position, b.heading, b.sigma_lon, &partner.path, b.arclength)?;
            if negligible(&fa, &fb) {
                return Ok(0.0);
            }
            collision_probability(&fa, &fb, collision.cross_section)
        })
        .collect()
}

/// Risk of `ego` against all `partners`, summing their collision rates.
pub fn scene_risk(
    t: f64,
    ego: &PredictedTrajectory,
    partners: &[PredictedTrajectory],
    config: &RiskConfig,
) -> Result<RiskProfile> {
    let mut rates = Vec::with_capacity(partners.len());
    for partner in partners {
        let probs = pairwise_probabilities(ego, partner, &config.collision)?;
        rates.push(PartnerRate { partner: partner.vehicle, rate: collision_rate(&probs, config.dt)? });
    }
    let rate = RateProfile::from_partners(ego.samples.len(), ego.ds, rates)?;
    let risk = integrated_risk(&rate, config.escape, config.s_max)?;
    let survival = survival_function(&rate, config.escape);
    Ok(RiskProfile { ego: ego.vehicle, t, risk, survival, rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DS: f64 = 0.1;

    fn closed_form(rho: f64, eta: f64, s_max: f64) -> f64 {
        rho / (rho + eta) * (1.0 - (-(rho + eta) * s_max).exp())
    }

    #[test]
    fn rate_examples() {
        assert_eq!(collision_rate(&[0.0; 5], 0.1).unwrap(), vec![0.0; 5]);
        let r = collision_rate(&[0.0, 0.05, 0.0], 0.1).unwrap();
        assert!((r[1] - 0.5).abs() < 1e-15);
        let r = collision_rate(&[1.0; 3], 0.1).unwrap();
        assert!(r.iter().all(|&x| (x - 10.0).abs() < 1e-12));
        assert!(collision_rate(&[0.1], 0.0).is_err());
        assert!(collision_rate(&[1.5], 0.1).is_err());
    }

    #[test]
    fn survival_examples() {
        let zero = RateProfile::from_critical(vec![0.0; 121], DS).unwrap();
        let s = survival_function(&zero, EscapeRate::from_time_constant(3.0).unwrap());
        assert_eq!(s[0], 1.0);
        assert!((s[30] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s[30] - 0.3679).abs() < 1e-4);

        let s = survival_function(&zero, EscapeRate::from_time_constant(f64::INFINITY).unwrap());
        assert!(s.iter().all(|&x| x == 1.0));

        // rate 0 until s = 2, then 1/s: S(4) = e^{-2}; the jump costs half
        // a grid interval
        let crit = (0..121).map(|k| if k < 20 { 0.0 } else { 1.0 }).collect();
        let p = RateProfile::from_critical(crit, DS).unwrap();
        let s = survival_function(&p, EscapeRate::from_time_constant(f64::INFINITY).unwrap());
        assert!((s[40] - (-2.05f64).exp()).abs() < 1e-12);
        assert!((s[40] - 0.1353).abs() < 0.5 * DS * 0.1353);

        // smooth ramp reaching 1/s at s = 2: exponent is exact for a linear rate
        let crit = (0..121).map(|k| (k as f64 * DS / 2.0).min(1.0)).collect();
        let p = RateProfile::from_critical(crit, DS).unwrap();
        let s = survival_function(&p, EscapeRate::from_time_constant(f64::INFINITY).unwrap());
        assert!((s[40] - (-3.0f64).exp()).abs() < 1e-12);

        assert!(EscapeRate::from_time_constant(0.0).is_err());
        assert!(EscapeRate::from_time_constant(-3.0).is_err());
    }

    #[test]
    fn escape_readings() {
        let t = EscapeRate::from_config(3.0, EscapeReading::TimeConstant).unwrap();
        let r = EscapeRate::from_config(3.0, EscapeReading::Rate).unwrap();
        assert!((t.per_second() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_second(), 3.0);
    }

    #[test]
    fn risk_examples() {
        let esc = EscapeRate::default();
        let zero = RateProfile::from_critical(vec![0.0; 121], DS).unwrap();
        assert_eq!(integrated_risk(&zero, esc, 12.0).unwrap(), 0.0);

        let one = RateProfile::from_critical(vec![1.0; 121], DS).unwrap();
        let r = integrated_risk(&one, esc, 12.0).unwrap();
        assert!((r - closed_form(1.0, 1.0 / 3.0, 12.0)).abs() < 1e-3);
        assert!((r - 0.75).abs() < 1e-3);
    }

    #[test]
    fn very_high_rate_approaches_the_critical_share() {
        // with escape η the ceiling is ρ/(ρ+η), not 1
        let esc = EscapeRate::default();
        let p = RateProfile::from_critical(vec![100.0; 121], DS).unwrap();
        let r = integrated_risk(&p, esc, 12.0).unwrap();
        assert!((r - 100.0 / (100.0 + 1.0 / 3.0)).abs() < 1e-9);
        let p = RateProfile::from_critical(vec![1e6; 121], DS).unwrap();
        assert!(1.0 - integrated_risk(&p, esc, 12.0).unwrap() < 1e-6);
    }

    #[test]
    fn partner_rates_must_align() {
        let p = vec![
            PartnerRate { partner: VehicleId(1), rate: vec![0.0; 3] },
            PartnerRate { partner: VehicleId(2), rate: vec![0.0; 4] },
        ];
        assert!(matches!(RateProfile::from_partners(3, DS, p), Err(Error::Alignment(_))));
    }

    #[test]
    fn duplicated_partner_doubles_rate() {
        let rate = vec![0.0, 0.3, 1.2, 0.4];
        let one = RateProfile::from_partners(
            4,
            DS,
            vec![PartnerRate { partner: VehicleId(1), rate: rate.clone() }],
        )
        .unwrap();
        let two = RateProfile::from_partners(
            4,
            DS,
            vec![
                PartnerRate { partner: VehicleId(1), rate: rate.clone() },
                PartnerRate { partner: VehicleId(2), rate },
            ],
        )
        .unwrap();
        for k in 0..4 {
            assert_eq!(two.critical[k], 2.0 * one.critical[k]);
        }
    }

    fn profile() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 121)
    }

    proptest! {
        #[test]
        fn survival_is_monotone_and_bounded(crit in profile(), tau0 in 0.5f64..20.0) {
            let p = RateProfile::from_critical(crit, DS).unwrap();
            let s = survival_function(&p, EscapeRate::from_time_constant(tau0).unwrap());
            prop_assert_eq!(s[0], 1.0);
            for w in s.windows(2) {
                prop_assert!(w[1] <= w[0]);
                prop_assert!(w[1] > 0.0);
            }
        }

        #[test]
        fn risk_is_bounded_and_zero_only_without_rate(crit in profile(), tau0 in 0.5f64..20.0) {
            let any = crit.iter().any(|&r| r > 0.0);
            let p = RateProfile::from_critical(crit, DS).unwrap();
            let r = integrated_risk(&p, EscapeRate::from_time_constant(tau0).unwrap(), 12.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r > 0.0, any);
        }

        #[test]
        fn stronger_escape_lowers_risk(crit in profile(), tau0 in 0.5f64..20.0, shrink in 0.1f64..0.9) {
            prop_assume!(crit.iter().any(|&r| r > 1e-3));
            let p = RateProfile::from_critical(crit, DS).unwrap();
            let slow = integrated_risk(&p, EscapeRate::from_time_constant(tau0).unwrap(), 12.0).unwrap();
            let fast = integrated_risk(&p, EscapeRate::from_time_constant(tau0 * shrink).unwrap(), 12.0).unwrap();
            prop_assert!(fast < slow);
        }

        #[test]
        fn halving_step_barely_changes_risk(rho in 0.0f64..3.0, bump in 0.0f64..3.0, center in 1.0f64..10.0) {
            // smooth bell-shaped rate profile
            let rate_at = |s: f64| rho + bump * (-(s - center).powi(2)).exp();
            let coarse: Vec<f64> = (0..121).map(|k| rate_at(k as f64 * 0.1)).collect();
            let fine: Vec<f64> = (0..241).map(|k| rate_at(k as f64 * 0.05)).collect();
            let esc = EscapeRate::default();
            let a = integrated_risk(&RateProfile::from_critical(coarse, 0.1).unwrap(), esc, 12.0).unwrap();
            let b = integrated_risk(&RateProfile::from_critical(fine, 0.05).unwrap(), esc, 12.0).unwrap();
            prop_assert!((a - b).abs() < 1e-3, "{} vs {}", a, b);
        }
    }
}
