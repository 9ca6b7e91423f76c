//! Instantaneous collision probability between two uncertain vehicle
//! positions.
//!
//! Each vehicle is a Gaussian (or a weighted Gaussian mixture bent along its
//! path) in the plane. The collision density of two vehicles is the integral
//! of the product of their densities, which has a closed form: a Gaussian in
//! the mean difference with the summed covariance. A constant cross-section
//! area turns that density (1/m²) into a probability.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Path, Vec2};

/// Full width at half maximum of a unit-variance Gaussian, 2√(2 ln 2).
pub const FWHM: f64 = 2.354_820_045_030_949_3;

const MAX_CONDITION: f64 = 1e12;

/// Symmetric 2×2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Cov2 { xx, xy, yy }
    }

    pub const fn diagonal(xx: f64, yy: f64) -> Self {
        Cov2 { xx, xy: 0.0, yy }
    }

    pub fn isotropic(variance: f64) -> Self {
        Cov2::diagonal(variance, variance)
    }

    pub fn determinant(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (mid - r, mid + r)
    }

    pub fn is_positive_definite(&self) -> bool {
        let (lo, _) = self.eigenvalues();
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite() && lo > 0.0
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn mahalanobis_squared(&self, v: Vec2) -> f64 {
        (self.yy * v.x * v.x - 2.0 * self.xy * v.x * v.y + self.xx * v.y * v.y)
            / self.determinant()
    }
}

impl std::ops::Add for Cov2 {
    type Output = Cov2;
    fn add(self, rhs: Cov2) -> Cov2 {
        Cov2::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

/// Normal density N(x; mean, sigma²).
pub fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Bivariate normal density at `x`.
pub fn normal_pdf_2d(x: Vec2, mean: Vec2, cov: &Cov2) -> f64 {
    let q = cov.mahalanobis_squared(x - mean);
    (-0.5 * q).exp() / (2.0 * PI * cov.determinant().sqrt())
}

/// ∫ N(x; μ₁, σ₁²) N(x; μ₂, σ₂²) dx.
pub fn gaussian_1d_overlap(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 > 0.0) {
        return Err(Error::param("sigma1", format!("must be > 0, got {sigma1}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::param("sigma2", format!("must be > 0, got {sigma2}")));
    }
    let var = sigma1 * sigma1 + sigma2 * sigma2;
    let d = mu2 - mu1;
    Ok((-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
}

/// `R(α) diag(σ_lon², σ_lat²) R(α)ᵀ`.
pub fn rotate_covariance(var_lon: f64, var_lat: f64, heading: f64) -> Cov2 {
    let (s, c) = heading.sin_cos();
    Cov2 {
        xx: var_lon * c * c + var_lat * s * s,
        xy: (var_lon - var_lat) * s * c,
        yy: var_lon * s * s + var_lat * c * c,
    }
}

/// ∫ N(x; μ₁, Σ₁) N(x; μ₂, Σ₂) dA.
///
/// Symmetric in its arguments bit-for-bit: the summed covariance and the
/// quadratic form do not depend on argument order.
pub fn gaussian_2d_overlap(mu1: Vec2, cov1: &Cov2, mu2: Vec2, cov2: &Cov2) -> Result<f64> {
    let sum = *cov1 + *cov2;
    let (lo, hi) = sum.eigenvalues();
    if !(lo > 0.0) || !(hi / lo <= MAX_CONDITION) {
        return Err(Error::Degenerate(format!(
            "summed covariance has eigenvalues {lo:e}, {hi:e}"
        )));
    }
    Ok(normal_pdf_2d(mu2, mu1, &sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthKind {
    /// σ²(s) = σ₀² + D·s.
    Brownian { diffusion: f64 },
    /// σ(s+Δs) = σ(s) + c·v(s)·Δs.
    Velocity { factor: f64 },
}

/// Longitudinal position uncertainty model over prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyGrowth {
    pub kind: GrowthKind,
    pub sigma0: f64,
}

impl UncertaintyGrowth {
    /// 6σ₀ = 4 m, the average vehicle length.
    pub const DEFAULT_SIGMA0: f64 = 4.0 / 6.0;
    pub const DEFAULT_VELOCITY_FACTOR: f64 = 0.1;
    pub const DEFAULT_DIFFUSION: f64 = 0.25;

    pub fn velocity(factor: f64, sigma0: f64) -> Result<Self> {
        UncertaintyGrowth { kind: GrowthKind::Velocity { factor }, sigma0 }.validated()
    }

    pub fn brownian(diffusion: f64, sigma0: f64) -> Result<Self> {
        UncertaintyGrowth { kind: GrowthKind::Brownian { diffusion }, sigma0 }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::param("sigma0", format!("must be > 0, got {}", self.sigma0)));
        }
        match self.kind {
            GrowthKind::Brownian { diffusion } if !(diffusion >= 0.0) => {
                Err(Error::param("diffusion", format!("must be >= 0, got {diffusion}")))
            }
            GrowthKind::Velocity { factor } if !(factor >= 0.0) => {
                Err(Error::param("velocity_factor", format!("must be >= 0, got {factor}")))
            }
            _ => Ok(self),
        }
    }
}

impl Default for UncertaintyGrowth {
    fn default() -> Self {
        UncertaintyGrowth {
            kind: GrowthKind::Velocity { factor: Self::DEFAULT_VELOCITY_FACTOR },
            sigma0: Self::DEFAULT_SIGMA0,
        }
    }
}

/// Longitudinal σ over the prediction grid, one value per entry of
/// `velocities` (sample k sits at s = k·Δs).
pub fn sigma_growth(growth: &UncertaintyGrowth, velocities: &[f64], ds: f64) -> Result<Vec<f64>> {
    if !(ds > 0.0) {
        return Err(Error::param("ds", format!("must be > 0, got {ds}")));
    }
    if let Some(v) = velocities.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::param("velocity", format!("must be >= 0, got {v}")));
    }
    let sigma0 = growth.sigma0;
    let out = match growth.kind {
        GrowthKind::Brownian { diffusion } => (0..velocities.len())
            .map(|k| (sigma0 * sigma0 + diffusion * k as f64 * ds).sqrt())
            .collect(),
        GrowthKind::Velocity { factor } => {
            let mut out = Vec::with_capacity(velocities.len());
            let mut sigma = sigma0;
            for &v in velocities {
                out.push(sigma);
                sigma += factor * v * ds;
            }
            out
        }
    };
    Ok(out)
}

/// Path-following mixture settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmmConfig {
    pub enabled: bool,
    /// Odd component count N.
    pub components: usize,
    /// Spread factor m_f > 1.
    pub spread_factor: f64,
}

impl Default for PmmConfig {
    fn default() -> Self {
        PmmConfig { enabled: true, components: 15, spread_factor: 1.2 }
    }
}

impl PmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.components % 2 == 0 {
            return Err(Error::param(
                "pmm_components",
                format!("must be odd and >= 1, got {}", self.components),
            ));
        }
        if !(self.spread_factor > 1.0) || !self.spread_factor.is_finite() {
            return Err(Error::param(
                "pmm_spread_factor",
                format!("must be > 1, got {}", self.spread_factor),
            ));
        }
        Ok(())
    }

    /// Number of components actually used; 1 when disabled.
    pub fn effective_components(&self) -> usize {
        if self.enabled { self.components } else { 1 }
    }
}

/// Longitudinal layout of a mixture, in units of the original σ.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureProfile {
    /// Component σ relative to the original σ.
    pub relative_sigma: f64,
    /// Component centre offsets relative to the original σ, ascending.
    pub relative_offsets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixtureProfile {
    /// Weights depend only on the ratios δ/σ and σ_k/σ, so the profile
    /// for σ = 1 applies unchanged to any σ.
    pub fn unit(components: usize, spread_factor: f64) -> Result<Self> {
        PmmConfig { enabled: true, components, spread_factor }.validate()?;
        let n = components;
        let half = (n as i64 - 1) / 2;
        let relative_sigma = spread_factor * FWHM / n as f64;
        let relative_offsets: Vec<f64> = (-half..=half)
            .map(|k| 2.0 * k as f64 / (spread_factor * FWHM) * relative_sigma)
            .collect();
        let peak = normal_pdf(0.0, 0.0, 1.0);
        let norm: f64 = relative_offsets
            .iter()
            .map(|&d| normal_pdf(d, 0.0, 1.0) * normal_pdf(0.0, d, relative_sigma))
            .sum();
        let weights = relative_offsets
            .iter()
            .map(|&d| normal_pdf(d, 0.0, 1.0) * peak / norm)
            .collect();
        Ok(MixtureProfile { relative_sigma, relative_offsets, weights })
    }

    /// Mixture density along the longitudinal axis for the unit σ.
    pub fn density(&self, x: f64) -> f64 {
        self.relative_offsets
            .iter()
            .zip(&self.weights)
            .map(|(&d, &w)| w * normal_pdf(x, d, self.relative_sigma))
            .sum()
    }

    /// Counts strict local maxima of the 1D profile on a dense grid over
    /// ±6σ.
    pub fn local_maxima(&self) -> usize {
        let n = 12_001;
        let values: Vec<f64> = (0..n)
            .map(|i| self.density(-6.0 + 12.0 * i as f64 / (n - 1) as f64))
            .collect();
        values
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2])
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec2,
    pub cov: Cov2,
}

/// Position uncertainty of one vehicle at one predicted instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFootprint {
    pub mean: Vec2,
    pub cov: Cov2,
    /// Always non-empty; a plain footprint holds one unit-weight component
    /// equal to (mean, cov).
    components: Vec<MixtureComponent>,
}

impl GaussianFootprint {
    pub fn plain(mean: Vec2, cov: Cov2) -> Result<Self> {
        if !cov.is_positive_definite() || !mean.is_finite() {
            return Err(Error::param("covariance", "must be symmetric positive definite"));
        }
        Ok(GaussianFootprint {
            mean,
            cov,
            components: vec![MixtureComponent { weight: 1.0, mean, cov }],
        })
    }

    /// Oriented footprint: σ_lon along `heading`, σ_lat across it.
    pub fn oriented(mean: Vec2, sigma_lon: f64, sigma_lat: f64, heading: f64) -> Result<Self> {
        Self::plain(
            mean,
            rotate_covariance(sigma_lon * sigma_lon, sigma_lat * sigma_lat, heading),
        )
    }

    pub fn is_mixture(&self) -> bool {
        self.components.len() > 1
    }

    pub fn mixture(&self) -> Option<&[MixtureComponent]> {
        self.is_mixture().then_some(self.components.as_slice())
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn density(&self, x: Vec2) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal_pdf_2d(x, c.mean, &c.cov))
            .sum()
    }

    /// Radius around `mean` containing every component centre.
    pub(crate) fn center_spread(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.mean.distance(self.mean))
            .fold(0.0, f64::max)
    }

    /// Largest covariance eigenvalue over all components.
    pub(crate) fn max_variance(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.cov.eigenvalues().1)
            .fold(0.0, f64::max)
    }
}

/// Splits the longitudinal Gaussian into `N` components placed along
/// `path` around `center_arclength`, each aligned with the local path
/// heading. The centre component sits exactly at `mean` with `heading`.
#[allow(clippy::too_many_arguments)]
pub fn build_pmm(
    mean: Vec2,
    sigma_lon: f64,
    sigma_lat: f64,
    heading: f64,
    path: &Path,
    center_arclength: f64,
    components: usize,
    spread_factor: f64,
) -> Result<GaussianFootprint> {
    if !(sigma_lon > 0.0) || !(sigma_lat > 0.0) {
        return Err(Error::param("sigma", "longitudinal and lateral sigma must be > 0"));
    }
    let profile = MixtureProfile::unit(components, spread_factor)?;
    let plain = GaussianFootprint::oriented(mean, sigma_lon, sigma_lat, heading)?;
    if components == 1 {
        return Ok(plain);
    }
    let sigma_k = profile.relative_sigma * sigma_lon;
    let var_k = sigma_k * sigma_k;
    let var_lat = sigma_lat * sigma_lat;
    let comps = profile
        .relative_offsets
        .iter()
        .zip(&profile.weights)
        .map(|(&offset, &w)| {
            let (pos, dir) = if offset == 0.0 {
                (mean, heading)
            } else {
                let pose = path.pose_at_arclength(center_arclength + offset * sigma_lon);
                (pose.position, pose.heading)
            };
            MixtureComponent {
                weight: w,
                mean: pos,
                cov: rotate_covariance(var_k, var_lat, dir),
            }
        })
        .collect();
    Ok(GaussianFootprint { mean, cov: plain.cov, components: comps })
}

/// Parameters turning two footprints into a collision probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionConfig {
    pub sigma_lat: f64,
    /// Cross-section area converting overlap density into probability, m².
    pub cross_section: f64,
    pub pmm: PmmConfig,
    pub growth: UncertaintyGrowth,
}

impl CollisionConfig {
    /// 6σ_lat = 2 m, the average vehicle width.
    pub const DEFAULT_SIGMA_LAT: f64 = 2.0 / 6.0;
    /// 4 m × 2 m.
    pub const DEFAULT_CROSS_SECTION: f64 = 8.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_lat > 0.0) {
            return Err(Error::param("sigma_lat", format!("must be > 0, got {}", self.sigma_lat)));
        }
        if !(self.cross_section > 0.0) {
            return Err(Error::param(
                "cross_section",
                format!("must be > 0, got {}", self.cross_section),
            ));
        }
        self.pmm.validate()?;
        self.growth.validated()?;
        Ok(())
    }

    /// Footprint of a vehicle at `mean`, plain or path-following depending
    /// on the PMM setting.
    pub fn footprint(
        &self,
        mean: Vec2,
        heading: f64,
        sigma_lon: f64,
        path: &Path,
        arclength: f64,
    ) -> Result<GaussianFootprint> {
        build_pmm(
            mean,
            sigma_lon,
            self.sigma_lat,
            heading,
            path,
            arclength,
            self.pmm.effective_components(),
            self.pmm.spread_factor,
        )
    }
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig {
            sigma_lat: Self::DEFAULT_SIGMA_LAT,
            cross_section: Self::DEFAULT_CROSS_SECTION,
            pmm: PmmConfig::default(),
            growth: UncertaintyGrowth::default(),
        }
    }
}

/// `A_c · Σⱼ Σₖ w₁ⱼ w₂ₖ ∫ f₁ⱼ f₂ₖ dA`, clamped to [0, 1].
pub fn collision_probability(
    a: &GaussianFootprint,
    b: &GaussianFootprint,
    cross_section: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for ca in a.components() {
        for cb in b.components() {
            total += ca.weight * cb.weight * gaussian_2d_overlap(ca.mean, &ca.cov, cb.mean, &cb.cov)?;
        }
    }
    Ok((cross_section * total).clamp(0.0, 1.0))
}
