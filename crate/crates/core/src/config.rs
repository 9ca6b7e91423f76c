//! Run configuration: a flat TOML document whose keys carry their units.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::analysis::{validate_intervals, AnalysisConfig, Metric, TH_BINS};
use crate::baselines::{DEFAULT_SIZE_CORRECTION, TH_MIN_SPEED, TTC_MIN_CLOSING_SPEED};
use crate::collision::{CollisionConfig, GrowthKind, MixtureProfile, PmmConfig, UncertaintyGrowth};
use crate::error::{Error, Result};
use crate::ingest::{ColumnMapping, IngestOptions, SmoothingWidths, StatVariable};
use crate::predict::{BehaviorModel, PredictionGrid, DEFAULT_LANE_THRESHOLD, DEFAULT_SENSOR_RANGE};
use crate::survival::{EscapeRate, EscapeReading, RiskConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    #[default]
    Velocity,
    Brownian,
}

/// Every tunable of a run. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub metric: Metric,
    pub dt_s: f64,
    pub ds_s: f64,
    pub s_max_s: f64,
    /// Read as a time constant in s, or as a rate in 1/s with
    /// `escape_reading = "rate"`.
    pub tau0_s: f64,
    pub escape_reading: EscapeReading,
    pub growth: GrowthModel,
    pub sigma0_m: f64,
    pub sigma_lat_m: f64,
    pub velocity_factor_c: f64,
    pub diffusion_m2_per_s: f64,
    pub cross_section_m2: f64,
    pub pmm_enabled: bool,
    pub pmm_components: usize,
    pub pmm_spread_factor: f64,
    pub partner_behavior: BehaviorModel,
    pub sensor_range_m: f64,
    pub lane_threshold_m: f64,
    pub size_correction_m: f64,
    pub th_min_speed_mps: f64,
    pub ttc_min_closing_speed_mps: f64,
    pub th_bins_s: [[f64; 2]; 4],
    pub cell_size_m: f64,
    pub velocity_bin_mps: f64,
    pub smoothing_position_s: f64,
    pub smoothing_velocity_s: f64,
    pub smoothing_acceleration_s: f64,
    pub feet_to_meters: bool,
    pub column_vehicle_id: String,
    pub column_frame: String,
    pub column_x: String,
    pub column_y: String,
    /// Empty to treat every vehicle as a car.
    pub column_vehicle_class: String,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let columns = ColumnMapping::default();
        let growth = UncertaintyGrowth::default();
        RunConfig {
            metric: Metric::Th,
            dt_s: 0.1,
            ds_s: 0.1,
            s_max_s: 12.0,
            tau0_s: EscapeRate::DEFAULT_TIME_CONSTANT,
            escape_reading: EscapeReading::TimeConstant,
            growth: GrowthModel::Velocity,
            sigma0_m: growth.sigma0,
            sigma_lat_m: CollisionConfig::DEFAULT_SIGMA_LAT,
            velocity_factor_c: UncertaintyGrowth::DEFAULT_VELOCITY_FACTOR,
            diffusion_m2_per_s: UncertaintyGrowth::DEFAULT_DIFFUSION,
            cross_section_m2: CollisionConfig::DEFAULT_CROSS_SECTION,
            pmm_enabled: true,
            pmm_components: 15,
            pmm_spread_factor: 1.2,
            partner_behavior: BehaviorModel::ConstantVelocity,
            sensor_range_m: DEFAULT_SENSOR_RANGE,
            lane_threshold_m: DEFAULT_LANE_THRESHOLD,
            size_correction_m: DEFAULT_SIZE_CORRECTION,
            th_min_speed_mps: TH_MIN_SPEED,
            ttc_min_closing_speed_mps: TTC_MIN_CLOSING_SPEED,
            th_bins_s: TH_BINS.map(|(lo, hi)| [lo, hi]),
            cell_size_m: 2.0,
            velocity_bin_mps: StatVariable::Velocity.default_bin_width(),
            smoothing_position_s: 10.0,
            smoothing_velocity_s: 20.0,
            smoothing_acceleration_s: 80.0,
            feet_to_meters: true,
            column_vehicle_id: columns.vehicle_id,
            column_frame: columns.frame,
            column_x: columns.x,
            column_y: columns.y,
            column_vehicle_class: columns.vehicle_class.unwrap_or_default(),
            threads: 0,
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be a finite value > 0, got {value}")))
    }
}

fn non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be a finite value >= 0, got {value}")))
    }
}

/// Parameter errors raised by module constructors become config errors.
fn as_config<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parameter { name, reason } => Error::Config(format!("`{name}`: {reason}")),
        other => other,
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are plain TOML values")
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt_s", self.dt_s)?;
        positive("ds_s", self.ds_s)?;
        positive("s_max_s", self.s_max_s)?;
        if self.s_max_s < self.ds_s {
            return Err(Error::Config(format!(
                "`s_max_s` ({}) must be at least `ds_s` ({})",
                self.s_max_s, self.ds_s
            )));
        }
        match self.escape_reading {
            EscapeReading::TimeConstant => positive("tau0_s", self.tau0_s)?,
            EscapeReading::Rate => non_negative("tau0_s", self.tau0_s)?,
        }
        positive("sigma0_m", self.sigma0_m)?;
        positive("sigma_lat_m", self.sigma_lat_m)?;
        non_negative("velocity_factor_c", self.velocity_factor_c)?;
        non_negative("diffusion_m2_per_s", self.diffusion_m2_per_s)?;
        positive("cross_section_m2", self.cross_section_m2)?;
        positive("sensor_range_m", self.sensor_range_m)?;
        positive("lane_threshold_m", self.lane_threshold_m)?;
        non_negative("size_correction_m", self.size_correction_m)?;
        non_negative("th_min_speed_mps", self.th_min_speed_mps)?;
        non_negative("ttc_min_closing_speed_mps", self.ttc_min_closing_speed_mps)?;
        positive("cell_size_m", self.cell_size_m)?;
        positive("velocity_bin_mps", self.velocity_bin_mps)?;
        positive("smoothing_position_s", self.smoothing_position_s)?;
        positive("smoothing_velocity_s", self.smoothing_velocity_s)?;
        positive("smoothing_acceleration_s", self.smoothing_acceleration_s)?;
        for (name, value) in [
            ("column_vehicle_id", &self.column_vehicle_id),
            ("column_frame", &self.column_frame),
            ("column_x", &self.column_x),
            ("column_y", &self.column_y),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Config(format!("`{name}` must name a column")));
            }
        }
        validate_intervals(&self.th_bins())?;
        let pmm = self.pmm();
        as_config(pmm.validate())?;
        if pmm.enabled {
            let profile = as_config(MixtureProfile::unit(pmm.components, pmm.spread_factor))?;
            let maxima = profile.local_maxima();
            if maxima != 1 {
                return Err(Error::Config(format!(
                    "pmm_components = {} with pmm_spread_factor = {} gives {maxima} maxima; the mixture must stay unimodal",
                    pmm.components, pmm.spread_factor
                )));
            }
        }
        Ok(())
    }

    pub fn th_bins(&self) -> [(f64, f64); 4] {
        self.th_bins_s.map(|[lo, hi]| (lo, hi))
    }

    fn pmm(&self) -> PmmConfig {
        PmmConfig {
            enabled: self.pmm_enabled,
            components: self.pmm_components,
            spread_factor: self.pmm_spread_factor,
        }
    }

    pub fn growth(&self) -> UncertaintyGrowth {
        let kind = match self.growth {
            GrowthModel::Velocity => GrowthKind::Velocity { factor: self.velocity_factor_c },
            GrowthModel::Brownian => GrowthKind::Brownian { diffusion: self.diffusion_m2_per_s },
        };
        UncertaintyGrowth { kind, sigma0: self.sigma0_m }
    }

    pub fn analysis(&self) -> Result<AnalysisConfig> {
        self.validate()?;
        let collision = CollisionConfig {
            sigma_lat: self.sigma_lat_m,
            cross_section: self.cross_section_m2,
            pmm: self.pmm(),
            growth: self.growth(),
        };
        Ok(AnalysisConfig {
            risk: RiskConfig {
                collision,
                escape: as_config(EscapeRate::from_config(self.tau0_s, self.escape_reading))?,
                dt: self.dt_s,
                s_max: self.s_max_s,
            },
            grid: as_config(PredictionGrid::new(self.ds_s, self.s_max_s))?,
            partner_behavior: self.partner_behavior,
            sensor_range: self.sensor_range_m,
            lane_threshold: self.lane_threshold_m,
            size_correction: self.size_correction_m,
            th_min_speed: self.th_min_speed_mps,
            ttc_min_closing_speed: self.ttc_min_closing_speed_mps,
        })
    }

    pub fn ingest(&self) -> IngestOptions {
        let class = self.column_vehicle_class.trim();
        IngestOptions {
            columns: ColumnMapping {
                vehicle_id: self.column_vehicle_id.clone(),
                frame: self.column_frame.clone(),
                x: self.column_x.clone(),
                y: self.column_y.clone(),
                vehicle_class: (!class.is_empty()).then(|| class.to_string()),
            },
            dt: self.dt_s,
            feet_to_meters: self.feet_to_meters,
        }
    }

    pub fn smoothing(&self) -> SmoothingWidths {
        SmoothingWidths {
            position: self.smoothing_position_s,
            velocity: self.smoothing_velocity_s,
            acceleration: self.smoothing_acceleration_s,
        }
    }
}
