//! Vertical turbulence model for a satellite-to-ground path.
//!
//! Altitudes `h` are metres above sea level. Path coordinates `z` are metres
//! measured from the transmitter (the satellite) along the line of sight, so
//! the ground station sits at `z = (H - h0) sec(theta_z)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Physical parameters of one satellite-to-ground channel, SI units.
///
/// The JSON form uses the field names exactly as written in the `serde`
/// attributes below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(rename = "satellite_altitude_H")]
    pub satellite_altitude: f64,
    #[serde(rename = "ground_altitude_h0")]
    pub ground_altitude: f64,
    pub cn2_ground: f64,
    #[serde(rename = "outer_scale_L0")]
    pub outer_scale: f64,
    #[serde(rename = "inner_scale_l0")]
    pub inner_scale: f64,
    #[serde(rename = "rms_wind_v")]
    pub rms_wind: f64,
    #[serde(rename = "zenith_angle_theta_z")]
    pub zenith_angle: f64,
    #[serde(rename = "wavelength_lambda")]
    pub wavelength: f64,
    #[serde(rename = "beam_waist_w0")]
    pub beam_waist: f64,
    #[serde(rename = "receiver_radius_Rr")]
    pub receiver_radius: f64,
    #[serde(rename = "rp_photon_number_nph")]
    pub photon_number: f64,
    #[serde(rename = "spectral_exponent_alpha")]
    pub spectral_exponent: f64,
    pub anisotropy_ratio: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::channel_one()
    }
}

impl ChannelConfig {
    /// H = 300 km, h0 = 2 km, Cn²(0) = 1.7e-14, R_r = 0.75 m.
    ///
    /// The channel description elsewhere quotes R_r = 0.73 m; the channel
    /// table value of 0.75 m is used here.
    pub fn channel_one() -> Self {
        Self {
            satellite_altitude: 300e3,
            ground_altitude: 2e3,
            cn2_ground: 1.7e-14,
            outer_scale: 5.0,
            inner_scale: 0.025,
            rms_wind: 21.0,
            zenith_angle: 0.0,
            wavelength: 1550e-9,
            beam_waist: 0.15,
            receiver_radius: 0.75,
            photon_number: 55_000.0,
            spectral_exponent: 11.0 / 3.0,
            anisotropy_ratio: 1.0,
        }
    }

    /// Channel one with a ten times weaker ground-level Cn².
    pub fn channel_two() -> Self {
        Self {
            cn2_ground: 1.7e-15,
            ..Self::channel_one()
        }
    }

    /// Channel one lifted to a 500 km orbit with a 1.5 m receiver.
    pub fn channel_three() -> Self {
        Self {
            satellite_altitude: 500e3,
            receiver_radius: 1.5,
            ..Self::channel_one()
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn sec_zenith(&self) -> f64 {
        1.0 / self.zenith_angle.cos()
    }

    /// Slant distance from the satellite to the ground station.
    pub fn path_length(&self) -> f64 {
        (self.satellite_altitude - self.ground_altitude) * self.sec_zenith()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and > 0 (got {v})")))
            }
        }
        fn nonnegative(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and >= 0 (got {v})")))
            }
        }

        nonnegative("ground_altitude_h0", self.ground_altitude)?;
        positive("satellite_altitude_H", self.satellite_altitude)?;
        if self.satellite_altitude <= self.ground_altitude {
            return Err(Error::config(
                "satellite_altitude_H",
                format!(
                    "must exceed ground_altitude_h0 ({} <= {})",
                    self.satellite_altitude, self.ground_altitude
                ),
            ));
        }
        nonnegative("cn2_ground", self.cn2_ground)?;
        positive("outer_scale_L0", self.outer_scale)?;
        positive("inner_scale_l0", self.inner_scale)?;
        nonnegative("rms_wind_v", self.rms_wind)?;
        if !(self.zenith_angle >= 0.0 && self.zenith_angle < PI / 2.0) {
            return Err(Error::config(
                "zenith_angle_theta_z",
                format!("must lie in [0, pi/2) (got {})", self.zenith_angle),
            ));
        }
        positive("wavelength_lambda", self.wavelength)?;
        positive("beam_waist_w0", self.beam_waist)?;
        positive("receiver_radius_Rr", self.receiver_radius)?;
        positive("rp_photon_number_nph", self.photon_number)?;
        if !(self.spectral_exponent > 3.0 && self.spectral_exponent < 4.0) {
            return Err(Error::config(
                "spectral_exponent_alpha",
                format!("must lie in (3, 4) (got {})", self.spectral_exponent),
            ));
        }
        if !(self.anisotropy_ratio >= 1.0 && self.anisotropy_ratio.is_finite()) {
            return Err(Error::config(
                "anisotropy_ratio",
                format!("must be >= 1 (got {})", self.anisotropy_ratio),
            ));
        }
        Ok(())
    }
}

/// Refractive-index structure parameter as a function of altitude.
pub trait Cn2Profile: Sync {
    fn cn2(&self, altitude: f64) -> f64;
}

/// Hufnagel-Valley style profile parameterised by wind speed and ground Cn².
#[derive(Debug, Clone, Copy)]
pub struct HufnagelValley {
    pub rms_wind: f64,
    pub cn2_ground: f64,
}

impl HufnagelValley {
    pub fn from_config(config: &ChannelConfig) -> Self {
        Self {
            rms_wind: config.rms_wind,
            cn2_ground: config.cn2_ground,
        }
    }
}

impl Cn2Profile for HufnagelValley {
    fn cn2(&self, h: f64) -> f64 {
        let wind = self.rms_wind / 27.0;
        0.00594 * wind * wind * (h * 1e-5).powi(10) * (-h / 1000.0).exp()
            + 2.7e-16 * (-h / 1500.0).exp()
            + self.cn2_ground * (-h / 100.0).exp()
    }
}

/// Altitude-independent Cn².
#[derive(Debug, Clone, Copy)]
pub struct ConstantCn2(pub f64);

impl Cn2Profile for ConstantCn2 {
    fn cn2(&self, _altitude: f64) -> f64 {
        self.0
    }
}

/// Another profile multiplied by a constant factor; a factor of zero yields
/// a vacuum channel.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProfile<P> {
    pub inner: P,
    pub factor: f64,
}

impl<P: Cn2Profile> Cn2Profile for ScaledProfile<P> {
    fn cn2(&self, h: f64) -> f64 {
        self.factor * self.inner.cn2(h)
    }
}

pub fn cn2_at_altitude(altitude: f64, config: &ChannelConfig) -> Result<f64> {
    if !(altitude >= 0.0) {
        return Err(Error::domain(
            "cn2_at_altitude",
            format!("altitude must be >= 0 (got {altitude})"),
        ));
    }
    Ok(HufnagelValley::from_config(config).cn2(altitude))
}

const QUAD_TOL: f64 = 1e-6;

/// Prefactor 2.25 k^(7/6) sec^(11/6) that turns the altitude moment
/// ∫ Cn²(h) (h - h0)^(5/6) dh into a Rytov variance.
fn rytov_prefactor(config: &ChannelConfig) -> f64 {
    2.25 * config.wavenumber().powf(7.0 / 6.0) * config.sec_zenith().powf(11.0 / 6.0)
}

fn rytov_moment<P: Cn2Profile>(profile: &P, h0: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    quadrature::integrate_from_ground(
        |h| profile.cn2(h) * (h - h0).max(0.0).powf(5.0 / 6.0),
        h0,
        a,
        b,
        tol,
    )
}

fn cn2_moment<P: Cn2Profile>(profile: &P, h0: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    quadrature::integrate_from_ground(|h| profile.cn2(h), h0, a, b, tol)
}

/// Plane-wave Rytov variance of the whole downlink path, σ_R².
pub fn rytov_variance(config: &ChannelConfig) -> Result<f64> {
    rytov_variance_with(&HufnagelValley::from_config(config), config)
}

pub fn rytov_variance_with<P: Cn2Profile>(profile: &P, config: &ChannelConfig) -> Result<f64> {
    config.validate()?;
    let h0 = config.ground_altitude;
    let moment = rytov_moment(profile, h0, h0, config.satellite_altitude, QUAD_TOL)?;
    Ok(rytov_prefactor(config) * moment)
}

/// Scintillation index from the Rytov variance, valid from weak to strong
/// fluctuations (zero inner scale, plane wave).
pub fn scintillation_index(rytov: f64) -> Result<f64> {
    if !(rytov >= 0.0) {
        return Err(Error::domain(
            "scintillation_index",
            format!("Rytov variance must be >= 0 (got {rytov})"),
        ));
    }
    if rytov.is_infinite() {
        return Ok((0.51 / 0.69f64.powf(5.0 / 6.0)).exp() - 1.0);
    }
    let s125 = rytov.powf(6.0 / 5.0);
    let large = 0.49 * rytov / (1.0 + 1.11 * s125).powf(7.0 / 6.0);
    let small = 0.51 * rytov / (1.0 + 0.69 * s125).powf(5.0 / 6.0);
    Ok((large + small).exp_m1())
}

/// One thin-screen slab of the stratified atmosphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Path position of the slab edge nearest the satellite.
    pub z_start: f64,
    pub z_end: f64,
    pub screen_position: f64,
    /// ∫ Cn² dh over the slab's altitude range, m^(1/3).
    pub integrated_cn2: f64,
    /// Infinite for an inert slab; stored as `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub fried_r0: f64,
    pub altitude_bottom: f64,
    pub altitude_top: f64,
    /// The slab's own weak-fluctuation Rytov variance.
    pub rytov_share: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Layer {
    pub fn is_turbulent(&self) -> bool {
        self.integrated_cn2 > 0.0
    }
}

/// Output of [`stratify`]: slabs ordered from the satellite to the ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPlan {
    pub layers: Vec<Layer>,
    /// Vacuum stretch between the satellite and the top of the turbulent
    /// band (zero when the satellite sits inside the band).
    pub vacuum_tail: f64,
    pub total_distance: f64,
}

impl ScreenPlan {
    /// A plan whose slabs cover the same path but carry no turbulence.
    pub fn without_turbulence(&self) -> Self {
        let mut plan = self.clone();
        for layer in &mut plan.layers {
            layer.integrated_cn2 = 0.0;
            layer.fried_r0 = f64::INFINITY;
            layer.rytov_share = 0.0;
        }
        plan
    }

    pub fn total_rytov(&self) -> f64 {
        self.layers.iter().map(|l| l.rytov_share).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratifyOptions {
    /// Altitude above which the path is propagated as vacuum.
    pub ceiling: f64,
    /// Largest Rytov variance a single slab may carry.
    pub max_layer_rytov: f64,
}

impl Default for StratifyOptions {
    fn default() -> Self {
        Self {
            ceiling: 20e3,
            max_layer_rytov: 0.1,
        }
    }
}

pub fn stratify(config: &ChannelConfig, n_layers: usize) -> Result<ScreenPlan> {
    stratify_with(
        &HufnagelValley::from_config(config),
        config,
        n_layers,
        &StratifyOptions::default(),
    )
}

/// Splits the turbulent band into `n_layers` slabs carrying equal shares of
/// the Rytov moment ∫ Cn²(h)(h - h0)^(5/6) dh.
///
/// Each slab gets one screen at the height `hs` where a point turbulence of
/// strength ∫ Cn² dh reproduces the slab's Rytov moment, i.e. the
/// Cn²-weighted 5/6-power mean of the distance to the ground.
pub fn stratify_with<P: Cn2Profile>(
    profile: &P,
    config: &ChannelConfig,
    n_layers: usize,
    options: &StratifyOptions,
) -> Result<ScreenPlan> {
    config.validate()?;
    if n_layers == 0 {
        return Err(Error::config("n_layers", "must be >= 1"));
    }
    let h0 = config.ground_altitude;
    let top = options.ceiling.min(config.satellite_altitude);
    if !(top > h0) {
        return Err(Error::config(
            "ceiling",
            format!("turbulence ceiling {top} must lie above the ground station {h0}"),
        ));
    }
    let sec = config.sec_zenith();
    let k = config.wavenumber();
    let prefactor = rytov_prefactor(config);
    let tol = 1e-9;

    let total = rytov_moment(profile, h0, h0, top, tol)?;
    let mut bounds = Vec::with_capacity(n_layers + 1);
    bounds.push(h0);
    if total > 0.0 {
        let mut lower = h0;
        for i in 1..n_layers {
            let target = total * i as f64 / n_layers as f64;
            let below = rytov_moment(profile, h0, h0, lower, tol)?;
            let need = target - below;
            let (mut lo, mut hi) = (lower, top);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-7 * hi.max(1.0) {
                    break;
                }
                if rytov_moment(profile, h0, lower, mid, tol)? < need {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lower = 0.5 * (lo + hi);
            bounds.push(lower);
        }
    } else {
        let step = (top - h0) / n_layers as f64;
        bounds.extend((1..n_layers).map(|i| h0 + step * i as f64));
    }
    bounds.push(top);

    let mut layers = Vec::with_capacity(n_layers);
    for (index, pair) in bounds.windows(2).enumerate().rev() {
        let (bottom, upper) = (pair[0], pair[1]);
        let cn2 = cn2_moment(profile, h0, bottom, upper, tol)?;
        let moment = rytov_moment(profile, h0, bottom, upper, tol)?;
        let screen_altitude = if cn2 > 0.0 {
            (h0 + (moment / cn2).powf(6.0 / 5.0)).clamp(bottom, upper)
        } else {
            0.5 * (bottom + upper)
        };
        let fried_r0 = if cn2 > 0.0 {
            (0.423 * k * k * sec * cn2).powf(-3.0 / 5.0)
        } else {
            f64::INFINITY
        };
        let share = prefactor * moment;
        if share > options.max_layer_rytov {
            let min_layers = ((prefactor * total) / options.max_layer_rytov).ceil() as usize;
            return Err(Error::Stratification {
                layer: n_layers - 1 - index,
                share,
                cap: options.max_layer_rytov,
                min_layers: min_layers.max(n_layers + 1),
            });
        }
        let distance = |h: f64| (config.satellite_altitude - h) * sec;
        layers.push(Layer {
            z_start: distance(upper),
            z_end: distance(bottom),
            screen_position: distance(screen_altitude),
            integrated_cn2: cn2,
            fried_r0,
            altitude_bottom: bottom,
            altitude_top: upper,
            rytov_share: share,
        });
    }

    Ok(ScreenPlan {
        layers,
        vacuum_tail: (config.satellite_altitude - top) * sec,
        total_distance: config.path_length(),
    })
}
