//! Forcing terms of the energy balance model and the coupled Euler step.
//!
//! The fast field drives the temperature profile (absorbed shortwave minus
//! re-emission minus relaxation toward the global mean); the slow field moves
//! the iceline at rate `eps` according to the temperature excess over the
//! critical value. Outside [0, 1] every zone sees the forcing of the nearest
//! endpoint, while re-emission and transport act on the local temperature.

use serde::Serialize;

use crate::error::ConfigError;
use crate::grid::{GridSpec, Profile};

/// Base albedo at the iceline.
pub(crate) const ALBEDO_MID: f64 = 0.47;
/// Half the albedo contrast between ice and open water.
pub(crate) const ALBEDO_HALF_RANGE: f64 = 0.15;
/// Second-Legendre-mode coefficient of the insolation distribution.
pub(crate) const INSOLATION_P2: f64 = 0.482;

/// Raw parameter values as read from a config file or flags, prior to
/// validation. Field defaults are the standard model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValues {
    /// Q, solar constant (W m^-2).
    pub solar_constant: f64,
    /// A, outgoing-longwave intercept (W m^-2).
    pub olr_intercept: f64,
    /// B, outgoing-longwave slope (W m^-2 per degC).
    pub olr_slope: f64,
    /// C, relaxation transport coefficient (W m^-2 per degC); 1.6 B.
    pub transport_coeff: f64,
    /// T_c, critical iceline temperature (degC).
    pub critical_temp: f64,
    /// M, steepness of the albedo front.
    pub albedo_steepness: f64,
    /// eps, iceline response rate per degC of excess.
    pub iceline_rate: f64,
    /// Euler time step.
    pub time_step: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_points: usize,
}

impl Default for ParamValues {
    fn default() -> Self {
        ParamValues {
            solar_constant: 343.0,
            olr_intercept: 202.0,
            olr_slope: 1.9,
            transport_coeff: 3.04,
            critical_temp: -10.0,
            albedo_steepness: 25.0,
            iceline_rate: 0.025,
            time_step: 0.1,
            y_min: -0.5,
            y_max: 1.5,
            n_points: 601,
        }
    }
}

/// Validated model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    solar_constant: f64,
    olr_intercept: f64,
    olr_slope: f64,
    transport_coeff: f64,
    critical_temp: f64,
    albedo_steepness: f64,
    iceline_rate: f64,
    time_step: f64,
    grid: GridSpec,
}

impl Default for Params {
    fn default() -> Self {
        Params::try_from(ParamValues::default()).expect("defaults are valid")
    }
}

impl TryFrom<ParamValues> for Params {
    type Error = ConfigError;

    fn try_from(v: ParamValues) -> Result<Self, ConfigError> {
        fn check(key: &'static str, value: f64, ok: bool, constraint: &str) -> Result<(), ConfigError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue {
                    key,
                    value,
                    constraint: constraint.to_string(),
                })
            }
        }

        check("Q", v.solar_constant, v.solar_constant > 0.0, "Q must be > 0")?;
        check("B", v.olr_slope, v.olr_slope > 0.0, "B must be > 0")?;
        check("C", v.transport_coeff, v.transport_coeff > 0.0, "C must be > 0")?;
        check("A", v.olr_intercept, true, "A must be finite")?;
        check("T_c", v.critical_temp, true, "T_c must be finite")?;
        check(
            "M",
            v.albedo_steepness,
            v.albedo_steepness > 10.0,
            "M must be > 10 (the two-roots regime)",
        )?;
        // eps = 0 freezes the iceline and is a meaningful configuration
        check("eps", v.iceline_rate, v.iceline_rate >= 0.0, "eps must be >= 0")?;
        let dt_max = 1.0 / (v.olr_slope + v.transport_coeff);
        check(
            "dt",
            v.time_step,
            v.time_step > 0.0 && v.time_step < dt_max,
            &format!("dt must satisfy 0 < dt < 1/(B+C) \u{2248} {dt_max:.4}"),
        )?;
        let grid = GridSpec::new(v.y_min, v.y_max, v.n_points)?;
        Ok(Params {
            solar_constant: v.solar_constant,
            olr_intercept: v.olr_intercept,
            olr_slope: v.olr_slope,
            transport_coeff: v.transport_coeff,
            critical_temp: v.critical_temp,
            albedo_steepness: v.albedo_steepness,
            iceline_rate: v.iceline_rate,
            time_step: v.time_step,
            grid,
        })
    }
}

impl Params {
    pub fn solar_constant(&self) -> f64 {
        self.solar_constant
    }
    pub fn olr_intercept(&self) -> f64 {
        self.olr_intercept
    }
    pub fn olr_slope(&self) -> f64 {
        self.olr_slope
    }
    pub fn transport_coeff(&self) -> f64 {
        self.transport_coeff
    }
    pub fn critical_temp(&self) -> f64 {
        self.critical_temp
    }
    pub fn albedo_steepness(&self) -> f64 {
        self.albedo_steepness
    }
    pub fn iceline_rate(&self) -> f64 {
        self.iceline_rate
    }
    pub fn time_step(&self) -> f64 {
        self.time_step
    }
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> ParamValues {
        ParamValues {
            solar_constant: self.solar_constant,
            olr_intercept: self.olr_intercept,
            olr_slope: self.olr_slope,
            transport_coeff: self.transport_coeff,
            critical_temp: self.critical_temp,
            albedo_steepness: self.albedo_steepness,
            iceline_rate: self.iceline_rate,
            time_step: self.time_step,
            y_min: self.grid.y_min(),
            y_max: self.grid.y_max(),
            n_points: self.grid.n_points(),
        }
    }

    pub fn with_solar_constant(&self, q: f64) -> Result<Params, ConfigError> {
        let mut v = self.values();
        v.solar_constant = q;
        Params::try_from(v)
    }

    pub fn with_iceline_rate(&self, eps: f64) -> Result<Params, ConfigError> {
        let mut v = self.values();
        v.iceline_rate = eps;
        Params::try_from(v)
    }

    pub fn with_albedo_steepness(&self, m: f64) -> Result<Params, ConfigError> {
        let mut v = self.values();
        v.albedo_steepness = m;
        Params::try_from(v)
    }

    pub fn with_olr_intercept(&self, a: f64) -> Result<Params, ConfigError> {
        let mut v = self.values();
        v.olr_intercept = a;
        Params::try_from(v)
    }
}

/// Full system state: a temperature profile paired with the iceline position.
/// The iceline may transiently leave [0, 1] under the extended dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub profile: Profile,
    pub eta: f64,
}

impl State {
    pub fn new(profile: Profile, eta: f64) -> Self {
        State { profile, eta }
    }
}

/// Latitudinal insolation weight, the degree-2 Legendre approximation with
/// unit mean on [0, 1]. Zones outside the physical interval receive the value
/// of the nearest endpoint.
pub fn insolation(y: f64) -> f64 {
    let yc = y.clamp(0.0, 1.0);
    1.0 - INSOLATION_P2 * (3.0 * yc * yc - 1.0) / 2.0
}

/// Smooth iceline-dependent albedo. `y` is used as given; callers evaluating
/// the extended field clamp the zone coordinate, never the iceline.
pub fn albedo(eta: f64, y: f64, params: &Params) -> f64 {
    ALBEDO_MID + ALBEDO_HALF_RANGE * (params.albedo_steepness * (y - eta)).tanh()
}

/// Tendency of the temperature profile (degrees per time unit) under the
/// extended field: forcing is evaluated at the clamped coordinate, while
/// re-emission and transport act on the local temperature.
pub fn fast_field(state: &State, params: &Params) -> Profile {
    let spec = state.profile.spec();
    let mean = state.profile.mean_unit_interval();
    let q = params.solar_constant;
    let a = params.olr_intercept;
    let b = params.olr_slope;
    let c = params.transport_coeff;
    let values = spec
        .nodes()
        .zip(state.profile.values())
        .map(|(y, &t)| {
            let yc = y.clamp(0.0, 1.0);
            q * insolation(yc) * (1.0 - albedo(state.eta, yc, params)) - (a + b * t)
                + c * (mean - t)
        })
        .collect();
    Profile::from_values_unchecked(*spec, values)
}

/// Iceline drift rate: positive moves the ice boundary poleward.
pub fn slow_field(state: &State, params: &Params) -> f64 {
    let t_at_iceline = state.profile.eval_clamped(state.eta);
    params.iceline_rate * (t_at_iceline - params.critical_temp)
}

/// One Euler step of the coupled system. Both components advance from the
/// same input state, matching the simultaneous difference-equation form.
pub fn step(state: &State, params: &Params) -> State {
    let tendency = fast_field(state, params);
    let dt = params.time_step;
    let values = state
        .profile
        .values()
        .iter()
        .zip(tendency.values())
        .map(|(t, f)| t + dt * f)
        .collect();
    let profile = Profile::from_values_unchecked(*state.profile.spec(), values);
    let eta = state.eta + dt * slow_field(state, params);
    State { profile, eta }
}
