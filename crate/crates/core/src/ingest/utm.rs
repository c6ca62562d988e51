//! Universal Transverse Mercator projection on the WGS84 ellipsoid.
//!
//! Forward and inverse mappings use the Krüger series in the third
//! flattening carried to sixth order, which is accurate to well below a
//! millimetre inside a UTM zone.

use crate::error::{Error, Result};

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const SCALE: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

/// Southern and northern latitude limits of the UTM system (exclusive).
pub const MIN_LAT: f64 = -80.0;
pub const MAX_LAT: f64 = 84.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    North,
    South,
}

impl Hemisphere {
    pub fn of(lat: f64) -> Self {
        if lat < 0.0 {
            Hemisphere::South
        } else {
            Hemisphere::North
        }
    }

    fn false_northing(self) -> f64 {
        match self {
            Hemisphere::North => 0.0,
            Hemisphere::South => FALSE_NORTHING_SOUTH,
        }
    }
}

struct Series {
    /// Rectifying radius scaled by the central scale factor.
    k0_a: f64,
    e: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> Series {
    let n = WGS84_F / (2.0 - WGS84_F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    let a_rect = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
            + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
            - 1_983_433.0 * n6 / 1_935_360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0
            + 167_603.0 * n6 / 181_440.0,
        49561.0 * n4 / 161_280.0 - 179.0 * n5 / 168.0 + 6_601_661.0 * n6 / 7_257_600.0,
        34729.0 * n5 / 80640.0 - 3_418_889.0 * n6 / 1_995_840.0,
        212_378_941.0 * n6 / 319_334_400.0,
    ];
    let beta = [
        n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0
            + 96199.0 * n6 / 604_800.0,
        n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0
            - 1_118_711.0 * n6 / 3_870_720.0,
        17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
        4397.0 * n4 / 161_280.0 - 11.0 * n5 / 504.0 - 830_251.0 * n6 / 7_257_600.0,
        4583.0 * n5 / 161_280.0 - 108_847.0 * n6 / 3_991_680.0,
        20_648_693.0 * n6 / 638_668_800.0,
    ];
    Series {
        k0_a: SCALE * a_rect,
        e: (WGS84_F * (2.0 - WGS84_F)).sqrt(),
        alpha,
        beta,
    }
}

/// Zone number (1..=60) whose 6° strip contains `lon`.
pub fn zone_for_lon(lon: f64) -> u8 {
    let z = ((lon + 180.0) / 6.0).floor() as i64 + 1;
    z.clamp(1, 60) as u8
}

pub fn central_meridian(zone: u8) -> f64 {
    -183.0 + 6.0 * f64::from(zone)
}

fn check_zone(zone: u8) -> Result<()> {
    if (1..=60).contains(&zone) {
        Ok(())
    } else {
        Err(Error::InvalidZone(i32::from(zone)))
    }
}

/// Projects a geographic coordinate into `zone`, returning
/// `(easting, northing)` in metres. Southern latitudes use the
/// 10 000 km false northing.
pub fn project_to_utm(lat: f64, lon: f64, zone: u8) -> Result<(f64, f64)> {
    check_zone(zone)?;
    if !(lat > MIN_LAT && lat < MAX_LAT) || !(-180.0..180.0).contains(&lon) {
        return Err(Error::OutsideUtmBand { line: 0, lat });
    }
    let s = series();
    let phi = lat.to_radians();
    let lam = (lon - central_meridian(zone)).to_radians();

    let sin_phi = phi.sin();
    let tau = (sin_phi.atanh() - s.e * (s.e * sin_phi).atanh()).sinh();
    let xi_p = tau.atan2(lam.cos());
    let eta_p = (lam.sin() / (1.0 + tau * tau).sqrt()).atanh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let m = 2.0 * (j as f64 + 1.0);
        xi += a * (m * xi_p).sin() * (m * eta_p).cosh();
        eta += a * (m * xi_p).cos() * (m * eta_p).sinh();
    }
    let easting = FALSE_EASTING + s.k0_a * eta;
    let northing = Hemisphere::of(lat).false_northing() + s.k0_a * xi;
    Ok((easting, northing))
}

/// Inverse of [`project_to_utm`]: returns `(lat, lon)` in degrees.
pub fn unproject_from_utm(
    easting: f64,
    northing: f64,
    zone: u8,
    hemisphere: Hemisphere,
) -> Result<(f64, f64)> {
    check_zone(zone)?;
    let s = series();
    let xi = (northing - hemisphere.false_northing()) / s.k0_a;
    let eta = (easting - FALSE_EASTING) / s.k0_a;

    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let m = 2.0 * (j as f64 + 1.0);
        xi_p -= b * (m * xi).sin() * (m * eta).cosh();
        eta_p -= b * (m * xi).cos() * (m * eta).sinh();
    }
    let tau_p = xi_p.sin() / (eta_p.sinh().powi(2) + xi_p.cos().powi(2)).sqrt();
    let lam = eta_p.sinh().atan2(xi_p.cos());

    // Newton iteration for tau from the conformal tau'.
    let e2 = s.e * s.e;
    let e2m = 1.0 - e2;
    let mut tau = tau_p;
    for _ in 0..8 {
        let sqrt1 = (1.0 + tau * tau).sqrt();
        let sigma = (s.e * (s.e * tau / sqrt1).atanh()).sinh();
        let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * sqrt1;
        let delta = (tau_p - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + e2m * tau * tau)
            / (e2m * sqrt1);
        tau += delta;
        if delta.abs() < 1e-15 {
            break;
        }
    }
    let lat = tau.atan().to_degrees();
    let lon = central_meridian(zone) + lam.to_degrees();
    Ok((lat, lon))
}
