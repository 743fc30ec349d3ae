//! Monte-Carlo calibration of the square-root search law t = B/√K.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::des::unit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    /// Side of the square region, miles.
    pub side_length: f64,
    /// Miles per hour.
    pub travel_speed: f64,
    pub station_counts: Vec<u32>,
    /// Vehicle positions drawn per station count.
    pub samples_per_count: usize,
    /// Independent station layouts the samples are spread over.
    pub layouts_per_count: usize,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            side_length: 1.0,
            travel_speed: 1.0,
            station_counts: vec![25, 50, 100, 200, 300, 400],
            samples_per_count: 20_000,
            layouts_per_count: 20,
            seed: 1,
            metric: Metric::Euclidean,
        }
    }
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0 && self.travel_speed > 0.0) {
            return Err(Error::invalid("region side and speed must be positive"));
        }
        if self.station_counts.is_empty() || self.station_counts.contains(&0) {
            return Err(Error::invalid("station counts must be positive"));
        }
        if self.samples_per_count < 10_000 {
            return Err(Error::invalid(
                "at least 1e4 samples per station count are needed",
            ));
        }
        if self.layouts_per_count == 0 || self.layouts_per_count > self.samples_per_count {
            return Err(Error::invalid("layouts per count must lie in 1..=samples"));
        }
        Ok(())
    }
}

/// Mean travel time (hours) from a uniform vehicle to its nearest station,
/// one entry per station count. Each count has its own RNG stream.
pub fn simulate_search_times(region: &RegionSpec) -> Result<Vec<(u32, f64)>> {
    region.validate()?;
    Ok(region
        .station_counts
        .par_iter()
        .enumerate()
        .map(|(idx, &k)| {
            (
                k,
                mean_nearest(region, k, idx as u64) * region.side_length / region.travel_speed,
            )
        })
        .collect())
}

/// Mean nearest-station distance in the unit square.
fn mean_nearest(region: &RegionSpec, k: u32, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(region.seed);
    rng.set_stream(stream);
    let layouts = region.layouts_per_count;
    let per_layout = region.samples_per_count / layouts;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut stations = vec![(0.0, 0.0); k as usize];
    for _ in 0..layouts {
        for s in stations.iter_mut() {
            *s = (unit(&mut rng), unit(&mut rng));
        }
        for _ in 0..per_layout {
            let (x, y) = (unit(&mut rng), unit(&mut rng));
            let d = stations
                .iter()
                .map(|&(sx, sy)| match region.metric {
                    Metric::Euclidean => (sx - x).hypot(sy - y),
                    Metric::Manhattan => (sx - x).abs() + (sy - y).abs(),
                })
                .fold(f64::INFINITY, f64::min);
            total += d;
            count += 1;
        }
    }
    total / count as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqrtLawFit {
    /// Fitted B in t = B/√K, in the time unit of the points.
    pub scale: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least squares of t on 1/√K without intercept.
pub fn fit_sqrt_law(points: &[(f64, f64)]) -> Result<SqrtLawFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::invalid("need at least 4 distinct station counts"));
    }
    if points.iter().any(|&(k, t)| !(k > 0.0) || !(t > 0.0)) {
        return Err(Error::invalid("station counts and times must be positive"));
    }
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), &(k, t)| {
        let x = 1.0 / k.sqrt();
        (a + x * t, b + x * x)
    });
    let scale = sxy / sxx;
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(k, t)| (t - scale / k.sqrt()).powi(2))
        .sum();
    if !(ss_tot > 0.0) {
        return Err(Error::numeric("times do not vary across station counts"));
    }
    Ok(SqrtLawFit {
        scale,
        r_squared: 1.0 - ss_res / ss_tot,
        points: points.to_vec(),
    })
}
