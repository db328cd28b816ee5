//! Comparison of within-aggregate domain distributions between surveillance
//! and a service program, restricted to cells where surveillance exceeds the
//! service volume. Off-trend domains are flagged against a LOWESS fit with a
//! robust MAD band.

mod lowess;

pub use lowess::{lowess, neighborhood_size, LowessConfig, LowessError};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{join_to_surveillance, AggregateClass, DomainKey, Index, IndexError};
use crate::metrics::{domain_share, DomainShareTable, MetricsError};
use crate::robust::{is_degenerate_scale, robust_scale};

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Lowess(#[from] LowessError),
    #[error("observed and fitted lengths differ ({observed} vs {fitted})")]
    LengthMismatch { observed: usize, fitted: usize },
}

/// Surveillance share (`x`) and service share (`y`) of one domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharePair {
    pub program: String,
    pub year: i32,
    pub class: AggregateClass,
    pub key: DomainKey,
    pub x: f64,
    pub y: f64,
}

/// Pairs of domain shares for every joined cell with
/// surveillance volume strictly above service volume.
///
/// Shares are taken over the full (program, year, class) scope. Service
/// scopes whose total volume is zero carry no distribution and are skipped.
pub fn share_pairs(
    index: &Index,
    program: &str,
    surveillance_program: &str,
) -> Result<Vec<SharePair>, DistributionError> {
    let join = join_to_surveillance(index, program, surveillance_program)?;
    let mut tables: BTreeMap<(i32, AggregateClass), Option<(DomainShareTable, DomainShareTable)>> =
        BTreeMap::new();
    let mut pairs = Vec::new();
    for record in join.joined {
        if record.surveillance_volume <= record.service_volume {
            continue;
        }
        let entry = match tables.entry((record.year, record.class)) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(v) => {
                let surv = domain_share(index, surveillance_program, record.year, record.class)?;
                let tables = match domain_share(index, program, record.year, record.class) {
                    Ok(serv) => Some((surv, serv)),
                    Err(MetricsError::ZeroTotal { .. }) => None,
                    Err(e) => return Err(e.into()),
                };
                v.insert(tables)
            }
        };
        let Some((surv, serv)) = entry else { continue };
        let (Some(x), Some(y)) = (surv.share(&record.key), serv.share(&record.key)) else {
            continue;
        };
        pairs.push(SharePair {
            program: record.program,
            year: record.year,
            class: record.class,
            key: record.key,
            x,
            y,
        });
    }
    Ok(pairs)
}

/// Fitted value, residual and band membership of one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedBand {
    pub fitted: f64,
    pub residual: f64,
    pub scale: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub points: Vec<SmoothedBand>,
    /// `1.4826 · MAD` of the residuals.
    pub scale: f64,
    /// The residual scale is numerically zero; nothing is flagged.
    pub degenerate: bool,
}

impl BandResult {
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flag)
            .map(|(i, _)| i)
    }
}

/// Flags points whose residual from the fit exceeds `k` robust standard
/// deviations.
pub fn flag_outliers(observed: &[f64], fitted: &[f64], k: f64) -> Result<BandResult, DistributionError> {
    if observed.len() != fitted.len() {
        return Err(DistributionError::LengthMismatch {
            observed: observed.len(),
            fitted: fitted.len(),
        });
    }
    let residuals: Vec<f64> = observed.iter().zip(fitted).map(|(y, f)| y - f).collect();
    let scale = robust_scale(&residuals).unwrap_or(0.0);
    let degenerate = is_degenerate_scale(scale, observed);
    let points = residuals
        .iter()
        .zip(fitted)
        .map(|(&residual, &fitted)| SmoothedBand {
            fitted,
            residual,
            scale,
            flag: !degenerate && residual.abs() > k * scale,
        })
        .collect();
    Ok(BandResult {
        points,
        scale,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionConfig {
    pub smoothing: LowessConfig,
    /// Band half-width in robust standard deviations.
    pub k: f64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            smoothing: LowessConfig::default(),
            k: 2.5,
        }
    }
}

/// A share pair with its smoothing result. `band` is `None` when the
/// (program, class) group had too few points to smooth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedPair {
    pub pair: SharePair,
    pub band: Option<SmoothedBand>,
}

/// Smooths y on x within each (program, class) group, pooling years, and
/// flags off-trend domains. Output is sorted by (program, class, year, domain).
pub fn smooth_pairs(
    mut pairs: Vec<SharePair>,
    config: &DistributionConfig,
) -> Result<Vec<SmoothedPair>, DistributionError> {
    pairs.sort_by(|a, b| {
        (&a.program, a.class, a.year, &a.key).cmp(&(&b.program, b.class, b.year, &b.key))
    });
    let mut out = Vec::with_capacity(pairs.len());
    let mut start = 0;
    while start < pairs.len() {
        let end = start
            + pairs[start..]
                .iter()
                .take_while(|p| p.program == pairs[start].program && p.class == pairs[start].class)
                .count();
        let group = &pairs[start..end];
        let points: Vec<(f64, f64)> = group.iter().map(|p| (p.x, p.y)).collect();
        let bands = match lowess(&points, &config.smoothing) {
            Ok(fitted) => {
                let observed: Vec<f64> = group.iter().map(|p| p.y).collect();
                flag_outliers(&observed, &fitted, config.k)?
                    .points
                    .into_iter()
                    .map(Some)
                    .collect()
            }
            Err(LowessError::TooFewPoints(_)) => vec![None; group.len()],
            Err(e) => return Err(e.into()),
        };
        out.extend(group.iter().cloned().zip(bands).map(|(pair, band)| SmoothedPair { pair, band }));
        start = end;
    }
    Ok(out)
}
