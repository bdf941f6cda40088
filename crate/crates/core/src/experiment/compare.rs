use serde::{Deserialize, Serialize};

use super::{Metric, MetricsReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub resolution: Option<usize>,
    pub mean: f64,
    pub stderr: f64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub family: String,
    pub metric: Metric,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub variant: String,
    pub x: Vec<Option<usize>>,
    pub y: Vec<f64>,
    pub band: Vec<f64>,
}

/// One series per variant: `x` resolution, `y` mean, `band` standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub family: String,
    pub metric: Metric,
    pub series: Vec<PlotSeries>,
}

/// Table of `(variant, resolution)` rows from reports on one dataset family,
/// sorted by variant and then resolution.
pub fn compare_variants(reports: &[MetricsReport]) -> Result<Comparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Config("nothing to compare".into()))?;
    for r in reports {
        if r.family != first.family {
            return Err(Error::Config(format!(
                "reports mix dataset families `{}` and `{}`",
                first.family, r.family
            )));
        }
        if r.metric != first.metric {
            return Err(Error::Config("reports use different metrics".into()));
        }
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            variant: r.variant.clone(),
            resolution: r.resolution,
            mean: r.mean,
            stderr: r.stderr,
            name: r.name.clone(),
        })
        .collect();
    rows.sort_by(|a, b| a.variant.cmp(&b.variant).then(a.resolution.cmp(&b.resolution)));
    Ok(Comparison {
        family: first.family.clone(),
        metric: first.metric,
        rows,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["family", "variant", "resolution", "mean", "stderr", "name"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in &self.rows {
            let res = r.resolution.map_or_else(String::new, |v| v.to_string());
            w.write_record([
                &self.family,
                &r.variant,
                &res,
                &r.mean.to_string(),
                &r.stderr.to_string(),
                &r.name,
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn plot_data(&self) -> PlotData {
        let mut series: Vec<PlotSeries> = Vec::new();
        for r in &self.rows {
            let band = if r.stderr.is_finite() { r.stderr.max(0.0) } else { 0.0 };
            match series.iter_mut().find(|s| s.variant == r.variant) {
                Some(s) => {
                    s.x.push(r.resolution);
                    s.y.push(r.mean);
                    s.band.push(band);
                }
                None => series.push(PlotSeries {
                    variant: r.variant.clone(),
                    x: vec![r.resolution],
                    y: vec![r.mean],
                    band: vec![band],
                }),
            }
        }
        PlotData {
            family: self.family.clone(),
            metric: self.metric,
            series,
        }
    }
}
