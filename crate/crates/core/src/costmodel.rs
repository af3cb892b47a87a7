//! Closed-form flop counts for SRI, full PCG and FDP, ratio sweeps over
//! the reduced-system size and iteration count, and relative timing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flops of a reduced preconditioned solve with `k` iterations.
pub fn flops_sri(n: u64, q: u64, k: u64) -> u128 {
    let (n, q, k) = (n as u128, q as u128, k as u128);
    k * (6 * q * q + 8 * n * q + 2 * n + 16 * q + 2)
        + 2 * n * n
        + 4 * q * q
        + 10 * n * q
        + 4 * n
        + 2 * q
}

/// Flops of a full-system PCG solve with `k` iterations.
pub fn flops_pcg(n: u64, k: u64) -> u128 {
    let (n, k) = (n as u128, k as u128);
    k * (6 * n * n + 14 * n + 2) + 4 * n * n + n
}

/// Flops of the direct Sherman–Morrison–Woodbury solve.
pub fn flops_fdp(n: u64, q: u64) -> u128 {
    let (n, q) = (n as u128, q as u128);
    2 * n * q * q + q * q * q + 2 * n * n + 2 * q * q + 6 * n * q + 3 * n + 2 * q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// `T_SRI / T_PCG` over `q/n`, one series per `k_s`.
    SriVsPcg,
    /// `T_SRI / T_FDP` over `k/q`, one series per `q/n`.
    SriVsFdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub label: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSweep {
    pub mode: SweepMode,
    pub n: u64,
    pub axis: Vec<f64>,
    pub series: Vec<SweepSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub n: u64,
    pub axis_min: f64,
    pub axis_max: f64,
    pub points: usize,
    pub labels: Vec<f64>,
}

impl SweepSpec {
    /// Default grid for each panel at `n = 10000`.
    pub fn default_for(mode: SweepMode) -> Self {
        let (axis_min, axis_max) = match mode {
            SweepMode::SriVsPcg => (0.05, 0.90),
            SweepMode::SriVsFdp => (0.01, 0.80),
        };
        SweepSpec {
            mode,
            n: 10_000,
            axis_min,
            axis_max,
            points: 50,
            labels: vec![0.1, 0.3, 0.5, 0.7],
        }
    }

    pub fn axis(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.axis_min],
            m => (0..m)
                .map(|i| {
                    self.axis_min + (self.axis_max - self.axis_min) * i as f64 / (m - 1) as f64
                })
                .collect(),
        }
    }
}

fn count(fraction: f64, of: u64) -> u64 {
    (fraction * of as f64).round().max(0.0) as u64
}

/// SRI flops and the competing method's flops at one grid point. Counts are
/// rounded to the nearest integer.
pub fn flops_at(mode: SweepMode, n: u64, x: f64, label: f64) -> (u128, u128) {
    match mode {
        SweepMode::SriVsPcg => {
            let q = count(x, n);
            (
                flops_sri(n, q, count(label, q)),
                flops_pcg(n, count(label, n)),
            )
        }
        SweepMode::SriVsFdp => {
            let q = count(label, n);
            (flops_sri(n, q, count(x, q)), flops_fdp(n, q))
        }
    }
}

/// Flop ratio at one grid point.
pub fn ratio_at(mode: SweepMode, n: u64, x: f64, label: f64) -> f64 {
    let (sri, other) = flops_at(mode, n, x, label);
    sri as f64 / other as f64
}

pub fn ratio_sweep(spec: &SweepSpec) -> Result<RatioSweep> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(spec.axis_min.is_finite()
        && spec.axis_max.is_finite()
        && spec.axis_min >= 0.0
        && spec.axis_max >= spec.axis_min)
    {
        return Err(Error::InvalidParameter(format!(
            "axis range [{}, {}] is invalid",
            spec.axis_min, spec.axis_max
        )));
    }
    if let Some(bad) = spec.labels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "series parameter {bad} is invalid"
        )));
    }
    let axis = spec.axis();
    let series = spec
        .labels
        .iter()
        .map(|&label| SweepSeries {
            label,
            ratios: axis
                .iter()
                .map(|&x| ratio_at(spec.mode, spec.n, x, label))
                .collect(),
        })
        .collect();
    Ok(RatioSweep {
        mode: spec.mode,
        n: spec.n,
        axis,
        series,
    })
}

impl RatioSweep {
    /// CSV with header `x,series_label,ratio`, one row per point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,series_label,ratio")?;
        for s in &self.series {
            for (x, r) in self.axis.iter().zip(&s.ratios) {
                writeln!(out, "{x},{},{r:.7e}", s.label)?;
            }
        }
        Ok(())
    }
}

/// Reanalysis time over conventional time.
pub fn relative_time(t_reanalysis: f64, t_conventional: f64) -> Result<f64> {
    if !(t_conventional > 0.0) || !t_conventional.is_finite() {
        return Err(Error::InvalidMeasurement(format!(
            "conventional time must be positive, got {t_conventional}"
        )));
    }
    if !(t_reanalysis >= 0.0) || !t_reanalysis.is_finite() {
        return Err(Error::InvalidMeasurement(format!(
            "reanalysis time must be non-negative, got {t_reanalysis}"
        )));
    }
    Ok(t_reanalysis / t_conventional)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_substitutions() {
        assert_eq!(flops_sri(10, 2, 0), 460);
        assert_eq!(flops_sri(10, 0, 0), 240);
        assert_eq!(flops_pcg(1, 0), 5);
        assert_eq!(flops_pcg(10, 1), 1152);
        assert_eq!(flops_fdp(10, 2), 450);
        assert_eq!(flops_fdp(7, 0), 2 * 49 + 21);
    }

    #[test]
    fn per_iteration_cost_is_constant() {
        for (n, q) in [(10u64, 3u64), (1000, 250), (123_457, 98_765)] {
            let step = flops_sri(n, q, 1) - flops_sri(n, q, 0);
            let (nn, qq) = (n as u128, q as u128);
            assert_eq!(step, 6 * qq * qq + 8 * nn * qq + 2 * nn + 16 * qq + 2);
            for k in 1..5 {
                assert_eq!(flops_sri(n, q, k) - flops_sri(n, q, k - 1), step);
            }
        }
    }

    #[test]
    fn no_overflow_at_large_scale() {
        let n = 5_000_000u64;
        let v = flops_fdp(n, n);
        assert!(v > (n as u128).pow(3));
        assert!(flops_sri(n, n, n) > flops_sri(n, n, n - 1));
    }

    #[test]
    fn qualitative_crossings() {
        assert!(ratio_at(SweepMode::SriVsPcg, 10_000, 0.05, 0.1) < 1.0);
        assert!(flops_sri(10_000, 1_000, 10) < flops_fdp(10_000, 1_000));
    }

    #[test]
    fn sweep_shape_and_csv() {
        let s = ratio_sweep(&SweepSpec::default_for(SweepMode::SriVsFdp)).unwrap();
        assert_eq!(s.series.len(), 4);
        assert!(s.series.iter().all(|x| x.ratios.len() == s.axis.len()));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,series_label,ratio\n"));
        assert_eq!(text.lines().count(), 1 + 4 * 50);

        let one = SweepSpec {
            points: 1,
            labels: vec![0.3],
            ..SweepSpec::default_for(SweepMode::SriVsPcg)
        };
        assert_eq!(ratio_sweep(&one).unwrap().series[0].ratios.len(), 1);
    }

    #[test]
    fn relative_time_rules() {
        assert_eq!(relative_time(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(relative_time(0.5, 2.0).unwrap(), 0.25);
        assert!(matches!(
            relative_time(1.0, 0.0),
            Err(Error::InvalidMeasurement(_))
        ));
        assert!(matches!(
            relative_time(1.0, -1.0),
            Err(Error::InvalidMeasurement(_))
        ));
    }
}
