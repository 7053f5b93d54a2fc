use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::span_diff;
use crate::solver::{solve_average, solve_risk, SolveOptions};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GainPoint {
    pub gamma: f64,
    pub gain: f64,
    /// `max_n ||w~_n(., gamma) - w_n||_sp`.
    pub max_span_gap: f64,
}

/// Optimal long-run gain as a function of the risk factor. The `gamma = 0`
/// entry holds the average-reward gain.
#[derive(Clone, Debug, Serialize)]
pub struct GainCurve {
    pub points: Vec<GainPoint>,
}

impl GainCurve {
    pub fn average_gain(&self) -> f64 {
        self.points.iter().find(|p| p.gamma == 0.0).expect("curve has a gamma = 0 entry").gain
    }

    /// Span gap at the non-zero `gamma` of smallest magnitude.
    pub fn smallest_gamma_gap(&self) -> Option<GainPoint> {
        self.points
            .iter()
            .filter(|p| p.gamma != 0.0)
            .min_by(|a, b| a.gamma.abs().total_cmp(&b.gamma.abs()))
            .copied()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,gain,max_span_gap\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.gamma, p.gain, p.max_span_gap);
        }
        out
    }
}

/// Solves the risk-sensitive equation at every `gamma` of the grid (plus
/// `gamma = 0`, always included), sorted increasingly.
pub fn gain_curve(model: &Model, gammas: &[f64], opts: &SolveOptions) -> Result<GainCurve> {
    if let Some(bad) = gammas.iter().find(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite gamma {bad}")));
    }
    let mut grid: Vec<f64> = gammas.to_vec();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let avg = solve_average(model, opts)?;
    let mut points = Vec::with_capacity(grid.len());
    for gamma in grid {
        if gamma == 0.0 {
            points.push(GainPoint { gamma, gain: avg.long_run_gain, max_span_gap: 0.0 });
            continue;
        }
        let risk = solve_risk(model, gamma, opts).map_err(|e| Error::AtGamma { gamma, source: Box::new(e) })?;
        let gap = risk
            .w
            .iter()
            .zip(&avg.w)
            .map(|(a, b)| span_diff(a.values(), b.values()))
            .fold(0.0, f64::max);
        points.push(GainPoint { gamma, gain: risk.long_run_gain, max_span_gap: gap });
    }
    Ok(GainCurve { points })
}

/// Parses `lo:hi:step` (inclusive of `hi` up to rounding) or a comma list.
pub fn parse_gamma_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad gamma grid '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step): (f64, f64, f64) =
                (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, step.parse().map_err(|_| bad())?);
            if step.is_nan() || step <= 0.0 || hi < lo {
                return Err(bad());
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            // Snap near-zero grid points to an exact zero.
            Ok((0..=count)
                .map(|i| lo + i as f64 * step)
                .map(|g| if g.abs() < step * 1e-9 { 0.0 } else { g })
                .collect())
        }
        [_] => spec.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect(),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_state_curve_is_flat() {
        let c = gain_curve(&fixtures::alternating(), &[-1.0, 0.5, 2.0], &SolveOptions::default()).unwrap();
        assert_eq!(c.points.len(), 4);
        assert!(c.points.iter().all(|p| p.gain == 2.0));
        assert_eq!(c.average_gain(), 2.0);
    }

    #[test]
    fn iid_curve_increases() {
        let c = gain_curve(&fixtures::iid2(), &[1.0, -1.0, 0.25], &SolveOptions::default()).unwrap();
        let g: Vec<f64> = c.points.iter().map(|p| p.gamma).collect();
        assert_eq!(g, vec![-1.0, 0.0, 0.25, 1.0]);
        assert!(c.points.windows(2).all(|w| w[0].gain < w[1].gain));
        assert_eq!(c.smallest_gamma_gap().unwrap().gamma, 0.25);
    }

    #[test]
    fn gamma_errors_are_annotated() {
        let err = gain_curve(&fixtures::disjoint(), &[0.5], &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::AtGamma { gamma, .. } if gamma == 0.5));
        assert!(err.is_assumption_failure());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_gamma_grid("-2:2:0.25").unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g[8], 0.0);
        assert_eq!(g[16], 2.0);
        assert_eq!(parse_gamma_grid("0.1, -1").unwrap(), vec![0.1, -1.0]);
        assert!(parse_gamma_grid("1:0:1").is_err());
        assert!(parse_gamma_grid("a:b").is_err());
    }
}
