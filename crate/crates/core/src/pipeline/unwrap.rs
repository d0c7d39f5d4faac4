//! Branch selection for |Δφ|(T) series folded into [0, π].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub abs_dphi: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnwrappedPoint {
    pub t: f64,
    pub dphi: f64,
    pub sigma: f64,
}

/// Values s·|Δφ| + 2πn, sorted by distance from `target`.
fn candidates(abs_dphi: f64, target: f64) -> Vec<(f64, f64)> {
    let n0 = (target / (2.0 * PI)).round() as i64;
    let mut out: Vec<(f64, f64)> = (n0 - 1..=n0 + 1)
        .flat_map(|n| {
            let base = 2.0 * PI * n as f64;
            [base + abs_dphi, base - abs_dphi]
        })
        .map(|v| ((v - target).abs(), v))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn line_residual_ssr(points: &[UnwrappedPoint]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.t).sum::<f64>() / n;
    let mp = points.iter().map(|p| p.dphi).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.t - mt).powi(2)).sum();
    let stp: f64 = points.iter().map(|p| (p.t - mt) * (p.dphi - mp)).sum();
    let slope = if stt > 0.0 { stp / stt } else { 0.0 };
    points
        .iter()
        .map(|p| (p.dphi - mp - slope * (p.t - mt)).powi(2))
        .sum()
}

/// Greedy branch assignment; `forced` replaces the choice at one index with its
/// runner-up before continuing.
fn assign(
    series: &[PhasePoint],
    sign: f64,
    forced: Option<usize>,
) -> (Vec<UnwrappedPoint>, Vec<f64>) {
    let mut out: Vec<UnwrappedPoint> = Vec::with_capacity(series.len());
    let mut runner_up: Vec<f64> = Vec::with_capacity(series.len());
    for (k, p) in series.iter().enumerate() {
        let prediction = match k {
            0 => sign * p.abs_dphi,
            1 => out[0].dphi / out[0].t * p.t,
            _ => {
                let (a, b) = (&out[k - 2], &out[k - 1]);
                b.dphi + (b.dphi - a.dphi) / (b.t - a.t) * (p.t - b.t)
            }
        };
        let c = candidates(p.abs_dphi, prediction);
        let second = c
            .iter()
            .find(|x| (x.1 - c[0].1).abs() > 1e-12)
            .map_or(c[0].1, |x| x.1);
        let (chosen, other) = if forced == Some(k) {
            (second, c[0].1)
        } else {
            (c[0].1, second)
        };
        out.push(UnwrappedPoint {
            t: p.t,
            dphi: chosen,
            sigma: p.sigma,
        });
        runner_up.push(other);
    }
    (out, runner_up)
}

/// Assigns each |Δφ| to the branch ±|Δφ| + 2πn that continues the series from
/// Δφ(0) = 0, starting with `sign_hint`·|Δφ| at the shortest time.
///
/// Fails with `AmbiguousUnwrap` when another assignment (one point moved to its
/// next-best branch, or the continuation re-run from such a move) fits a
/// straight line about as well as the chosen one: its residual sum of squares
/// exceeds the chosen one by less than max(chosen, 9 σ²). Also fails when the
/// chosen series deviates from a line by more than π/2 RMS.
pub fn unwrap(series: &[PhasePoint], sign_hint: f64) -> Result<Vec<UnwrappedPoint>> {
    if series.is_empty() {
        return Ok(Vec::new());
    }
    if series.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::invalid(
            "phase series must be strictly increasing in T",
        ));
    }
    let sign = if sign_hint < 0.0 { -1.0 } else { 1.0 };
    let (out, runner_up) = assign(series, sign, None);

    if out.len() >= 3 {
        let best = line_residual_ssr(&out);
        let mean_var = out.iter().map(|p| p.sigma * p.sigma).sum::<f64>() / out.len() as f64;
        let limit = best + best.max(9.0 * mean_var).max(1e-24);
        for k in 0..out.len() {
            let mut flipped = out.clone();
            flipped[k].dphi = runner_up[k];
            let mut alternatives = vec![flipped];
            if k > 0 {
                alternatives.push(assign(series, sign, Some(k)).0);
            }
            for alt in alternatives {
                if line_residual_ssr(&alt) < limit {
                    return Err(Error::AmbiguousUnwrap(format!(
                        "branch choice at T = {:.6e} s is not determined by the data",
                        out[k].t
                    )));
                }
            }
        }
        let n = out.len() as f64;
        if (best / n).sqrt() > PI / 2.0 {
            return Err(Error::AmbiguousUnwrap(
                "unwrapped series is not close to a straight line".into(),
            ));
        }
    }
    Ok(out)
}
