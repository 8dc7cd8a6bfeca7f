//! Least-squares decay-law fits with automatic window selection.

use serde::Serialize;

use crate::dynamics::SurvivalCurve;
use crate::error::{Error, Result};

pub const MIN_WINDOW_POINTS: usize = 8;
/// Width of the sliding window, in decades of t.
pub const WINDOW_DECADES: f64 = 1.5;
/// Trailing stretch of the grid excluded from automatic windows, in decades.
pub const SATURATION_DECADES: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindow {
    pub t_lo: f64,
    pub t_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// value ∝ t^(-1/μ), linear in (log t, log value).
    PowerLaw,
    /// value ∝ e^(-rate t), linear in (t, log value).
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub mu: f64,
    /// value ≈ prefactor · t^(-1/μ)
    pub prefactor: f64,
    pub window: FitWindow,
    pub r_squared: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(-1.0 / self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub rate: f64,
    pub prefactor: f64,
    pub window: FitWindow,
    pub r_squared: f64,
    pub points: usize,
}

impl ExponentialFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * (-self.rate * t).exp()
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Line {
        slope,
        intercept,
        r_squared,
    }
}

fn window_points(times: &[f64], values: &[f64], window: FitWindow) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= window.t_lo && t <= window.t_hi {
            if !(v > 0.0) {
                return Err(Error::Fit(format!(
                    "non-positive value {v} at t={t} inside the fit window"
                )));
            }
            ts.push(t);
            vs.push(v);
        }
    }
    if ts.len() < MIN_WINDOW_POINTS {
        return Err(Error::Fit(format!(
            "fit window [{}, {}] holds {} points, need at least {MIN_WINDOW_POINTS}",
            window.t_lo,
            window.t_hi,
            ts.len()
        )));
    }
    Ok((ts, vs))
}

fn fit_power_law_raw(times: &[f64], values: &[f64], window: FitWindow) -> Result<PowerLawFit> {
    let (ts, vs) = window_points(times, values, window)?;
    if ts[0] <= 0.0 {
        return Err(Error::Fit("power-law fits need t > 0".into()));
    }
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let line = least_squares(&x, &y);
    if !(line.slope < 0.0) {
        return Err(Error::Fit(format!(
            "log-log slope {} is not negative; no decaying power law",
            line.slope
        )));
    }
    Ok(PowerLawFit {
        mu: -1.0 / line.slope,
        prefactor: line.intercept.exp(),
        window,
        r_squared: line.r_squared,
        points: ts.len(),
    })
}

fn fit_exponential_raw(times: &[f64], values: &[f64], window: FitWindow) -> Result<ExponentialFit> {
    let (ts, vs) = window_points(times, values, window)?;
    let y: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let line = least_squares(&ts, &y);
    if line.slope > 0.0 {
        return Err(Error::Fit(format!(
            "semilog slope {} is positive; no exponential decay",
            line.slope
        )));
    }
    Ok(ExponentialFit {
        rate: -line.slope,
        prefactor: line.intercept.exp(),
        window,
        r_squared: line.r_squared,
        points: ts.len(),
    })
}

fn model_r_squared(times: &[f64], values: &[f64], window: FitWindow, model: DecayModel) -> Option<f64> {
    match model {
        DecayModel::PowerLaw => fit_power_law_raw(times, values, window).ok().map(|f| f.r_squared),
        DecayModel::Exponential => fit_exponential_raw(times, values, window).ok().map(|f| f.r_squared),
    }
}

/// Slides a 1.5-decade window over the grid and keeps the one on which
/// `model` fits best. Samples before `t_transient` and in the last half
/// decade are never used.
pub fn select_window(times: &[f64], values: &[f64], model: DecayModel, t_transient: f64) -> Result<FitWindow> {
    let Some(&t_end) = times.last() else {
        return Err(Error::Fit("empty curve".into()));
    };
    let limit = t_end / 10f64.powf(SATURATION_DECADES);
    let span = 10f64.powf(WINDOW_DECADES);
    let mut best: Option<(f64, FitWindow)> = None;
    for (i, &t_lo) in times.iter().enumerate() {
        if t_lo < t_transient || t_lo <= 0.0 {
            continue;
        }
        let target = t_lo * span;
        if target > limit {
            break;
        }
        let Some(t_hi) = times[i..].iter().copied().take_while(|&t| t <= target).last() else {
            continue;
        };
        let window = FitWindow { t_lo, t_hi };
        if let Some(r2) = model_r_squared(times, values, window, model) {
            if best.is_none_or(|(b, _)| r2 > b) {
                best = Some((r2, window));
            }
        }
    }
    best.map(|(_, w)| w).ok_or_else(|| {
        Error::Fit(format!(
            "no admissible {model:?} window between t={t_transient} and t={limit}"
        ))
    })
}

/// Transient cutoff 1/‖H‖₁ for a ring with capture strength Γ (‖H‖₁ = 4 + Γ).
pub fn transient_time(gamma: f64) -> f64 {
    1.0 / (4.0 + gamma)
}

/// Power-law fit of `curve`; with no window the best automatic window is used.
pub fn fit_power_law(curve: &SurvivalCurve, window: Option<FitWindow>) -> Result<PowerLawFit> {
    let window = match window {
        Some(w) => w,
        None => select_window(
            curve.times(),
            &curve.values,
            DecayModel::PowerLaw,
            transient_time(curve.meta.gamma()),
        )?,
    };
    fit_power_law_raw(curve.times(), &curve.values, window)
}

/// Exponential fit of `curve`; with no window the best automatic window is used.
pub fn fit_exponential(curve: &SurvivalCurve, window: Option<FitWindow>) -> Result<ExponentialFit> {
    let window = match window {
        Some(w) => w,
        None => select_window(
            curve.times(),
            &curve.values,
            DecayModel::Exponential,
            transient_time(curve.meta.gamma()),
        )?,
    };
    fit_exponential_raw(curve.times(), &curve.values, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CurveKind, TimeGrid};
    use crate::lattice::TrapConfiguration;

    fn synthetic(grid: TimeGrid, f: impl Fn(f64) -> f64) -> SurvivalCurve {
        let values = grid.samples().iter().map(|&t| f(t)).collect();
        SurvivalCurve {
            grid,
            values,
            kind: CurveKind::QuantumExact,
            meta: TrapConfiguration::custom(11, &[3], 0.1).unwrap(),
        }
    }

    #[test]
    fn exact_power_laws() {
        let grid = TimeGrid::logarithmic(1e-2, 1e4, 400).unwrap();
        let c = synthetic(grid.clone(), |t| t.powi(-2));
        let fit = fit_power_law(&c, None).unwrap();
        assert!((fit.mu - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let c = synthetic(grid, |t| 3.0 * t.powf(-0.5));
        let fit = fit_power_law(&c, None).unwrap();
        assert!((fit.mu - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential() {
        let grid = TimeGrid::logarithmic(1e-2, 1e6, 400).unwrap();
        let c = synthetic(grid, |t| 0.5 * (-0.001 * t).exp());
        let fit = fit_exponential(
            &c,
            Some(FitWindow {
                t_lo: 10.0,
                t_hi: 5000.0,
            }),
        )
        .unwrap();
        assert!((fit.rate - 0.001).abs() < 1e-12);
        assert!((fit.prefactor - 0.5).abs() < 1e-10);
        let auto = fit_exponential(&c, None).unwrap();
        assert!((auto.rate - 0.001).abs() < 1e-9);
    }

    #[test]
    fn refitting_own_model_is_idempotent() {
        let grid = TimeGrid::logarithmic(1e-1, 1e3, 300).unwrap();
        let noisy = synthetic(grid.clone(), |t| {
            0.8 * t.powf(-0.3) * (1.0 + 0.05 * (3.0 * t.ln()).sin())
        });
        let fit = fit_power_law(&noisy, None).unwrap();
        let model = synthetic(grid.clone(), |t| fit.eval(t));
        let again = fit_power_law(&model, Some(fit.window)).unwrap();
        assert!((again.mu - fit.mu).abs() < 1e-9 * fit.mu);
        assert!((again.prefactor - fit.prefactor).abs() < 1e-9 * fit.prefactor);

        let noisy = synthetic(grid.clone(), |t| 0.7 * (-0.02 * t).exp() * (1.0 + 0.03 * t.sin()));
        let fit = fit_exponential(&noisy, Some(FitWindow { t_lo: 1.0, t_hi: 200.0 })).unwrap();
        let model = synthetic(grid, |t| fit.eval(t));
        let again = fit_exponential(&model, Some(fit.window)).unwrap();
        assert!((again.rate - fit.rate).abs() < 1e-9 * fit.rate);
        assert!((again.prefactor - fit.prefactor).abs() < 1e-9 * fit.prefactor);
    }

    #[test]
    fn error_paths() {
        let grid = TimeGrid::logarithmic(1e-2, 1e2, 50).unwrap();
        let c = synthetic(grid.clone(), |t| if t > 1.0 { 0.0 } else { 1.0 / (1.0 + t) });
        assert!(matches!(
            fit_power_law(&c, Some(FitWindow { t_lo: 0.5, t_hi: 50.0 })),
            Err(Error::Fit(_))
        ));
        let c = synthetic(grid.clone(), |t| 1.0 / (1.0 + t));
        assert!(matches!(
            fit_power_law(&c, Some(FitWindow { t_lo: 1.0, t_hi: 1.5 })),
            Err(Error::Fit(_))
        ));
        let flat = synthetic(grid, |_| 0.3);
        assert!(fit_power_law(&flat, None).is_err());
    }

    #[test]
    fn automatic_window_respects_exclusions() {
        let grid = TimeGrid::logarithmic(1e-2, 1e4, 400).unwrap();
        let c = synthetic(grid, |t| (1.0 + t).powf(-0.7));
        let w = select_window(c.times(), &c.values, DecayModel::PowerLaw, 0.25).unwrap();
        assert!(w.t_lo >= 0.25);
        assert!(w.t_hi <= 1e4 / 10f64.sqrt());
        assert!(w.t_hi / w.t_lo <= 10f64.powf(1.5) * (1.0 + 1e-12));
    }
}
