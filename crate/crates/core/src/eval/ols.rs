use serde::{Deserialize, Serialize};

use super::{check_observations, EvalError, TopicObservation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of `y` on `x` and its coefficient of determination.
pub fn ols_r2(observations: &[TopicObservation]) -> Result<OlsFit, EvalError> {
    check_observations(observations)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = observations.iter().map(|o| (o.x, o.y)).unzip();
    fit(&xs, &ys)
}

fn constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

pub(crate) fn fit(xs: &[f64], ys: &[f64]) -> Result<OlsFit, EvalError> {
    if constant(xs) {
        return Err(EvalError::DegenerateRegressor);
    }
    if constant(ys) {
        return Err(EvalError::DegenerateResponse);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = (1.0 - ss_res / syy).clamp(0.0, 1.0);
    Ok(OlsFit {
        r2,
        slope,
        intercept,
    })
}
