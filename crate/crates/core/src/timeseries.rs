//! Random walk with drift and a log-covariate, i.e. ARIMA(0,1,0) regression,
//! fit by least squares on first differences, plus a small order search.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CiMethod, EstimateWithCi};
use crate::linalg::ols;

/// Yearly unsheltered counts with the sheltered count as covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitSeries {
    pub years: Vec<i32>,
    pub unsheltered: Vec<f64>,
    pub sheltered: Vec<f64>,
}

impl PitSeries {
    pub fn new(years: Vec<i32>, unsheltered: Vec<f64>, sheltered: Vec<f64>) -> Result<Self> {
        let s = PitSeries {
            years,
            unsheltered,
            sheltered,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.years.len() != self.unsheltered.len() || self.years.len() != self.sheltered.len() {
            return Err(Error::input("years, unsheltered and sheltered differ in length"));
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("years must be strictly increasing"));
        }
        if self.unsheltered.iter().any(|&y| !(y.is_finite() && y >= 0.0)) {
            return Err(Error::input("unsheltered counts must be finite and non-negative"));
        }
        if self.sheltered.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::input("sheltered counts must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// Years missing between the first and last observation.
    pub fn gaps(&self) -> Vec<i32> {
        self.years.windows(2).flat_map(|w| w[0] + 1..w[1]).collect()
    }

    pub fn log_sheltered(&self) -> Vec<f64> {
        self.sheltered.iter().map(|x| x.ln()).collect()
    }

    /// (Δy, Δlog x) over pairs of consecutive years; differences spanning a gap are skipped.
    pub fn differences(&self) -> (Vec<f64>, Vec<f64>) {
        let lx = self.log_sheltered();
        let mut dy = Vec::new();
        let mut dx = Vec::new();
        for t in 1..self.len() {
            if self.years[t] == self.years[t - 1] + 1 {
                dy.push(self.unsheltered[t] - self.unsheltered[t - 1]);
                dx.push(lx[t] - lx[t - 1]);
            }
        }
        (dy, dx)
    }

    /// `year,unsheltered,sheltered`. A row with an empty `unsheltered` marks a
    /// missing year and is left out. Every invalid row is reported.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(cy), Some(cu), Some(cs)) = (col("year"), col("unsheltered"), col("sheltered")) else {
            return Err(Error::Rows {
                path: path.to_path_buf(),
                problems: vec![(1, "expected columns year,unsheltered,sheltered".into())],
            });
        };
        let mut problems = Vec::new();
        let (mut years, mut ys, mut xs) = (Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 2;
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    problems.push((row, e.to_string()));
                    continue;
                }
            };
            let f = |c: usize| rec.get(c).unwrap_or("").trim();
            if f(cu).is_empty() || f(cu) == "NA" {
                continue;
            }
            match (f(cy).parse::<i32>(), f(cu).parse::<f64>(), f(cs).parse::<f64>()) {
                (Ok(y), Ok(u), Ok(s)) if u >= 0.0 && s > 0.0 && u.is_finite() && s.is_finite() => {
                    years.push(y);
                    ys.push(u);
                    xs.push(s);
                }
                _ => problems.push((
                    row,
                    format!("invalid row `{}`", rec.iter().collect::<Vec<_>>().join(",")),
                )),
            }
        }
        for (k, w) in years.windows(2).enumerate() {
            if w[0] >= w[1] {
                problems.push((k + 3, format!("year {} does not follow {}", w[1], w[0])));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Rows {
                path: path.to_path_buf(),
                problems,
            });
        }
        PitSeries::new(years, ys, xs)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["year", "unsheltered", "sheltered"])?;
        for t in 0..self.len() {
            w.write_record([
                self.years[t].to_string(),
                self.unsheltered[t].to_string(),
                self.sheltered[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Divisor of the residual sum of squares used for σ².
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceDivisor {
    /// RSS / (n − 2): the convention behind the reported σ² and forecast intervals.
    #[default]
    Unbiased,
    /// RSS / n, the maximum-likelihood value.
    Ml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub drift: f64,
    pub beta_log_shelter: f64,
    pub se_drift: f64,
    pub se_beta: f64,
    /// Innovation variance under `divisor`; used for forecasts.
    pub sigma2: f64,
    pub divisor: VarianceDivisor,
    pub sigma2_ml: f64,
    pub sigma2_unbiased: f64,
    pub rss: f64,
    /// Gaussian log-likelihood at the ML variance.
    pub log_likelihood: f64,
    /// Gaussian log-likelihood evaluated at the unbiased variance.
    pub log_likelihood_unbiased: f64,
    /// 2k − 2·log_likelihood with k = 3.
    pub aic: f64,
    /// Number of differenced observations.
    pub n_obs: usize,
}

pub const ARIMA_PARAMS: usize = 3;

pub(crate) fn gaussian_loglik(rss: f64, n: usize, sigma2: f64) -> f64 {
    let n = n as f64;
    if sigma2 == 0.0 {
        return if rss == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - rss / (2.0 * sigma2)
}

/// Least squares for Δy = drift + β Δlog x on centred data.
pub fn fit_differences(dy: &[f64], dx: &[f64], divisor: VarianceDivisor) -> Result<ArimaFit> {
    let n = dy.len();
    if n != dx.len() {
        return Err(Error::input("differences differ in length"));
    }
    if n < 3 {
        return Err(Error::input("need at least 4 consecutive observations"));
    }
    let nf = n as f64;
    let my = dy.iter().sum::<f64>() / nf;
    let mx = dx.iter().sum::<f64>() / nf;
    let sxx: f64 = dx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = dx.iter().zip(dy).map(|(x, y)| (x - mx) * (y - my)).sum();
    let scale: f64 = dx.iter().map(|x| x * x).sum();
    if sxx <= 1e-12 * scale || sxx == 0.0 {
        return Err(Error::input("covariate collinear with drift"));
    }
    let beta = sxy / sxx;
    let drift = my - beta * mx;
    let rss: f64 = dx
        .iter()
        .zip(dy)
        .map(|(x, y)| (y - drift - beta * x).powi(2))
        .sum::<f64>()
        .max(0.0);
    let sigma2_ml = rss / nf;
    let sigma2_unbiased = rss / (nf - 2.0);
    let sigma2 = match divisor {
        VarianceDivisor::Unbiased => sigma2_unbiased,
        VarianceDivisor::Ml => sigma2_ml,
    };
    let log_likelihood = gaussian_loglik(rss, n, sigma2_ml);
    Ok(ArimaFit {
        drift,
        beta_log_shelter: beta,
        se_drift: (sigma2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        se_beta: (sigma2 / sxx).sqrt(),
        sigma2,
        divisor,
        sigma2_ml,
        sigma2_unbiased,
        rss,
        log_likelihood,
        log_likelihood_unbiased: gaussian_loglik(rss, n, sigma2_unbiased),
        aic: 2.0 * ARIMA_PARAMS as f64 - 2.0 * log_likelihood,
        n_obs: n,
    })
}

pub fn fit_arima010_with_covariate(s: &PitSeries, divisor: VarianceDivisor) -> Result<ArimaFit> {
    s.validate()?;
    if s.len() < 4 {
        return Err(Error::input("need at least 4 observations"));
    }
    let (dy, dx) = s.differences();
    fit_differences(&dy, &dx, divisor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub horizon: usize,
    pub estimate: EstimateWithCi,
}

/// ŷ_{t+h} = last_y + h·drift + β(log x_{t+h} − log x_t) with variance h·σ².
pub fn forecast(
    fit: &ArimaFit,
    last_y: f64,
    last_log_x: f64,
    future_log_x: &[f64],
    level: f64,
) -> Result<Vec<Forecast>> {
    if future_log_x.is_empty() {
        return Err(Error::input("forecast needs at least one future covariate value"));
    }
    future_log_x
        .iter()
        .enumerate()
        .map(|(k, &lx)| {
            let h = (k + 1) as f64;
            let point = last_y + h * fit.drift + fit.beta_log_shelter * (lx - last_log_x);
            let estimate = EstimateWithCi::normal(point, (h * fit.sigma2).sqrt(), level, CiMethod::Analytic)?;
            Ok(Forecast {
                horizon: k + 1,
                estimate,
            })
        })
        .collect()
}

/// One ARIMA(p,d,q) regression candidate, p, q, d ∈ {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: u8,
    pub d: u8,
    pub q: u8,
    pub drift: bool,
    pub covariate: bool,
}

impl ArimaOrder {
    /// All 32 candidates.
    pub fn grid() -> Vec<ArimaOrder> {
        let mut out = Vec::with_capacity(32);
        for d in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    for drift in [false, true] {
                        for covariate in [false, true] {
                            out.push(ArimaOrder {
                                p,
                                d,
                                q,
                                drift,
                                covariate,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn k(&self) -> usize {
        (self.p + self.q) as usize + usize::from(self.drift) + usize::from(self.covariate) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub order: ArimaOrder,
    pub phi: Option<f64>,
    pub theta: Option<f64>,
    /// Regression coefficients: constant (if any) then covariate (if any).
    pub coefficients: Vec<f64>,
    pub sigma2_ml: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_obs: usize,
    /// Why the candidate could not be fit, if it could not.
    pub error: Option<String>,
}

/// Conditional sum of squares of one candidate at fixed (φ, θ): regressors are
/// profiled out by least squares on the filtered series.
fn css(z: &[f64], x: &[Vec<f64>], phi: f64, theta: f64, skip: usize) -> Option<(Vec<f64>, f64)> {
    let k = x.first().map_or(0, Vec::len);
    let n = z.len();
    let mut w = vec![0.0; n];
    let mut v = vec![vec![0.0; k]; n];
    for t in 0..n {
        let prev = |s: &[f64]| if t > 0 { s[t - 1] } else { 0.0 };
        w[t] = z[t] - phi * if t > 0 { z[t - 1] } else { 0.0 } - theta * prev(&w);
        for j in 0..k {
            let pv = if t > 0 { v[t - 1][j] } else { 0.0 };
            let px = if t > 0 { x[t - 1][j] } else { 0.0 };
            v[t][j] = x[t][j] - phi * px - theta * pv;
        }
    }
    let (w, v) = (&w[skip..], &v[skip..]);
    if k == 0 {
        return Some((Vec::new(), w.iter().map(|e| e * e).sum()));
    }
    ols(v, w)
}

fn fit_candidate(y: &[f64], lx: &[f64], order: ArimaOrder) -> std::result::Result<CandidateFit, String> {
    let (z, c): (Vec<f64>, Vec<f64>) = if order.d == 1 {
        (
            y.windows(2).map(|w| w[1] - w[0]).collect(),
            lx.windows(2).map(|w| w[1] - w[0]).collect(),
        )
    } else {
        (y.to_vec(), lx.to_vec())
    };
    let x: Vec<Vec<f64>> = (0..z.len())
        .map(|t| {
            let mut row = Vec::new();
            if order.drift {
                row.push(1.0);
            }
            if order.covariate {
                row.push(c[t]);
            }
            row
        })
        .collect();
    // every candidate is scored on the same observations: the first is only conditioned on
    let skip = 1;
    let m = z.len() - skip;
    if m <= order.k() {
        return Err("too few observations".into());
    }
    let eval = |phi: f64, theta: f64| css(&z, &x, phi, theta, skip);
    let axis = |on: u8| -> Vec<f64> {
        if on == 1 {
            (-98..=98).map(|i| i as f64 / 100.0).collect()
        } else {
            vec![0.0]
        }
    };
    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None;
    let consider = |best: &mut Option<(f64, f64, Vec<f64>, f64)>, phi: f64, theta: f64| {
        if let Some((b, rss)) = eval(phi, theta) {
            if best.as_ref().is_none_or(|cur| rss < cur.3) {
                *best = Some((phi, theta, b, rss));
            }
        }
    };
    for &phi in &axis(order.p) {
        for &theta in &axis(order.q) {
            consider(&mut best, phi, theta);
        }
    }
    let Some((phi0, theta0)) = best.as_ref().map(|b| (b.0, b.1)) else {
        return Err("regressors are collinear".into());
    };
    if order.p + order.q > 0 {
        let fine = |on: u8, c: f64| -> Vec<f64> {
            if on == 1 {
                (-10..=10).map(|i| (c + i as f64 / 1000.0).clamp(-0.99, 0.99)).collect()
            } else {
                vec![0.0]
            }
        };
        for &phi in &fine(order.p, phi0) {
            for &theta in &fine(order.q, theta0) {
                consider(&mut best, phi, theta);
            }
        }
    }
    let (phi, theta, coefficients, rss) = best.expect("at least one evaluation succeeded");
    let sigma2_ml = rss / m as f64;
    let log_likelihood = gaussian_loglik(rss, m, sigma2_ml);
    Ok(CandidateFit {
        order,
        phi: (order.p == 1).then_some(phi),
        theta: (order.q == 1).then_some(theta),
        coefficients,
        sigma2_ml,
        log_likelihood,
        aic: 2.0 * order.k() as f64 - 2.0 * log_likelihood,
        n_obs: m,
        error: None,
    })
}

/// Fits all 32 candidates by conditional least squares on a common set of
/// observations and returns them sorted by AIC within each `d`. Candidates
/// that cannot be fit are listed last with their error.
pub fn select_model(s: &PitSeries) -> Result<Vec<CandidateFit>> {
    s.validate()?;
    if !s.gaps().is_empty() {
        return Err(Error::input("model search needs consecutive years"));
    }
    if s.len() < 6 {
        return Err(Error::input("model search needs at least 6 observations"));
    }
    let lx = s.log_sheltered();
    let mut fits: Vec<CandidateFit> = ArimaOrder::grid()
        .into_iter()
        .map(|o| {
            fit_candidate(&s.unsheltered, &lx, o).unwrap_or_else(|e| CandidateFit {
                order: o,
                phi: None,
                theta: None,
                coefficients: Vec::new(),
                sigma2_ml: f64::NAN,
                log_likelihood: f64::NAN,
                aic: f64::NAN,
                n_obs: 0,
                error: Some(e),
            })
        })
        .collect();
    fits.sort_by(|a, b| {
        (a.order.d, a.error.is_some())
            .cmp(&(b.order.d, b.error.is_some()))
            .then(a.aic.total_cmp(&b.aic))
    });
    Ok(fits)
}

/// Lowest-AIC fitted candidate with differencing order `d`.
pub fn best_candidate(fits: &[CandidateFit], d: u8) -> Option<&CandidateFit> {
    fits.iter()
        .filter(|f| f.order.d == d && f.error.is_none())
        .min_by(|a, b| a.aic.total_cmp(&b.aic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(ys: &[f64], xs: &[f64]) -> PitSeries {
        PitSeries::new((2000..2000 + ys.len() as i32).collect(), ys.to_vec(), xs.to_vec()).unwrap()
    }

    #[test]
    fn noiseless_drift() {
        let ys: Vec<f64> = (0..8).map(|t| 1000.0 + 300.0 * t as f64).collect();
        let xs = [100.0, 120.0, 90.0, 150.0, 130.0, 170.0, 110.0, 160.0];
        let f = fit_arima010_with_covariate(&series(&ys, &xs), VarianceDivisor::Ml).unwrap();
        assert_relative_eq!(f.drift, 300.0, epsilon = 1e-9);
        assert_relative_eq!(f.beta_log_shelter, 0.0, epsilon = 1e-9);
        assert!(f.sigma2 < 1e-18);
        assert_eq!(f.n_obs, 7);
    }

    #[test]
    fn constant_covariate_rejected() {
        let s = series(&[1.0, 5.0, 2.0, 8.0], &[50.0; 4]);
        let err = fit_arima010_with_covariate(&s, VarianceDivisor::Unbiased).unwrap_err();
        assert!(err.to_string().contains("covariate collinear with drift"));
        assert!(fit_arima010_with_covariate(&series(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), VarianceDivisor::Ml).is_err());
    }

    #[test]
    fn aic_bookkeeping_and_divisors() {
        let s = series(&[10.0, 14.0, 13.0, 20.0, 26.0, 25.0], &[5.0, 7.0, 6.0, 9.0, 8.0, 10.0]);
        let f = fit_arima010_with_covariate(&s, VarianceDivisor::Unbiased).unwrap();
        assert_relative_eq!(f.aic, 6.0 - 2.0 * f.log_likelihood);
        assert_relative_eq!(f.sigma2_unbiased * 3.0, f.sigma2_ml * 5.0, epsilon = 1e-9);
        assert_eq!(f.sigma2, f.sigma2_unbiased);
    }

    #[test]
    fn forecast_interval_half_width() {
        let s = series(&[10.0, 14.0, 13.0, 20.0, 26.0, 25.0], &[5.0, 7.0, 6.0, 9.0, 8.0, 10.0]);
        let f = fit_arima010_with_covariate(&s, VarianceDivisor::Unbiased).unwrap();
        let lx = 10f64.ln();
        let fc = forecast(&f, 25.0, lx, &[lx, 11f64.ln()], 0.95).unwrap();
        assert_relative_eq!(fc[0].estimate.point, 25.0 + f.drift);
        for (h, x) in fc.iter().enumerate() {
            let hw = x.estimate.ci_high - x.estimate.point;
            assert_relative_eq!(hw, 1.959964 * ((h + 1) as f64 * f.sigma2).sqrt(), epsilon = 1e-4);
        }
        let exact = ArimaFit {
            sigma2: 0.0,
            ..f.clone()
        };
        let fc = forecast(&exact, 25.0, lx, &[lx], 0.95).unwrap();
        assert_eq!(fc[0].estimate.ci_low, fc[0].estimate.ci_high);
        assert!(forecast(&f, 25.0, lx, &[], 0.95).is_err());
    }

    #[test]
    fn gaps_skip_spanning_differences() {
        let s = PitSeries::new(
            vec![2000, 2001, 2002, 2004, 2005],
            vec![1.0, 3.0, 4.0, 9.0, 12.0],
            vec![2.0, 3.0, 5.0, 4.0, 7.0],
        )
        .unwrap();
        assert_eq!(s.gaps(), vec![2003]);
        let (dy, _) = s.differences();
        assert_eq!(dy, vec![2.0, 1.0, 3.0]);
        assert!(PitSeries::new(vec![2001, 2000], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn grid_has_32_candidates_and_finds_random_walk() {
        assert_eq!(ArimaOrder::grid().len(), 32);
        let ys = [100.0, 130.0, 120.0, 180.0, 210.0, 190.0, 260.0, 300.0, 290.0, 350.0];
        let xs = [50.0, 52.0, 51.0, 55.0, 60.0, 58.0, 62.0, 61.0, 66.0, 70.0];
        let fits = select_model(&series(&ys, &xs)).unwrap();
        assert_eq!(fits.len(), 32);
        let best = best_candidate(&fits, 1).unwrap();
        assert!(best.aic.is_finite());
        assert!(fits
            .iter()
            .filter(|f| f.order.d == 1 && f.error.is_none())
            .all(|f| f.aic >= best.aic));
    }

    #[test]
    fn csv_round_trip_and_missing_year() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pit.csv");
        std::fs::write(
            &p,
            "year,unsheltered,sheltered\n2019,10,5\n2020,12,6\n2021,,6\n2022,15,7\n",
        )
        .unwrap();
        let s = PitSeries::read_csv(&p).unwrap();
        assert_eq!(s.years, vec![2019, 2020, 2022]);
        assert_eq!(s.gaps(), vec![2021]);
        s.write_csv(&p).unwrap();
        assert_eq!(PitSeries::read_csv(&p).unwrap(), s);
        std::fs::write(&p, "year,unsheltered,sheltered\n2019,x,5\n2020,12,0\n").unwrap();
        match PitSeries::read_csv(&p) {
            Err(Error::Rows { problems, .. }) => assert_eq!(problems.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
