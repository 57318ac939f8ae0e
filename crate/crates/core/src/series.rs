//! The generator `L f(η) = Σ_i [f(T_i η) − f(η)]` evaluated pointwise on
//! local observables, its iterates, and the Taylor series
//! `Σ_k t^k L^k f(η) / k!`.
//!
//! Locality is measured in intervals between consecutive ones: an
//! observable is `N`-local when it only reads the heights on
//! `I_{-N} ∪ … ∪ I_N`. Adding a grain outside `I_{-N-1} ∪ … ∪ I_{N+1}` then
//! leaves it unchanged, so every sum below is finite.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::config::{decency_report, interval_decomposition, HeightConfig, Tail};
use crate::error::{Result, SandpileError};
use crate::toppling::apply_topple;

type Eval = Arc<dyn Fn(&HeightConfig) -> Result<f64> + Send + Sync>;

/// A bounded observable that reads only the intervals `I_{-N}, …, I_N`.
#[derive(Clone)]
pub struct LocalFunction {
    name: String,
    locality: u32,
    sup_norm: f64,
    eval: Eval,
}

impl fmt::Debug for LocalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalFunction")
            .field("name", &self.name)
            .field("locality", &self.locality)
            .field("sup_norm", &self.sup_norm)
            .finish_non_exhaustive()
    }
}

/// Default cap on `|I_k|` for the `interval-len` builtin.
pub const INTERVAL_LEN_CAP: u64 = 64;

impl LocalFunction {
    pub fn new<F>(name: impl Into<String>, locality: u32, sup_norm: f64, eval: F) -> Self
    where
        F: Fn(&HeightConfig) -> Result<f64> + Send + Sync + 'static,
    {
        Self { name: name.into(), locality, sup_norm, eval: Arc::new(eval) }
    }

    /// `η(0) − 1`.
    pub fn occ0() -> Self {
        Self::new("occ0", 0, 1.0, |eta| Ok(eta.get(0)? as f64 - 1.0))
    }

    /// `χ(η(0) = 2) χ(η(1) = 2)`.
    pub fn pair01() -> Self {
        Self::new("pair01", 1, 1.0, |eta| Ok(if eta.get(0)? == 2 && eta.get(1)? == 2 { 1.0 } else { 0.0 }))
    }

    /// `min(|I_k(η)|, cap)`.
    pub fn interval_len(k: i64, cap: u64) -> Self {
        Self::new(format!("interval-len {k}"), k.unsigned_abs() as u32, cap as f64, move |eta| {
            Ok(interval_decomposition(eta, k, k)?.len_of(k).min(cap) as f64)
        })
    }

    /// `occ0`, `pair01` or `interval-len k`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let mut parts = spec.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("occ0"), None, _) => Ok(Self::occ0()),
            (Some("pair01"), None, _) => Ok(Self::pair01()),
            (Some("interval-len"), Some(k), None) => {
                let k = k.parse().map_err(|e| SandpileError::Parse(format!("interval index `{k}`: {e}")))?;
                Ok(Self::interval_len(k, INTERVAL_LEN_CAP))
            }
            _ => Err(SandpileError::Parse(format!("unknown observable `{spec}` (occ0, pair01, interval-len k)"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn locality(&self) -> u32 {
        self.locality
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn eval(&self, eta: &HeightConfig) -> Result<f64> {
        (self.eval)(eta)
    }
}

/// Value of `L f(η)` with the sites that were summed over.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Interval indices `j_lo..=j_hi` whose sites were summed.
    pub j_lo: i64,
    pub j_hi: i64,
    /// The summed sites, `I_{j_lo} ∪ … ∪ I_{j_hi}`.
    pub sites: (i64, i64),
}

/// `L f(η)`, summing only over `I_{-N-1} ∪ … ∪ I_{N+1}`.
pub fn apply_l(f: &LocalFunction, eta: &HeightConfig) -> Result<GeneratorValue> {
    let reach = f.locality as i64 + 1;
    let dec = interval_decomposition(eta, -reach, reach)?;
    let sites = dec.span(-reach, reach);
    let base = f.eval(eta)?;
    let mut value = 0.0;
    for i in sites.clone() {
        let mut next = eta.clone();
        apply_topple(&mut next, i)?;
        value += f.eval(&next)? - base;
    }
    Ok(GeneratorValue { value, j_lo: -reach, j_hi: reach, sites: (*sites.start(), *sites.end()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesOptions {
    /// Largest generator power evaluated.
    pub depth_cap: usize,
    /// Interval half-width used to estimate `a(η)` for the radius.
    pub radius_window: u32,
    pub memoize: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { depth_cap: 8, radius_window: 200, memoize: true }
    }
}

type MemoKey = (usize, i64, Vec<u8>);

struct Recursion<'a> {
    f: &'a LocalFunction,
    memo: Option<HashMap<MemoKey, f64>>,
}

impl Recursion<'_> {
    /// `η` cut down to `[X_{-N-m-1}, X_{N+m}]`, which determines `L^m f(η)`.
    fn footprint(&self, eta: &HeightConfig, m: usize) -> Result<HeightConfig> {
        let r = self.f.locality as i64 + m as i64;
        let dec = interval_decomposition(eta, -r, r)?;
        eta.restrict(dec.one(-r - 1), dec.one(r), Tail::Unspecified)
    }

    fn eval(&mut self, eta: &HeightConfig, m: usize) -> Result<f64> {
        let local = self.footprint(eta, m)?;
        let key = (m, local.lo(), local.heights().to_vec());
        if let Some(v) = self.memo.as_ref().and_then(|memo| memo.get(&key)) {
            return Ok(*v);
        }
        let value = if m == 0 {
            self.f.eval(&local)?
        } else {
            // the leftmost stored site is the bounding one X_{-N-m-1}
            let here = self.eval(&local, m - 1)?;
            let mut sum = 0.0;
            for i in local.lo() + 1..=local.hi() {
                let mut next = local.clone();
                apply_topple(&mut next, i)?;
                sum += self.eval(&next, m - 1)? - here;
            }
            sum
        };
        if let Some(memo) = self.memo.as_mut() {
            memo.insert(key, value);
        }
        Ok(value)
    }
}

fn check_depth(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(SandpileError::DepthLimit { required: n, cap });
    }
    Ok(())
}

/// `L^n f(η)` by the recursion `L^{m} f(η) = Σ_i [L^{m-1} f(T_i η) − L^{m-1} f(η)]`
/// over `i ∈ I_{-N-m} ∪ … ∪ I_{N+m}`.
///
/// Each level works on the configuration cut down to the sites that
/// determine it (with an unspecified tail), so a locality mistake shows up
/// as an `InsufficientWindow` error rather than a wrong value.
pub fn iterate_ln(f: &LocalFunction, eta: &HeightConfig, n: usize, opts: &SeriesOptions) -> Result<f64> {
    check_depth(n, opts.depth_cap)?;
    let mut it = Recursion { f, memo: opts.memoize.then(HashMap::new) };
    it.eval(eta, n)
}

/// `(|I_{-N-n}| + … + |I_{N+n}|)^n 2^n ‖f‖`, and `‖f‖` for `n = 0`.
pub fn bound_ln(f: &LocalFunction, eta: &HeightConfig, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(f.sup_norm);
    }
    let r = f.locality as i64 + n as i64;
    let total = interval_decomposition(eta, -r, r)?.total_len(-r, r) as f64;
    Ok(total.powi(n as i32) * 2f64.powi(n as i32) * f.sup_norm)
}

/// Upper bound on the number of configurations visited by the
/// unmemoized recursion for `L^n f(η)`.
pub fn cost_estimate(f: &LocalFunction, eta: &HeightConfig, n: usize) -> Result<f64> {
    let mut cost = 1.0;
    let mut total = 1.0;
    for m in (1..=n).rev() {
        let r = f.locality as i64 + m as i64;
        cost *= interval_decomposition(eta, -r, r)?.total_len(-r, r) as f64 + 1.0;
        total += cost;
    }
    Ok(total)
}

/// Largest `J` such that `X_{-J-1}, …, X_J` are known from the window,
/// or `None` when the all-ones tail makes every index resolvable.
fn resolvable_index(eta: &HeightConfig) -> Option<i64> {
    if eta.tail() == Tail::AllOnes {
        return None;
    }
    let right = eta.iter().filter(|&(x, h)| x >= 0 && h == 1).count() as i64;
    let left = eta.iter().filter(|&(x, h)| x < 0 && h == 1).count() as i64;
    Some((right - 1).min(left - 1))
}

/// `1 / (4 e a)` with `a` estimated from intervals up to `n_max`.
pub fn radius(eta: &HeightConfig, n_max: u32) -> Result<f64> {
    Ok(decency_report(eta, n_max)?.radius)
}

fn effective_window(eta: &HeightConfig, n_max: u32) -> Result<u32> {
    match resolvable_index(eta) {
        None => Ok(n_max),
        Some(j) if j >= 1 => Ok(n_max.min(j as u32)),
        Some(_) => Err(SandpileError::InsufficientWindow { site: eta.hi() + 1, lo: eta.lo(), hi: eta.hi() }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    pub truncation_k: usize,
    /// Bound on `Σ_{k > K} t^k |L^k f(η)| / k!`.
    pub tail_bound: f64,
    pub radius: f64,
    pub t: f64,
    /// `L^k f(η)` for `k = 0..=K`.
    pub iterates: Vec<f64>,
}

/// Bounds `b_k ≥ t^k |L^k f(η)| / k!` from the interval lengths, for
/// `k = 0..=k_max`, and a bound on their sum beyond `k_max`.
///
/// Past the resolvable range the lengths are bounded by `S_k ≤ A k + B`;
/// then `b_k ≤ ‖f‖ e^{B/A} (2 e A t)^k`. With an all-ones tail `A = 2` and
/// the bound is exact; on a finite window `A = 2 a(η)` uses the estimate of
/// `a(η)`.
fn term_bounds(f: &LocalFunction, eta: &HeightConfig, t: f64, a_est: f64) -> Result<(Vec<f64>, f64)> {
    let nl = f.locality as i64;
    let (k_max, slope) = match resolvable_index(eta) {
        None => {
            let extent = (eta.hi() - eta.lo() + 1).max(1);
            (extent + 400, 2.0)
        }
        Some(j) => ((j - nl).max(0), 2.0 * a_est),
    };
    let dec = interval_decomposition(eta, -nl - k_max, nl + k_max)?;
    let mut terms = Vec::with_capacity(k_max as usize + 1);
    let mut offset: f64 = 0.0;
    let mut log_fact = 0.0;
    for k in 0..=k_max {
        let s = dec.total_len(-nl - k, nl + k) as f64;
        offset = offset.max(s - slope * k as f64);
        if k == 0 {
            terms.push(f.sup_norm);
            continue;
        }
        log_fact += (k as f64).ln();
        let kf = k as f64;
        terms.push(f.sup_norm * (kf * (2.0 * t * s).ln() - log_fact).exp());
    }
    let q = 2.0 * std::f64::consts::E * slope * t;
    if q >= 1.0 {
        return Err(SandpileError::RadiusExceeded { t, radius: 1.0 / (2.0 * std::f64::consts::E * slope) });
    }
    let beyond = f.sup_norm * (offset / slope).exp() * q.powi(k_max as i32 + 1) / (1.0 - q);
    Ok((terms, beyond))
}

/// Truncated Taylor series of `S(t) f(η)` with a remainder below `tol`.
pub fn taylor_semigroup(
    f: &LocalFunction,
    eta: &HeightConfig,
    t: f64,
    tol: f64,
    opts: &SeriesOptions,
) -> Result<SeriesResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SandpileError::Numerical(format!("tolerance {tol} must be positive")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SandpileError::Numerical(format!("time {t} must be finite and nonnegative")));
    }
    let window = effective_window(eta, opts.radius_window)?;
    let report = decency_report(eta, window)?;
    if t >= report.radius {
        return Err(SandpileError::RadiusExceeded { t, radius: report.radius });
    }
    if t == 0.0 {
        let v = f.eval(eta)?;
        return Ok(SeriesResult {
            value: v,
            truncation_k: 0,
            tail_bound: 0.0,
            radius: report.radius,
            t,
            iterates: vec![v],
        });
    }
    let (terms, beyond) = term_bounds(f, eta, t, report.a_estimate)?;
    // suffix[k] = bound on Σ_{j ≥ k} t^j |L^j f| / j!
    let mut suffix = vec![beyond; terms.len() + 1];
    for k in (0..terms.len()).rev() {
        suffix[k] = suffix[k + 1] + terms[k];
    }
    let k = (0..terms.len())
        .find(|&k| suffix[k + 1] < tol)
        .ok_or(SandpileError::DepthLimit { required: terms.len(), cap: opts.depth_cap })?;
    check_depth(k, opts.depth_cap)?;
    let mut it = Recursion { f, memo: opts.memoize.then(HashMap::new) };
    let mut iterates = Vec::with_capacity(k + 1);
    let mut value = 0.0;
    let mut coeff = 1.0;
    for j in 0..=k {
        if j > 0 {
            coeff *= t / j as f64;
        }
        let lj = it.eval(eta, j)?;
        iterates.push(lj);
        value += coeff * lj;
    }
    Ok(SeriesResult { value, truncation_k: k, tail_bound: suffix[k + 1], radius: report.radius, t, iterates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CriticalSet;

    fn eta_of(xs: &[i64]) -> HeightConfig {
        HeightConfig::from_critical_set(&xs.iter().copied().collect::<CriticalSet>())
    }

    #[test]
    fn generator_examples() {
        let occ = LocalFunction::new("eta0", 0, 2.0, |e| Ok(e.get(0)? as f64));
        let v = apply_l(&occ, &HeightConfig::all_ones()).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(v.sites, (-1, 1));
        assert_eq!(apply_l(&occ, &eta_of(&[0])).unwrap().value, -1.0);
        let constant = LocalFunction::new("one", 0, 1.0, |_| Ok(1.0));
        assert_eq!(apply_l(&constant, &eta_of(&[-1, 0, 3])).unwrap().value, 0.0);
    }

    #[test]
    fn iterates_start_with_f_and_lf() {
        let f = LocalFunction::occ0();
        let opts = SeriesOptions::default();
        let eta = eta_of(&[0, 2]);
        assert_eq!(iterate_ln(&f, &eta, 0, &opts).unwrap(), 1.0);
        assert_eq!(iterate_ln(&f, &eta, 1, &opts).unwrap(), apply_l(&f, &eta).unwrap().value);
        assert!(matches!(iterate_ln(&f, &eta, 9, &opts), Err(SandpileError::DepthLimit { required: 9, cap: 8 })));
    }

    #[test]
    fn bounds_examples() {
        let f = LocalFunction::occ0();
        assert_eq!(bound_ln(&f, &HeightConfig::all_ones(), 1).unwrap(), 6.0);
        assert_eq!(bound_ln(&f, &HeightConfig::all_ones(), 0).unwrap(), 1.0);
        let heights = (-40..=40).map(|x: i64| if x.rem_euclid(2) == 0 { 2 } else { 1 }).collect();
        let periodic = HeightConfig::new(-40, heights, Tail::Unspecified).unwrap();
        assert_eq!(bound_ln(&f, &periodic, 2).unwrap(), 400.0);
    }

    #[test]
    fn builtins_parse() {
        assert_eq!(LocalFunction::builtin("pair01").unwrap().locality(), 1);
        assert_eq!(LocalFunction::builtin("interval-len -2").unwrap().locality(), 2);
        assert!(LocalFunction::builtin("energy").is_err());
        let len = LocalFunction::builtin("interval-len 0").unwrap();
        assert_eq!(len.eval(&eta_of(&[0])).unwrap(), 2.0);
    }

    #[test]
    fn taylor_at_time_zero() {
        let res =
            taylor_semigroup(&LocalFunction::occ0(), &eta_of(&[0]), 0.0, 1e-8, &SeriesOptions::default()).unwrap();
        assert_eq!((res.value, res.truncation_k, res.tail_bound), (1.0, 0, 0.0));
    }

    #[test]
    fn taylor_rejects_large_times() {
        let err =
            taylor_semigroup(&LocalFunction::occ0(), &HeightConfig::all_ones(), 0.1, 1e-6, &SeriesOptions::default());
        assert!(matches!(err, Err(SandpileError::RadiusExceeded { .. })));
    }

    #[test]
    fn radius_examples() {
        let r = radius(&eta_of(&[0, 3]), 400).unwrap();
        assert!((r - 1.0 / (4.0 * std::f64::consts::E)).abs() < 2e-3);
        let heights = (-300..=300).map(|x: i64| if x.rem_euclid(2) == 0 { 2 } else { 1 }).collect();
        let periodic = HeightConfig::new(-300, heights, Tail::Unspecified).unwrap();
        assert!((radius(&periodic, 100).unwrap() - 0.04599).abs() < 1e-3);
        assert!(radius(&HeightConfig::all_twos(), 5).is_err());
    }
}
