//! Signal/decoy intensity selection: a coarse grid over `(μs, ν1)` followed
//! by repeated local grids around the incumbent, each window a fixed
//! fraction of the previous one. The second decoy is vacuum.

use std::cmp::Ordering;

use crate::channel::ChannelParams;
use crate::decoy::baseline_key_rate;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::primitives::IntensitySet;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::OptimizerConfig(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Range { lo, hi })
    }

    /// `n` evenly spaced points including both ends; a single point is the
    /// midpoint.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => {
                let step = (self.hi - self.lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        if i == n - 1 {
                            self.hi
                        } else {
                            self.lo + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }

    fn window(&self, center: f64, half_width: f64) -> Range {
        Range {
            lo: (center - half_width).max(self.lo),
            hi: (center + half_width).min(self.hi),
        }
    }

    fn spacing(&self, n: usize) -> f64 {
        if n > 1 {
            (self.hi - self.lo) / (n - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationConfig {
    pub mu_range: Range,
    pub nu1_range: Range,
    pub coarse_grid: usize,
    pub refine_iterations: usize,
    pub refine_shrink: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            mu_range: Range { lo: 0.05, hi: 1.0 },
            nu1_range: Range { lo: 0.005, hi: 0.5 },
            coarse_grid: 64,
            refine_iterations: 4,
            refine_shrink: 0.25,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        Range::new(self.mu_range.lo, self.mu_range.hi)?;
        Range::new(self.nu1_range.lo, self.nu1_range.hi)?;
        if !(self.nu1_range.lo > 0.0) {
            return Err(Error::OptimizerConfig("nu1 range must lie above 0".into()));
        }
        if self.coarse_grid == 0 {
            return Err(Error::OptimizerConfig(
                "coarse grid needs at least one point".into(),
            ));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(Error::OptimizerConfig(format!(
                "refine shrink {} not in (0, 1)",
                self.refine_shrink
            )));
        }
        if self.nu1_range.lo >= self.mu_range.hi {
            return Err(Error::OptimizerConfig(
                "no feasible point with nu1 < mu_s".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub intensities: IntensitySet,
    pub rate: f64,
}

/// Result of an intensity search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimization {
    Found(Optimum),
    /// Every feasible point gives `R <= 0`; carries the least bad point.
    NoPositiveRate(Optimum),
}

impl Optimization {
    /// The best point regardless of sign.
    pub fn best(&self) -> Optimum {
        match *self {
            Optimization::Found(o) | Optimization::NoPositiveRate(o) => o,
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Optimization::Found(_))
    }
}

/// Higher rate wins; ties go to the lowest μs, then the lowest ν1.
fn better(a: &Optimum, b: &Optimum) -> bool {
    match a.rate.partial_cmp(&b.rate) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => {
            let (ia, ib) = (&a.intensities, &b.intensities);
            (ia.mu_s(), ia.nu_1()) < (ib.mu_s(), ib.nu_1())
        }
    }
}

fn feasible_points(mu: &Range, nu1: &Range, n: usize) -> Vec<IntensitySet> {
    let nus = nu1.grid(n);
    mu.grid(n)
        .into_iter()
        .flat_map(|m| {
            nus.iter()
                .filter_map(move |&v| IntensitySet::vacuum_decoy(m, v).ok())
        })
        .collect()
}

/// Evaluates every point and returns the best one, or `None` if the set is
/// empty. The reduction is sequential, so the result does not depend on how
/// evaluation was scheduled.
pub fn best_of(
    points: &[IntensitySet],
    ch: &ChannelParams,
    exec: Execution,
) -> Result<Option<Optimum>> {
    let rates = exec.try_map(points, |p| baseline_key_rate(p, ch))?;
    Ok(points
        .iter()
        .zip(rates)
        .map(|(&intensities, rate)| Optimum { intensities, rate })
        .fold(None, |best: Option<Optimum>, cand| match best {
            Some(b) if !better(&cand, &b) => Some(b),
            _ => Some(cand),
        }))
}

/// Rate-maximizing `(μs, ν1)` for the no-attack channel.
pub fn optimize_intensities(
    ch: &ChannelParams,
    cfg: &OptimizationConfig,
    exec: Execution,
) -> Result<Optimization> {
    cfg.validate()?;
    let n = cfg.coarse_grid;
    let coarse = feasible_points(&cfg.mu_range, &cfg.nu1_range, n);
    let mut best = best_of(&coarse, ch, exec)?.ok_or_else(|| {
        Error::OptimizerConfig("coarse grid contains no point with nu1 < mu_s".into())
    })?;

    let mut half_mu = cfg.mu_range.spacing(n);
    let mut half_nu = cfg.nu1_range.spacing(n);
    for _ in 0..cfg.refine_iterations {
        if half_mu == 0.0 && half_nu == 0.0 {
            break;
        }
        let centre = best.intensities;
        let mu_win = cfg.mu_range.window(centre.mu_s(), half_mu);
        let nu_win = cfg.nu1_range.window(centre.nu_1(), half_nu);
        let local = feasible_points(&mu_win, &nu_win, n);
        if let Some(cand) = best_of(&local, ch, exec)? {
            if better(&cand, &best) {
                best = cand;
            }
        }
        half_mu *= cfg.refine_shrink;
        half_nu *= cfg.refine_shrink;
    }

    Ok(if best.rate > 0.0 {
        Optimization::Found(best)
    } else {
        Optimization::NoPositiveRate(best)
    })
}
