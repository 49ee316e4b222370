//! Deterministic particle approximations of a fixed target measure.
//!
//! Two constructions are provided: gradient descent on particle positions
//! minimizing squared MMD to the target, and greedy kernel herding over a
//! candidate grid. [`rate_experiment`] fits the log-log slope of the achieved
//! MMD against the particle count.

use std::io;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::Kernel;
use crate::mdp::draw_index;
use crate::measures::{DiscreteMeasure, ParticleSet};
use crate::mmd::{embedding_at, kernel_expectation, mmd_grad};

/// MMD values at or below this are treated as exact representation and
/// dropped from slope fits.
pub const ZERO_MMD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct HerdingResult {
    pub n: usize,
    pub particles: ParticleSet,
    pub mmd_value: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentOptions {
    pub max_steps: usize,
    pub lr: f64,
    pub inits: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_steps: 2000,
            lr: 0.1,
            inits: 5,
        }
    }
}

impl DescentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.inits == 0 {
            return domain("descent needs at least one restart");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return domain(format!("learning rate must be positive, got {}", self.lr));
        }
        Ok(())
    }
}

/// Squared MMD between `uniform(z)` and a fixed target, with the target's
/// self-term cached.
struct Objective<'a> {
    target: &'a DiscreteMeasure,
    k: &'a Kernel,
    self_term: f64,
}

impl<'a> Objective<'a> {
    fn new(target: &'a DiscreteMeasure, k: &'a Kernel) -> Self {
        let self_term = kernel_expectation(target, target, k);
        Objective { target, k, self_term }
    }

    fn value(&self, z: &[f64]) -> f64 {
        let n = z.len() as f64;
        let zz: f64 = z
            .iter()
            .map(|&a| z.iter().map(|&b| self.k.eval(a, b)).sum::<f64>())
            .sum();
        let zt: f64 = z.iter().map(|&a| embedding_at(self.target, self.k, a)).sum();
        zz / (n * n) + self.self_term - 2.0 * zt / n
    }

    fn grad(&self, z: &[f64]) -> Vec<f64> {
        mmd_grad(z, self.target, self.k)
    }
}

fn to_distance(squared: f64) -> f64 {
    squared.max(0.0).sqrt()
}

/// Gradient descent from `z`. A step is accepted only if it lowers the
/// objective; otherwise the step size is halved.
fn descend(obj: &Objective<'_>, mut z: Vec<f64>, opts: &DescentOptions) -> Result<(Vec<f64>, f64, usize)> {
    let mut f = obj.value(&z);
    if !f.is_finite() {
        return Err(Error::Consistency(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut lr = opts.lr;
    let mut steps = 0;
    while steps < opts.max_steps && lr > 1e-14 {
        steps += 1;
        let g = obj.grad(&z);
        if g.iter().all(|&x| x == 0.0) {
            break;
        }
        let cand: Vec<f64> = z.iter().zip(&g).map(|(x, d)| x - lr * d).collect();
        let fc = obj.value(&cand);
        if !fc.is_finite() {
            return Err(Error::Consistency(format!("objective became {fc} at step {steps}")));
        }
        if fc < f {
            z = cand;
            f = fc;
        } else {
            lr /= 2.0;
        }
    }
    Ok((z, f, steps))
}

/// Draws `n` atoms from `target`.
pub fn sample_target<R: Rng + ?Sized>(target: &DiscreteMeasure, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| target.atoms()[draw_index(target.weights().iter().copied(), rng)])
        .collect()
}

/// Runs descent from each start in parallel and keeps the lowest objective.
/// Ties go to the earliest start so the result does not depend on scheduling.
fn best_of(obj: &Objective<'_>, starts: Vec<Vec<f64>>, opts: &DescentOptions) -> Result<HerdingResult> {
    let runs: Vec<_> = starts.into_par_iter().map(|z| descend(obj, z, opts)).collect();
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.1 < b.1) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((z, f, steps)) => Ok(HerdingResult {
            n: z.len(),
            particles: ParticleSet::new(z)?,
            mmd_value: to_distance(f),
            iterations_used: steps,
        }),
        None => Err(last_err.unwrap_or_else(|| Error::Consistency("no restarts were run".into()))),
    }
}

/// Minimizes squared MMD between `n` equally weighted particles and `target`
/// by gradient descent, keeping the best of `opts.inits` restarts. Each
/// restart starts from `n` samples of the target.
pub fn optimize_particles<R: Rng + ?Sized>(
    target: &DiscreteMeasure,
    n: usize,
    k: &Kernel,
    opts: &DescentOptions,
    rng: &mut R,
) -> Result<HerdingResult> {
    if n == 0 {
        return domain("particle count must be at least 1");
    }
    opts.validate()?;
    let starts: Vec<Vec<f64>> = (0..opts.inits).map(|_| sample_target(target, n, rng)).collect();
    best_of(&Objective::new(target, k), starts, opts)
}

/// Descent over an increasing list of particle counts where each count also
/// gets a warm start built from the previous solution: its particles repeated
/// `n / prev` times, topped up with target samples. When each count divides
/// the next, the warm start represents exactly the previous measure, so the
/// achieved MMD cannot increase along the sweep.
pub fn descent_sweep<R: Rng + ?Sized>(
    target: &DiscreteMeasure,
    ns: &[usize],
    k: &Kernel,
    opts: &DescentOptions,
    rng: &mut R,
) -> Result<Vec<HerdingResult>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return domain("particle counts must be strictly increasing");
    }
    opts.validate()?;
    let obj = Objective::new(target, k);
    let mut out: Vec<HerdingResult> = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return domain("particle count must be at least 1");
        }
        let mut starts: Vec<Vec<f64>> = (0..opts.inits).map(|_| sample_target(target, n, rng)).collect();
        if let Some(prev) = out.last() {
            let p = prev.particles.as_slice();
            let mut warm: Vec<f64> = p.iter().cycle().take(p.len() * (n / p.len())).copied().collect();
            warm.extend(sample_target(target, n - warm.len(), rng));
            starts.insert(0, warm);
        }
        out.push(best_of(&obj, starts, opts)?);
    }
    Ok(out)
}

/// Greedy kernel herding over `grid`: particle `t + 1` is the candidate `c`
/// maximizing `E_{x ~ target} k(x, c) - (1 / (t + 1)) sum_{j <= t} k(x_j, c)`.
/// Ties go to the earliest grid point.
pub fn greedy_herd(target: &DiscreteMeasure, n: usize, k: &Kernel, grid: &[f64]) -> Result<HerdingResult> {
    if grid.is_empty() {
        return domain("candidate grid is empty");
    }
    if n == 0 {
        return domain("particle count must be at least 1");
    }
    let embed: Vec<f64> = grid.par_iter().map(|&c| embedding_at(target, k, c)).collect();
    let mut pulled = vec![0.0; grid.len()];
    let mut chosen = Vec::with_capacity(n);
    for t in 0..n {
        let denom = (t + 1) as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (e, s)) in embed.iter().zip(&pulled).enumerate() {
            let score = e - s / denom;
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        let x = grid[best];
        chosen.push(x);
        for (s, &c) in pulled.iter_mut().zip(grid) {
            *s += k.eval(x, c);
        }
    }
    let obj = Objective::new(target, k);
    let mmd_value = to_distance(obj.value(&chosen));
    Ok(HerdingResult {
        n,
        particles: ParticleSet::new(chosen)?,
        mmd_value,
        iterations_used: n,
    })
}

/// Equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Standard normal density restricted to `atoms` equally spaced points on
/// `[lo, hi]` and renormalized.
pub fn discretized_gaussian(atoms: usize, lo: f64, hi: f64) -> Result<DiscreteMeasure> {
    if atoms == 0 || lo.is_nan() || hi.is_nan() || lo >= hi {
        return domain("need at least one atom on a nonempty interval");
    }
    let xs = linspace(lo, hi, atoms);
    let w: Vec<f64> = xs.iter().map(|x| (-x * x / 2.0).exp()).collect();
    let total: f64 = w.iter().sum();
    DiscreteMeasure::new(xs, w.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateMethod {
    Descent {
        #[serde(default)]
        options: DescentOptions,
    },
    Greedy {
        grid_lo: f64,
        grid_hi: f64,
        grid_points: usize,
    },
}

impl RateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RateMethod::Descent { .. } => "descent",
            RateMethod::Greedy { .. } => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// `(n, achieved MMD)` for every requested count, including excluded ones.
    pub points: Vec<(usize, f64)>,
    /// Counts that entered the fit.
    pub used: Vec<usize>,
    pub slope: f64,
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return domain("slope fit needs two or more paired points");
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return domain("slope fit needs distinct abscissae");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Fits `log(MMD)` against `log(n)`. Points with MMD at or below
/// [`ZERO_MMD`] are excluded, as are points where the optional `floor` is
/// 10% or more of the measured MMD.
pub fn fit_rate(points: &[(usize, f64)], floor: Option<f64>) -> Result<RateFit> {
    let used: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, v)| v > ZERO_MMD && floor.is_none_or(|f| f < 0.1 * v))
        .collect();
    if used.len() < 3 {
        return domain(format!("only {} usable points for the rate fit", used.len()));
    }
    let xs: Vec<f64> = used.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, v)| v.ln()).collect();
    Ok(RateFit {
        points: points.to_vec(),
        used: used.iter().map(|&(n, _)| n).collect(),
        slope: least_squares_slope(&xs, &ys)?,
    })
}

pub(crate) fn check_counts(ns: &[usize]) -> Result<()> {
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 4 || sorted[0] == 0 {
        return domain("rate experiment needs at least 4 distinct positive counts");
    }
    if sorted[sorted.len() - 1] < 4 * sorted[0] {
        return domain("particle counts must span at least two octaves");
    }
    Ok(())
}

/// Achieved MMD at each count in `ns`, then the log-log slope.
/// Descent counts are independent runs; each draws its restarts from `rng`
/// in order.
pub fn rate_experiment<R: Rng + ?Sized>(
    target: &DiscreteMeasure,
    ns: &[usize],
    k: &Kernel,
    method: &RateMethod,
    floor: Option<f64>,
    rng: &mut R,
) -> Result<RateFit> {
    check_counts(ns)?;
    let points = rate_points(target, ns, k, method, rng)?;
    fit_rate(&points, floor)
}

/// The `(n, MMD)` pairs behind [`rate_experiment`].
pub fn rate_points<R: Rng + ?Sized>(
    target: &DiscreteMeasure,
    ns: &[usize],
    k: &Kernel,
    method: &RateMethod,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    match method {
        RateMethod::Descent { options } => ns
            .iter()
            .map(|&n| optimize_particles(target, n, k, options, rng).map(|r| (n, r.mmd_value)))
            .collect(),
        RateMethod::Greedy {
            grid_lo,
            grid_hi,
            grid_points,
        } => {
            let grid = linspace(*grid_lo, *grid_hi, *grid_points);
            ns.iter()
                .map(|&n| greedy_herd(target, n, k, &grid).map(|r| (n, r.mmd_value)))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mmd: f64,
    pub method: String,
    pub seed: u64,
}

/// Writes rows as CSV with header `n,mmd,method,seed`.
pub fn write_rate_csv<W: io::Write>(rows: &[RateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
