//! Calibration of the abcd parameters against observed streamflow: NSE on the
//! post-warm-up months, a deterministic seed grid, and bounded Nelder–Mead
//! refinement of the best seeds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abcd::{simulate, AbcdParams, AbcdState, Forcing, ParamError};
use crate::metrics::{nse, MetricError, PairedSeries};

pub const DEFAULT_WARMUP_MONTHS: usize = 24;
pub const DEFAULT_POINTS_PER_AXIS: usize = 5;
/// Seeds refined by the simplex.
pub const REFINED_SEEDS: usize = 5;
/// Minimum paired months for `calibrate`.
pub const MIN_CALIBRATION_MONTHS: usize = 48;
pub const DEFAULT_RESTARTS: usize = 8;
/// NSE spread at which a refinement stops. The response to `a` near 1 is weak
/// enough that 1e-6 halts several hundredths away from the optimum.
pub const DEFAULT_CALIBRATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("forcing has {len} months; need more than the {warmup} warm-up months")]
    InsufficientLength { len: usize, warmup: usize },
    #[error("calibration needs at least {MIN_CALIBRATION_MONTHS} months of paired data, got {0}")]
    TooFewMonths(usize),
    #[error("observed streamflow has {observed} values for {forcing} forcing months")]
    LengthMismatch { observed: usize, forcing: usize },
    #[error("observed streamflow missing at month index {0} (after warm-up)")]
    MissingObservation(usize),
    #[error("bounds: {0}")]
    Bounds(String),
    #[error("points_per_axis must be >= 2, got {0}")]
    GridTooCoarse(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Box bounds for `(a, b, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self { lower: [0.1, 1.0, 0.0, 0.01], upper: [1.0, 1000.0, 1.0, 10.0] }
    }
}

impl ParamBounds {
    pub fn new(lower: [f64; 4], upper: [f64; 4]) -> Result<Self, CalibError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<(), CalibError> {
        for i in 0..4 {
            if !(self.lower[i] < self.upper[i]) {
                return Err(CalibError::Bounds(format!(
                    "axis {i}: lower {} must be < upper {}",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        // corners must be valid parameter sets
        AbcdParams::from_array(self.lower)?;
        AbcdParams::from_array(self.upper)?;
        Ok(())
    }

    pub fn contains(&self, v: &[f64; 4]) -> bool {
        (0..4).all(|i| self.lower[i] <= v[i] && v[i] <= self.upper[i])
    }

    pub fn clip(&self, v: &mut [f64; 4]) {
        for i in 0..4 {
            v[i] = v[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maps unit-cube coordinates to parameters: `b` log-uniformly, the others linearly.
    fn at_unit(&self, u: &[f64; 4]) -> [f64; 4] {
        let mut v = [0.0; 4];
        for i in 0..4 {
            v[i] = if u[i] <= 0.0 {
                self.lower[i]
            } else if u[i] >= 1.0 {
                self.upper[i]
            } else if i == 1 {
                let (lo, hi) = (self.lower[1].ln(), self.upper[1].ln());
                (lo + u[1] * (hi - lo)).exp()
            } else {
                self.lower[i] + u[i] * (self.upper[i] - self.lower[i])
            };
        }
        // exp/ln round trips can land a hair outside
        self.clip(&mut v);
        v
    }

    fn unit_of(&self, v: &[f64; 4]) -> [f64; 4] {
        let mut u = [0.0; 4];
        for i in 0..4 {
            u[i] = if i == 1 {
                let (lo, hi) = (self.lower[1].ln(), self.upper[1].ln());
                (v[1].ln() - lo) / (hi - lo)
            } else {
                (v[i] - self.lower[i]) / (self.upper[i] - self.lower[i])
            };
        }
        u
    }
}

/// NSE of simulated against observed streamflow after discarding the first
/// `warmup_months`, simulating from the default initial state.
pub fn objective(
    params: &AbcdParams,
    forcing: &Forcing,
    observed_q: &[Option<f64>],
    warmup_months: usize,
) -> Result<f64, CalibError> {
    let observed = scored_observations(forcing, observed_q, warmup_months)?;
    score(params, forcing, &observed, warmup_months)
}

fn scored_observations(
    forcing: &Forcing,
    observed_q: &[Option<f64>],
    warmup_months: usize,
) -> Result<Vec<f64>, CalibError> {
    if observed_q.len() != forcing.len() {
        return Err(CalibError::LengthMismatch { observed: observed_q.len(), forcing: forcing.len() });
    }
    if forcing.len() <= warmup_months {
        return Err(CalibError::InsufficientLength { len: forcing.len(), warmup: warmup_months });
    }
    observed_q[warmup_months..]
        .iter()
        .enumerate()
        .map(|(i, q)| q.ok_or(CalibError::MissingObservation(i + warmup_months)))
        .collect()
}

fn score(params: &AbcdParams, forcing: &Forcing, observed: &[f64], warmup_months: usize) -> Result<f64, CalibError> {
    let sim: Vec<f64> = simulate(params, AbcdState::default(), forcing)[warmup_months..]
        .iter()
        .map(|s| s.fluxes.q)
        .collect();
    Ok(nse(&PairedSeries::new(observed, &sim)?)?)
}

/// Full Cartesian grid over the bounds, `b` log-spaced, in lexicographic
/// `(a, b, c, d)` order.
pub fn grid_seed(bounds: &ParamBounds, points_per_axis: usize) -> Result<Vec<[f64; 4]>, CalibError> {
    if points_per_axis < 2 {
        return Err(CalibError::GridTooCoarse(points_per_axis));
    }
    bounds.validate()?;
    let k = points_per_axis;
    let axis = |i: usize| -> Vec<f64> {
        (0..k)
            .map(|j| {
                let mut u = [0.0; 4];
                u[i] = j as f64 / (k - 1) as f64;
                bounds.at_unit(&u)[i]
            })
            .collect()
    };
    let axes: [Vec<f64>; 4] = [axis(0), axis(1), axis(2), axis(3)];
    let mut out = Vec::with_capacity(k.pow(4));
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Converged once best and worst vertex scores differ by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge as a fraction of each bound range.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 2000, initial_step: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadResult {
    pub best: [f64; 4],
    pub score: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maximises `f` over the box with reflection/expansion/contraction/shrink
/// coefficients (1, 2, 0.5, 0.5). Trial points are clipped to the bounds. On
/// hitting `max_iter` the best vertex so far is returned with `converged = false`.
pub fn nelder_mead<F>(mut f: F, start: [f64; 4], lower: [f64; 4], upper: [f64; 4], opts: NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64; 4]) -> f64,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let clip = |mut v: [f64; 4]| {
        for i in 0..4 {
            v[i] = v[i].clamp(lower[i], upper[i]);
        }
        v
    };
    let mut evaluations = 0usize;
    let mut eval = |v: &[f64; 4]| {
        evaluations += 1;
        let s = f(v);
        // treat NaN as the worst possible score
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };

    let start = clip(start);
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, eval(&start)));
    for i in 0..4 {
        let mut v = start;
        let h = opts.initial_step * (upper[i] - lower[i]);
        v[i] = if v[i] + h <= upper[i] { v[i] + h } else { v[i] - h };
        let v = clip(v);
        simplex.push((v, eval(&v)));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // best first; stable sort keeps earlier vertices ahead on ties
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        if simplex[0].1 - simplex[4].1 < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; 4];
        for (v, _) in &simplex[..4] {
            for i in 0..4 {
                centroid[i] += v[i] / 4.0;
            }
        }
        let worst = simplex[4];
        let along = |t: f64, toward: &[f64; 4]| {
            let mut p = [0.0; 4];
            for i in 0..4 {
                p[i] = centroid[i] + t * (toward[i] - centroid[i]);
            }
            clip(p)
        };

        let xr = along(-ALPHA, &worst.0);
        let fr = eval(&xr);
        if fr > simplex[0].1 {
            let xe = along(GAMMA, &xr);
            let fe = eval(&xe);
            simplex[4] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > simplex[3].1 {
            simplex[4] = (xr, fr);
            continue;
        }
        let accepted = if fr > worst.1 {
            let xc = along(RHO, &xr);
            let fc = eval(&xc);
            (fc >= fr).then_some((xc, fc))
        } else {
            let xc = along(RHO, &worst.0);
            let fc = eval(&xc);
            (fc > worst.1).then_some((xc, fc))
        };
        if let Some(vertex) = accepted {
            simplex[4] = vertex;
            continue;
        }
        let best = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            let mut p = [0.0; 4];
            for i in 0..4 {
                p[i] = best[i] + SIGMA * (vertex.0[i] - best[i]);
            }
            let p = clip(p);
            *vertex = (p, eval(&p));
        }
    }

    NelderMeadResult { best: simplex[0].0, score: simplex[0].1, converged, iterations, evaluations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub bounds: ParamBounds,
    pub warmup_months: usize,
    pub points_per_axis: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Extra Nelder–Mead runs from a fresh simplex around the previous best;
    /// stops early once a restart gains less than `tol`.
    pub restarts: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            bounds: ParamBounds::default(),
            warmup_months: DEFAULT_WARMUP_MONTHS,
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
            tol: DEFAULT_CALIBRATION_TOL,
            max_iter: 2000,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: AbcdParams,
    pub train_nse: f64,
    pub n_objective_evals: usize,
    pub warmup_months: usize,
    pub converged: bool,
}

impl CalibrationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Scores the seed grid, refines the best `REFINED_SEEDS` seeds with
/// Nelder–Mead in unit-cube coordinates (log scale for `b`), and returns the
/// best refinement. Ties on score go to the seed with the lower grid index.
pub fn calibrate(
    forcing: &Forcing,
    observed_q: &[Option<f64>],
    opts: &CalibrationOptions,
) -> Result<CalibrationResult, CalibError> {
    let observed = scored_observations(forcing, observed_q, opts.warmup_months)?;
    if forcing.len() < MIN_CALIBRATION_MONTHS {
        return Err(CalibError::TooFewMonths(forcing.len()));
    }
    let seeds = grid_seed(&opts.bounds, opts.points_per_axis)?;
    let warmup = opts.warmup_months;
    // validate once so the inner objective cannot fail on data problems
    PairedSeries::new(&observed, &observed).and_then(|p| nse(&p))?;

    let eval = |v: &[f64; 4]| -> f64 {
        match AbcdParams::from_array(*v) {
            Ok(p) => score(&p, forcing, &observed, warmup).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let seed_scores = parallel_map(&seeds, eval);
    let mut n_evals = seeds.len();

    let mut ranked: Vec<usize> = (0..seeds.len()).collect();
    ranked.sort_by(|&i, &j| seed_scores[j].total_cmp(&seed_scores[i]).then(i.cmp(&j)));
    let mut chosen: Vec<usize> = Vec::with_capacity(REFINED_SEEDS);
    for i in ranked {
        if chosen.len() == REFINED_SEEDS {
            break;
        }
        if chosen.iter().all(|&c| seeds[c] != seeds[i]) {
            chosen.push(i);
        }
    }

    let nm_opts = NelderMeadOptions { tol: opts.tol, max_iter: opts.max_iter, ..Default::default() };
    let bounds = opts.bounds;
    let refined = parallel_map(&chosen, |&i| {
        let start = bounds.unit_of(&seeds[i]);
        let f = |u: &[f64; 4]| eval(&bounds.at_unit(u));
        let mut r = nelder_mead(f, start, [0.0; 4], [1.0; 4], nm_opts);
        for _ in 0..opts.restarts {
            let next = nelder_mead(f, r.best, [0.0; 4], [1.0; 4], nm_opts);
            let gain = next.score - r.score;
            let evaluations = r.evaluations + next.evaluations;
            if gain > 0.0 {
                r = NelderMeadResult { evaluations, iterations: r.iterations + next.iterations, ..next };
            } else {
                r.evaluations = evaluations;
            }
            if gain < opts.tol {
                break;
            }
        }
        r
    });

    let mut best: Option<(usize, NelderMeadResult)> = None;
    for (rank, r) in refined.into_iter().enumerate() {
        n_evals += r.evaluations;
        let better = match &best {
            None => true,
            Some((_, b)) => r.score > b.score,
        };
        if better {
            best = Some((rank, r));
        }
    }
    let (_, best) = best.expect("at least one seed");
    let top_seed = chosen[0];
    // the unit-cube round trip can perturb a seed by an ulp; never return worse than it
    let (vector, train_nse) = if seed_scores[top_seed] > best.score {
        (seeds[top_seed], seed_scores[top_seed])
    } else {
        (bounds.at_unit(&best.best), best.score)
    };
    let params = AbcdParams::from_array(vector)?;
    Ok(CalibrationResult {
        params,
        train_nse,
        n_objective_evals: n_evals,
        warmup_months: warmup,
        converged: best.converged,
    })
}

/// Order-preserving map over scoped threads.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("calibration worker panicked"))
            .collect()
    })
}
