//! Derivative-free search for the source parameters maximizing the key rate.
//!
//! Each restart runs a Nelder-Mead simplex in an unbounded coordinate space.
//! Probabilities map through a logistic function onto their box, intensities
//! through a logistic function in log space. `p_1` is boxed below `1 - p_0`
//! and `mu_2` above `mu_1`, so every decoded point that passes the box also
//! passes [`SourceParams::validate`]. In asymmetric mode Bob's weak intensity
//! is not searched: it is solved from the constraint at every evaluation.
//!
//! The objective is the unclamped rate, so the search keeps a slope in
//! regions where the clamped rate is flat at zero.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::budget::SecurityBudget;
use crate::error::{Error, Result};
use crate::flags::{Flag, Flags};
use crate::keyrate::{evaluate, solve_mu1_bob, KeyRateReport};
use crate::params::{ExperimentalParams, PartySource, SourceParams};
use crate::registry::{Method, ZigzagMode};

/// Objective value of points the pipeline rejects.
const PENALTY: f64 = -1.0;

/// Standard deviation, in search coordinates, of restart starting points
/// around the first one.
const RESTART_SPREAD: f64 = 1.0;

/// Lower and upper limits of one party's parameters, in
/// [`PartySource::FIELD_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartyBox {
    pub lo: [f64; 7],
    pub hi: [f64; 7],
}

impl Default for PartyBox {
    fn default() -> Self {
        let (p_lo, p_hi) = (1e-4, 1.0 - 1e-4);
        let (m_lo, m_hi) = (1e-4, 1.0);
        Self {
            lo: [p_lo, p_lo, p_lo, p_lo, m_lo, m_lo, m_lo],
            hi: [p_hi, p_hi, p_hi, p_hi, m_hi, m_hi, m_hi],
        }
    }
}

impl PartyBox {
    /// A box containing only `src`.
    pub fn point(src: &PartySource) -> Self {
        let v = src.to_array();
        Self { lo: v, hi: v }
    }

    fn validate(&self, party: &str) -> Result<()> {
        for i in 0..7 {
            let (lo, hi) = (self.lo[i], self.hi[i]);
            let field = PartySource::FIELD_NAMES[i];
            let positive_limit = if i < 4 { hi < 1.0 } else { hi.is_finite() };
            if !(lo > 0.0 && lo <= hi && positive_limit) {
                return Err(Error::invalid(
                    "bounds",
                    format!("{party} {field} box [{lo}, {hi}] is not a valid range"),
                ));
            }
        }
        Ok(())
    }
}

/// Whether both parties share one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    #[default]
    Symmetric,
    Asymmetric,
}

/// Everything that defines one optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub exp: ExperimentalParams,
    pub symmetry: Symmetry,
    pub method: Method,
    pub mode: ZigzagMode,
    pub budget: SecurityBudget,
    pub alice_box: PartyBox,
    /// Ignored in symmetric mode.
    pub bob_box: PartyBox,
    pub restarts: usize,
    /// Evaluation cap per restart.
    pub max_evals: usize,
    /// Simplex diameter in search coordinates at which a restart stops.
    pub tolerance: f64,
    pub seed: u64,
    /// Starting point of the first restart; the others start at seeded
    /// perturbations of it. [`default_start`] when absent.
    pub initial: Option<SourceParams>,
    pub record_trace: bool,
}

impl OptimizationProblem {
    pub fn new(exp: ExperimentalParams, symmetry: Symmetry, method: Method) -> Self {
        Self {
            exp,
            symmetry,
            method,
            mode: ZigzagMode::default(),
            budget: SecurityBudget::default(),
            alice_box: PartyBox::default(),
            bob_box: PartyBox::default(),
            restarts: 8,
            max_evals: 5000,
            tolerance: 1e-6,
            seed: 0,
            initial: None,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.exp.validate()?;
        self.alice_box.validate("alice")?;
        if self.symmetry == Symmetry::Asymmetric {
            self.bob_box.validate("bob")?;
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", "must be at least 1"));
        }
        if self.max_evals == 0 {
            return Err(Error::invalid("max_evals", "must be at least 1"));
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub restart: usize,
    /// Evaluation index within the restart.
    pub eval: usize,
    pub params: [f64; 14],
    /// Objective value: the unclamped rate, or a penalty.
    pub score: f64,
    /// Clamped key rate.
    pub rate: f64,
    /// Whether this point became the restart's best so far.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub source: SourceParams,
    pub rate: f64,
    pub report: Option<KeyRateReport>,
    pub evaluations: usize,
    /// Every evaluation, restart by restart. Empty unless requested.
    pub trace: Vec<TracePoint>,
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Fixed(f64),
    Linear { lo: f64, hi: f64 },
    Log { lo: f64, hi: f64 },
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn logit(s: f64) -> f64 {
    let s = s.clamp(1e-9, 1.0 - 1e-9);
    (s / (1.0 - s)).ln()
}

impl Map {
    fn new(lo: f64, hi: f64, log: bool) -> Option<Self> {
        if !(lo <= hi) {
            return None;
        }
        Some(if lo == hi {
            Map::Fixed(lo)
        } else if log {
            Map::Log { lo, hi }
        } else {
            Map::Linear { lo, hi }
        })
    }

    fn decode(self, t: f64) -> f64 {
        match self {
            Map::Fixed(x) => x,
            Map::Linear { lo, hi } => lo + (hi - lo) * logistic(t),
            Map::Log { lo, hi } => lo * (hi / lo).powf(logistic(t)),
        }
    }

    fn encode(self, x: f64) -> f64 {
        match self {
            Map::Fixed(_) => 0.0,
            Map::Linear { lo, hi } => logit((x - lo) / (hi - lo)),
            Map::Log { lo, hi } => logit((x / lo).ln() / (hi / lo).ln()),
        }
    }
}

/// Bijection between search coordinates and source parameters.
#[derive(Debug, Clone)]
struct Codec {
    symmetry: Symmetry,
    alice: PartyBox,
    bob: PartyBox,
    /// `(party, field)` of every free coordinate.
    free: Vec<(usize, usize)>,
}

impl Codec {
    fn new(problem: &OptimizationProblem) -> Self {
        let mut free = Vec::new();
        let parties = match problem.symmetry {
            Symmetry::Symmetric => 1,
            Symmetry::Asymmetric => 2,
        };
        let boxes = [problem.alice_box, problem.bob_box];
        for (party, b) in boxes.iter().enumerate().take(parties) {
            for field in 0..7 {
                let solved = party == 1 && field == 4;
                if !solved && b.lo[field] < b.hi[field] {
                    free.push((party, field));
                }
            }
        }
        Self {
            symmetry: problem.symmetry,
            alice: problem.alice_box,
            bob: problem.bob_box,
            free,
        }
    }

    fn dim(&self) -> usize {
        self.free.len()
    }

    /// Maps of one party's fields given the fields decoded so far.
    fn field_map(b: &PartyBox, field: usize, v: &[f64; 7]) -> Option<Map> {
        match field {
            3 => Map::new(b.lo[3], b.hi[3].min(1.0 - v[2] - b.lo[2]), false),
            5 => Map::new(b.lo[5].max(v[4]), b.hi[5], true),
            f if f >= 4 => Map::new(b.lo[f], b.hi[f], true),
            f => Map::new(b.lo[f], b.hi[f], false),
        }
    }

    fn party_coords(&self, t: &[f64], party: usize) -> [Option<f64>; 7] {
        let mut out = [None; 7];
        for (i, &(p, f)) in self.free.iter().enumerate() {
            if p == party {
                out[f] = Some(t[i]);
            }
        }
        out
    }

    fn decode_party(
        b: &PartyBox,
        coords: [Option<f64>; 7],
        mu_1: Option<f64>,
    ) -> Option<PartySource> {
        let mut v = [0.0; 7];
        for field in 0..7 {
            if field == 4 {
                if let Some(m) = mu_1 {
                    if !(m >= b.lo[4] && m <= b.hi[4]) {
                        return None;
                    }
                    v[4] = m;
                    continue;
                }
            }
            let map = Self::field_map(b, field, &v)?;
            v[field] = match (map, coords[field]) {
                (Map::Fixed(x), _) => x,
                (m, Some(t)) => m.decode(t),
                // A box narrowed by another field; take its midpoint.
                (m, None) => m.decode(0.0),
            };
        }
        Some(PartySource::from_array(v))
    }

    fn decode(&self, t: &[f64]) -> Option<SourceParams> {
        let alice = Self::decode_party(&self.alice, self.party_coords(t, 0), None)?;
        match self.symmetry {
            Symmetry::Symmetric => Some(SourceParams::symmetric(alice)),
            Symmetry::Asymmetric => {
                // Bob's mu_1 depends only on fields decoded before it.
                let mut partial =
                    Self::decode_party(&self.bob, self.party_coords(t, 1), Some(self.bob.lo[4]))?;
                let mu_1 = solve_mu1_bob(&SourceParams {
                    alice,
                    bob: partial,
                });
                partial = Self::decode_party(&self.bob, self.party_coords(t, 1), Some(mu_1))?;
                Some(SourceParams {
                    alice,
                    bob: partial,
                })
            }
        }
    }

    fn encode(&self, src: &SourceParams) -> Vec<f64> {
        let parties = [src.alice.to_array(), src.bob.to_array()];
        let boxes = [self.alice, self.bob];
        self.free
            .iter()
            .map(|&(p, f)| {
                let v = parties[p];
                match Self::field_map(&boxes[p], f, &v) {
                    Some(m) => m.encode(v[f].clamp(boxes[p].lo[f], boxes[p].hi[f])),
                    None => 0.0,
                }
            })
            .collect()
    }
}

struct Objective<'a> {
    problem: &'a OptimizationProblem,
    codec: &'a Codec,
}

impl Objective<'_> {
    fn eval(&self, t: &[f64]) -> (f64, f64, [f64; 14]) {
        let Some(src) = self.codec.decode(t) else {
            return (PENALTY, 0.0, [f64::NAN; 14]);
        };
        let p = &self.problem;
        match evaluate(&p.exp, &src, &p.budget, p.method, p.mode) {
            Ok(r) => (score(&r), r.rate, src.to_array()),
            Err(_) => (PENALTY, 0.0, src.to_array()),
        }
    }
}

/// Unclamped rate, capped at 0 whenever a flag forbids a key.
fn score(r: &KeyRateReport) -> f64 {
    if r.flags.forces_zero_rate() {
        r.raw_rate.min(0.0)
    } else {
        r.raw_rate
    }
}

struct RestartOutcome {
    best_t: Vec<f64>,
    best_score: f64,
    best_params: [f64; 14],
    evals: usize,
    trace: Vec<TracePoint>,
}

struct Recorder<'a> {
    objective: &'a Objective<'a>,
    restart: usize,
    evals: usize,
    best_score: f64,
    best_t: Vec<f64>,
    best_params: [f64; 14],
    trace: Option<Vec<TracePoint>>,
}

impl Recorder<'_> {
    /// Returns the value to minimize.
    fn call(&mut self, t: &[f64]) -> f64 {
        let (s, rate, params) = self.objective.eval(t);
        let accepted = self.evals == 0 || s > self.best_score;
        if accepted {
            self.best_score = s;
            self.best_t = t.to_vec();
            self.best_params = params;
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TracePoint {
                restart: self.restart,
                eval: self.evals,
                params,
                score: s,
                rate,
                accepted,
            });
        }
        self.evals += 1;
        -s
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in simplex {
        for b in simplex {
            let dist = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            d = d.max(dist);
        }
    }
    d
}

/// Nelder-Mead with standard coefficients, minimizing through `rec`.
fn nelder_mead(rec: &mut Recorder<'_>, start: Vec<f64>, max_evals: usize, tolerance: f64) {
    let n = start.len();
    let f0 = rec.call(&start);
    if n == 0 {
        return;
    }
    let mut simplex = vec![start.clone()];
    let mut values = vec![f0];
    for i in 0..n {
        if rec.evals >= max_evals {
            return;
        }
        let mut v = start.clone();
        v[i] += 0.5;
        values.push(rec.call(&v));
        simplex.push(v);
    }
    let blend = |a: &[f64], b: &[f64], w: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
    };
    while rec.evals < max_evals && diameter(&simplex) >= tolerance {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = blend(&centroid, &worst, -1.0);
        let fr = rec.call(&reflected);
        if fr < values[0] {
            if rec.evals >= max_evals {
                simplex[n] = reflected;
                values[n] = fr;
                break;
            }
            let expanded = blend(&centroid, &worst, -2.0);
            let fe = rec.call(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            if rec.evals >= max_evals {
                break;
            }
            let (contracted, fc) = if fr < values[n] {
                let c = blend(&centroid, &reflected, 0.5);
                let f = rec.call(&c);
                (c, f)
            } else {
                let c = blend(&centroid, &worst, 0.5);
                let f = rec.call(&c);
                (c, f)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    if rec.evals >= max_evals {
                        return;
                    }
                    simplex[i] = blend(&simplex[0], &simplex[i], 0.5);
                    values[i] = rec.call(&simplex[i]);
                }
            }
        }
    }
}

/// Starting point when the problem gives none.
///
/// With unequal arms Bob's intensities are scaled so that both pulses arrive
/// equally attenuated, and his sending probability is set to satisfy the
/// constraint with `mu_1' = rho mu_1`.
pub fn default_start(problem: &OptimizationProblem) -> SourceParams {
    let alice = PartySource::default();
    if problem.symmetry == Symmetry::Symmetric {
        return SourceParams::symmetric(alice);
    }
    let e = &problem.exp;
    let rho = 10f64.powf(-e.alpha_f * (e.l_a - e.l_b) / 10.0);
    let odds = alice.epsilon / (1.0 - alice.epsilon) * (alice.mu_z * (rho - 1.0)).exp();
    let bob = PartySource {
        epsilon: odds / (1.0 + odds),
        mu_1: alice.mu_1 * rho,
        mu_2: alice.mu_2 * rho,
        mu_z: alice.mu_z * rho,
        ..alice
    };
    let clamp = |src: PartySource, b: &PartyBox| {
        let mut v = src.to_array();
        for (i, x) in v.iter_mut().enumerate() {
            *x = x.clamp(b.lo[i], b.hi[i]);
        }
        PartySource::from_array(v)
    };
    let mut src = SourceParams {
        alice: clamp(alice, &problem.alice_box),
        bob: clamp(bob, &problem.bob_box),
    };
    src.bob.mu_1 = solve_mu1_bob(&src);
    src
}

fn run_restart(problem: &OptimizationProblem, codec: &Codec, restart: usize) -> RestartOutcome {
    let base = codec.encode(&problem.initial.unwrap_or_else(|| default_start(problem)));
    let start = if restart == 0 {
        base
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
        rng.set_stream(restart as u64);
        base.iter()
            .map(|t| t + RESTART_SPREAD * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let objective = Objective { problem, codec };
    let mut rec = Recorder {
        objective: &objective,
        restart,
        evals: 0,
        best_score: f64::NEG_INFINITY,
        best_t: start.clone(),
        best_params: [f64::NAN; 14],
        trace: problem.record_trace.then(Vec::new),
    };
    nelder_mead(&mut rec, start, problem.max_evals, problem.tolerance);
    RestartOutcome {
        best_t: rec.best_t,
        best_score: rec.best_score,
        best_params: rec.best_params,
        evals: rec.evals,
        trace: rec.trace.unwrap_or_default(),
    }
}

/// Higher score first, then lexicographically smaller parameters.
fn better(a: &RestartOutcome, b: &RestartOutcome) -> Ordering {
    a.best_score.total_cmp(&b.best_score).then_with(|| {
        for (x, y) in a.best_params.iter().zip(&b.best_params) {
            match y.total_cmp(x) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

/// Maximizes the key rate. Restarts run in parallel; the result does not
/// depend on thread count.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    if let Some(src) = &problem.initial {
        src.validate()?;
    }
    let codec = Codec::new(problem);
    let restarts = if codec.dim() == 0 {
        1
    } else {
        problem.restarts
    };
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|i| run_restart(problem, &codec, i))
        .collect();
    let evaluations = outcomes.iter().map(|o| o.evals).sum();
    let mut trace = Vec::new();
    if problem.record_trace {
        for o in &outcomes {
            trace.extend(o.trace.iter().cloned());
        }
    }
    let best = outcomes
        .into_iter()
        .max_by(better)
        .ok_or_else(|| Error::Degenerate("no restarts ran".into()))?;
    let mut flags = Flags::new();
    let source = codec
        .decode(&best.best_t)
        .ok_or_else(|| Error::Degenerate("search box admits no valid source".into()))?;
    let report = evaluate(
        &problem.exp,
        &source,
        &problem.budget,
        problem.method,
        problem.mode,
    )
    .ok();
    let rate = report.as_ref().map_or(0.0, |r| r.rate);
    if rate <= 0.0 {
        flags.raise(Flag::NoKeyFound);
    }
    Ok(OptimizationResult {
        source,
        rate,
        report,
        evaluations,
        trace,
        flags,
    })
}

/// One distance of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    /// Total distance in km.
    pub distance: f64,
    pub rate: f64,
    pub plob1: f64,
    pub plob2: f64,
    pub source: SourceParams,
    pub flags: Flags,
}

/// Optimizes at each total distance in order, keeping the template's arm
/// offset. Each optimization starts its first restart from the previous
/// optimum.
pub fn scan(template: &OptimizationProblem, distances: &[f64]) -> Result<Vec<ScanPoint>> {
    let offset = template.exp.l_a - template.exp.l_b;
    let mut warm = template.initial;
    let mut out = Vec::with_capacity(distances.len());
    for &distance in distances {
        let mut problem = template.clone();
        problem.exp = template.exp.with_distance(distance, offset);
        problem.initial = warm;
        problem.record_trace = false;
        let result = optimize(&problem)?;
        let (plob1, plob2) =
            crate::keyrate::plob_bounds(distance, problem.exp.alpha_f, problem.exp.eta_d)?;
        if result.rate > 0.0 {
            warm = Some(result.source);
        }
        out.push(ScanPoint {
            distance,
            rate: result.rate,
            plob1,
            plob2,
            source: result.source,
            flags: result.flags,
        });
    }
    Ok(out)
}
