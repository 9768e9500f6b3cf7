//! Built-in benchmarks: published reference rates next to freshly optimized
//! ones.

use std::fmt::Write as _;

use snskit::keyrate::plob_bounds;
use snskit::optimizer::{optimize, scan, OptimizationProblem, Symmetry};
use snskit::{security_budget, BudgetOverrides, ExperimentalParams, Method, Result};

use crate::output::sci;

/// Distances of the symmetric benchmark, in km.
pub const SYMMETRIC_DISTANCES: [f64; 4] = [250.0, 390.0, 420.0, 440.0];

/// Reference rates at [`SYMMETRIC_DISTANCES`], one array per row label.
pub const SYMMETRIC_REFERENCE: [(&str, [f64; 4]); 4] = [
    ("A", [9.52e-6, 2.05e-7, 6.84e-8, 2.59e-8]),
    ("B", [1.02e-5, 2.36e-7, 8.15e-8, 3.26e-8]),
    ("PLOB-2", [4.33e-6, 6.86e-9, 1.72e-9, 6.86e-10]),
    ("PLOB-1", [1.44e-5, 2.29e-8, 5.74e-9, 2.29e-9]),
];

/// A field-trial device set with its confidence level and reference rates.
#[derive(Debug, Clone, Copy)]
pub struct FieldCase {
    pub distance: f64,
    pub exp: ExperimentalParams,
    pub xi_default: f64,
    /// Reference rates for methods A and B.
    pub reference: [f64; 2],
}

pub fn field_cases() -> [FieldCase; 2] {
    [
        FieldCase {
            distance: 402.0,
            exp: ExperimentalParams::field_402(),
            xi_default: 1.69e-10,
            reference: [9.98e-8, 1.07e-7],
        },
        FieldCase {
            distance: 502.0,
            exp: ExperimentalParams::field_502(),
            xi_default: 1.71e-10,
            reference: [4.82e-8, 5.38e-8],
        },
    ]
}

/// One cell of a benchmark: a reference value and what we compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub label: &'static str,
    pub distance: f64,
    pub reference: f64,
    pub computed: f64,
}

impl Entry {
    pub fn ratio(&self) -> f64 {
        self.computed / self.reference
    }
}

/// Symmetric baseline link at N = 1e12, both methods, warm-started along the
/// distances.
pub fn symmetric_benchmark() -> Result<Vec<Entry>> {
    let mut template = OptimizationProblem::new(
        ExperimentalParams::baseline(0.0),
        Symmetry::Symmetric,
        Method::A,
    );
    template.exp.n_pulses = 1e12;
    let (a, b) = rayon::join(
        || scan(&template, &SYMMETRIC_DISTANCES),
        || {
            scan(
                &OptimizationProblem {
                    method: Method::B,
                    ..template.clone()
                },
                &SYMMETRIC_DISTANCES,
            )
        },
    );
    let (a, b) = (a?, b?);
    let mut out = Vec::new();
    for (label, refs) in SYMMETRIC_REFERENCE {
        for (i, &distance) in SYMMETRIC_DISTANCES.iter().enumerate() {
            let computed = match label {
                "A" => a[i].rate,
                "B" => b[i].rate,
                "PLOB-2" => a[i].plob2,
                _ => a[i].plob1,
            };
            out.push(Entry {
                label,
                distance,
                reference: refs[i],
                computed,
            });
        }
    }
    Ok(out)
}

/// Field-trial device sets, both methods.
pub fn field_benchmark() -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for case in field_cases() {
        let budget = security_budget(&BudgetOverrides {
            xi_default: Some(case.xi_default),
            ..BudgetOverrides::default()
        })?;
        let run = |method| {
            let mut p = OptimizationProblem::new(case.exp, Symmetry::Symmetric, method);
            p.budget = budget;
            optimize(&p)
        };
        let (a, b) = rayon::join(|| run(Method::A), || run(Method::B));
        for (label, result, reference) in
            [("A", a?, case.reference[0]), ("B", b?, case.reference[1])]
        {
            out.push(Entry {
                label,
                distance: case.distance,
                reference,
                computed: result.rate,
            });
        }
    }
    Ok(out)
}

/// PLOB bounds of the baseline link at the symmetric benchmark distances.
pub fn plob_rows(distances: &[f64], exp: &ExperimentalParams) -> Result<Vec<(f64, f64, f64)>> {
    distances
        .iter()
        .map(|&l| plob_bounds(l, exp.alpha_f, exp.eta_d).map(|(p1, p2)| (l, p1, p2)))
        .collect()
}

/// Fixed-width table of entries.
pub fn render(title: &str, entries: &[Entry]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<8} {:>8} {:>12} {:>12} {:>8}",
        "row", "L_km", "reference", "computed", "ratio"
    );
    for e in entries {
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>12} {:>12} {:>8.3}",
            e.label,
            e.distance,
            sci(e.reference),
            sci(e.computed),
            e.ratio()
        );
    }
    out
}
