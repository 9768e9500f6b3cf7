//! Text and CSV formatting. Rates use six significant digits; parameters use
//! the shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;

use snskit::optimizer::ScanPoint;
use snskit::{ExperimentalParams, KeyRateReport, Method, PartySource, SourceParams, ZigzagMode};

/// Six significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

/// Shortest round-trip scientific notation.
pub fn exact(x: f64) -> String {
    format!("{x:e}")
}

fn ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), sci)
}

/// Aligned `key  value` lines describing one evaluation.
pub fn report(
    exp: &ExperimentalParams,
    method: Method,
    mode: ZigzagMode,
    r: &KeyRateReport,
) -> String {
    let u = &r.untagged;
    let z = &r.zigzag;
    let rows: Vec<(&str, String)> = vec![
        ("distance_km", exp.total_distance().to_string()),
        ("l_a_km", exp.l_a.to_string()),
        ("l_b_km", exp.l_b.to_string()),
        ("method", method.name().to_string()),
        ("zigzag_mode", mode.name().to_string()),
        ("n_t", sci(r.n_t)),
        ("n_t_prime", sci(r.n_t_prime)),
        ("e_prime", sci(r.e_prime)),
        ("s01_lower", sci(u.s01_lower)),
        ("s10_lower", sci(u.s10_lower)),
        ("s1_lower", sci(u.s1_lower)),
        ("n1_lower", sci(u.n1_lower)),
        ("e1ph_upper", sci(u.e1ph_upper)),
        ("u", sci(z.u)),
        ("pairs_n", sci(z.n)),
        ("pairs_k", sci(z.k)),
        ("remainder_r", sci(z.r)),
        ("m_bar", sci(z.m_bar)),
        ("e_tau", sci(z.e_tau)),
        ("m_bar_s", sci(z.m_bar_s)),
        ("n1_prime", sci(z.n1_prime)),
        ("e1ph_prime", sci(z.e1ph_prime)),
        ("raw_rate", sci(r.raw_rate)),
        ("rate", sci(r.rate)),
        ("rate_full", exact(r.rate)),
        ("plob1", sci(r.plob1)),
        ("plob2", sci(r.plob2)),
        ("rate_over_plob1", ratio(r.ratio1())),
        ("rate_over_plob2", ratio(r.ratio2())),
        ("flags", r.flags.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

/// Header and one row for `rate --csv`.
pub fn rate_csv(exp: &ExperimentalParams, method: Method, r: &KeyRateReport) -> String {
    format!(
        "L_km,method,R,plob1,plob2\n{},{},{},{},{}\n",
        exp.total_distance(),
        method.name(),
        sci(r.rate),
        sci(r.plob1),
        sci(r.plob2)
    )
}

/// Source parameters as `src.*` config lines that load back unchanged.
pub fn source_config(src: &SourceParams) -> String {
    let mut out = String::new();
    for (party, suffix) in [(&src.alice, ""), (&src.bob, "_b")] {
        for (name, v) in PartySource::FIELD_NAMES.iter().zip(party.to_array()) {
            let _ = writeln!(out, "src.{name}{suffix} = {}", exact(v));
        }
    }
    out
}

fn param_columns(prefix: &str) -> String {
    let mut cols = Vec::new();
    for suffix in ["", "_b"] {
        for name in PartySource::FIELD_NAMES {
            cols.push(format!("{prefix}_{name}{suffix}"));
        }
    }
    cols.join(",")
}

pub fn scan_header() -> String {
    format!(
        "L_km,R_A,R_B,plob1,plob2,{},{}\n",
        param_columns("A"),
        param_columns("B")
    )
}

/// One CSV row per distance; `a` and `b` must cover the same distances.
pub fn scan_csv(a: &[ScanPoint], b: &[ScanPoint]) -> String {
    let mut out = scan_header();
    for (pa, pb) in a.iter().zip(b) {
        let params = |s: &SourceParams| {
            s.to_array()
                .iter()
                .map(|&v| exact(v))
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            pa.distance,
            sci(pa.rate),
            sci(pb.rate),
            sci(pa.plob1),
            sci(pa.plob2),
            params(&pa.source),
            params(&pb.source)
        );
    }
    out
}

pub fn plob_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("L_km,plob1,plob2\n");
    for &(l, p1, p2) in rows {
        let _ = writeln!(out, "{l},{},{}", sci(p1), sci(p2));
    }
    out
}
