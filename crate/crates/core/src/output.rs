//! CSV and JSON artifacts. Numbers use Rust's shortest round-trip
//! scientific notation, so files are locale independent and reproducible.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::evolution::EnergyTrace;
use crate::resolvent::ResolventSample;
use crate::spectral_oracle::CharacteristicRoot;
use crate::spectrum::SpectrumReport;

pub const RESOLVENT_HEADER: [&str; 13] = [
    "lambda",
    "norm",
    "scaled_norm",
    "diss_ratio",
    "q_wW",
    "q_vV",
    "tr_W",
    "tr_Wx",
    "tr_wxx",
    "tr_wxxx",
    "tr_vxx0",
    "tr_vxxx0",
    "resolution_ok",
];
pub const SPECTRUM_HEADER: [&str; 3] = ["re", "im", "residual"];
pub const ORACLE_ROOTS_HEADER: [&str; 4] = ["re", "im", "det_abs", "newton_iters"];
pub const ENERGY_HEADER: [&str; 4] = ["t", "energy", "dissipation", "smoothing_indicator"];

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv<R, I>(header: &[&str], rows: I) -> String
where
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.into_iter().collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// Lemma channels are written divided by `‖z‖² + ‖ẑ‖²`, the quantities
/// whose slopes are fitted.
pub fn resolvent_csv(samples: &[ResolventSample]) -> String {
    csv(
        &RESOLVENT_HEADER,
        samples.iter().map(|s| {
            let e = s.energy();
            let mut row: Vec<String> = [
                s.lambda,
                s.norm,
                s.scaled_norm,
                s.diss_ratio,
                s.q_ww / e,
                s.q_vv / e,
                s.tr_w / e,
                s.tr_wx / e,
                s.tr_wxx / e,
                s.tr_wxxx / e,
                s.tr_vxx0 / e,
                s.tr_vxxx0 / e,
            ]
            .iter()
            .map(|&x| num(x))
            .collect();
            row.push(s.resolution_ok.to_string());
            row
        }),
    )
}

pub fn spectrum_csv(report: &SpectrumReport) -> String {
    csv(
        &SPECTRUM_HEADER,
        report
            .eigenvalues
            .iter()
            .map(|e| [num(e.value.re), num(e.value.im), num(e.residual)]),
    )
}

pub fn oracle_roots_csv(roots: &[CharacteristicRoot]) -> String {
    csv(
        &ORACLE_ROOTS_HEADER,
        roots.iter().map(|r| {
            [
                num(r.zeta.re),
                num(r.zeta.im),
                num(r.det_abs),
                r.newton_iters.to_string(),
            ]
        }),
    )
}

/// Row `k` carries the midpoint dissipation of the step ending at `t_k`;
/// the first row carries the dissipation of the initial state.
pub fn energy_csv(trace: &EnergyTrace) -> String {
    csv(
        &ENERGY_HEADER,
        (0..trace.len()).map(|k| {
            let d = if k == 0 {
                trace.initial_dissipation
            } else {
                trace.dissipation[k - 1]
            };
            [
                num(trace.times[k]),
                num(trace.energy[k]),
                num(d),
                num(trace.smoothing_indicator[k]),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline; field order follows the types.
pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_rows_align_with_times() {
        let trace = EnergyTrace {
            times: vec![0.0, 0.5, 1.0],
            energy: vec![1.0, 0.5, 0.25],
            dissipation: vec![1.0, 0.5],
            initial_dissipation: 0.0,
            identity_residual: vec![0.0, 0.0],
            smoothing_indicator: vec![2.0, 2.0, 2.0],
        };
        let s = energy_csv(&trace);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,energy,dissipation,smoothing_indicator");
        assert_eq!(lines[1], "0e0,1e0,0e0,2e0");
        assert_eq!(lines[3], "1e0,2.5e-1,5e-1,2e0");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -3.089735249158384, 1e-300, 12.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
