//! Trace persistence, run summaries and the comparison table.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{audit_trace, classify_momentum_events, AuditReport, MomentumEvents};
use crate::error::{Error, Result};
use crate::optimizers::{Acceptance, IterationRecord, SubproblemSolver, Trace};

pub const TRACE_HEADER: &str =
    "k,f,grad_norm,sigma,step_norm,rho,accepted,beta,momentum_sign,krylov_dim,model_decrease,wall_time_s";

/// 17 significant digits.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_row(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        real(r.f),
        real(r.grad_norm),
        real(r.sigma),
        real(r.step_norm),
        real(r.rho),
        r.accepted.as_str(),
        real(r.beta),
        r.momentum_sign,
        r.krylov_dim,
        real(r.model_decrease),
        real(r.wall_time_s),
    )
}

pub fn write_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(w, "{}", trace_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV back. Columns the file does not carry (`model_grad_norm`,
/// `f_trial`, `f_next`) come back as NaN and `lambda_min` as `None`.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => return Err(parse_err(1, format!("unexpected header {:?}", other.unwrap_or("")))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(parse_err(lineno, format!("expected 12 columns, found {}", cols.len())));
        }
        let f = |j: usize| -> Result<f64> {
            cols[j]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("column {j}: {e}")))
        };
        let u = |j: usize| -> Result<usize> {
            cols[j]
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("column {j}: {e}")))
        };
        out.push(IterationRecord {
            k: u(0)?,
            f: f(1)?,
            grad_norm: f(2)?,
            sigma: f(3)?,
            step_norm: f(4)?,
            rho: f(5)?,
            accepted: cols[6]
                .parse::<Acceptance>()
                .map_err(|e| parse_err(lineno, e.to_string()))?,
            beta: f(7)?,
            momentum_sign: cols[8]
                .parse::<i8>()
                .map_err(|e| parse_err(lineno, format!("column 8: {e}")))?,
            krylov_dim: u(9)?,
            model_decrease: f(10)?,
            wall_time_s: f(11)?,
            model_grad_norm: f64::NAN,
            f_trial: f64::NAN,
            f_next: f64::NAN,
            lambda_min: None,
        });
    }
    Ok(out)
}

/// What one optimizer run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub kind: &'static str,
    pub solver: SubproblemSolver,
    pub iterations: usize,
    pub successful_iterations: usize,
    pub converged: bool,
    pub stop_reason: &'static str,
    pub initial_f: f64,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub final_sigma: f64,
    pub wall_time_s: f64,
    pub momentum: MomentumEvents,
    /// `None` when the trace has no iterations to audit.
    pub audit: Option<AuditReport>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn new(label: &str, seed: u64, trace: &Trace) -> Self {
        let audit = audit_trace(trace, &trace.params, trace.solver == SubproblemSolver::Exact).ok();
        RunSummary {
            label: label.to_string(),
            seed,
            kind: trace.kind.as_str(),
            solver: trace.solver,
            iterations: trace.iterations(),
            successful_iterations: trace.successful_iterations(),
            converged: trace.converged(),
            stop_reason: trace.stop_reason.as_str(),
            initial_f: trace.initial_f(),
            final_f: trace.final_f,
            final_grad_norm: trace.final_grad_norm,
            final_sigma: trace.final_sigma,
            wall_time_s: trace.records.last().map_or(0.0, |r| r.wall_time_s),
            momentum: classify_momentum_events(trace),
            audit,
            error: trace.error.clone(),
        }
    }

    pub fn audit_passed(&self) -> bool {
        self.audit.as_ref().map_or(true, AuditReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let solver = match self.solver {
            SubproblemSolver::Exact => "exact",
            SubproblemSolver::Krylov => "krylov",
            SubproblemSolver::Cauchy => "cauchy",
        };
        let _ = writeln!(out, "label: {}", self.label);
        let _ = writeln!(out, "optimizer: {}", self.kind);
        let _ = writeln!(out, "solver: {solver}");
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "stop_reason: {}", self.stop_reason);
        let _ = writeln!(out, "converged: {}", self.converged);
        let _ = writeln!(out, "iterations: {}", self.iterations);
        let _ = writeln!(out, "successful_iterations: {}", self.successful_iterations);
        let _ = writeln!(out, "initial_f: {}", real(self.initial_f));
        let _ = writeln!(out, "final_f: {}", real(self.final_f));
        let _ = writeln!(out, "final_grad_norm: {}", real(self.final_grad_norm));
        let _ = writeln!(out, "final_sigma: {}", real(self.final_sigma));
        let _ = writeln!(out, "wall_time_s: {:.6}", self.wall_time_s);
        let _ = writeln!(out, "momentum_helped_pos: {}", self.momentum.helped_pos);
        let _ = writeln!(out, "momentum_helped_neg: {}", self.momentum.helped_neg);
        let _ = writeln!(out, "momentum_beta_zero: {}", self.momentum.beta_zero);
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        match &self.audit {
            None => {
                let _ = writeln!(out, "audit: skipped (no iterations)");
            }
            Some(a) => {
                let _ = writeln!(out, "audit: {}", if a.passed() { "pass" } else { "fail" });
                for line in a.to_text().lines() {
                    let _ = writeln!(out, "audit.{line}");
                }
            }
        }
        out
    }
}

pub const RESULTS_HEADER: &str = "label,optimizer,seed,iterations,successful_iterations,converged,stop_reason,final_f,final_grad_norm,wall_time_s,audit_passed";

pub fn results_csv(rows: &[RunSummary]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6},{}",
            r.label,
            r.kind,
            r.seed,
            r.iterations,
            r.successful_iterations,
            r.converged,
            r.stop_reason,
            real(r.final_f),
            real(r.final_grad_norm),
            r.wall_time_s,
            r.audit_passed()
        );
    }
    out
}

/// One optimizer's row of the comparison table. Iteration statistics count
/// successful iterations to tolerance; a run that did not converge counts as
/// infinitely many.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub median_iters: f64,
    pub min_iters: f64,
    pub max_iters: f64,
    pub median_total_iters: f64,
    pub median_final_f: f64,
    pub failures: usize,
    pub runs: usize,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups `rows` by label in first-appearance order, then sorts by median
/// iterations. The sort is stable, so ties keep declaration order.
pub fn comparison_table(labels: &[String], rows: &[RunSummary]) -> Vec<TableRow> {
    let mut table: Vec<TableRow> = labels
        .iter()
        .map(|label| {
            let runs: Vec<&RunSummary> = rows.iter().filter(|r| &r.label == label).collect();
            let to_tol = |r: &&RunSummary, n: usize| if r.converged { n as f64 } else { f64::INFINITY };
            let succ: Vec<f64> = runs.iter().map(|r| to_tol(r, r.successful_iterations)).collect();
            let total: Vec<f64> = runs.iter().map(|r| to_tol(r, r.iterations)).collect();
            let finals: Vec<f64> = runs.iter().map(|r| r.final_f).collect();
            TableRow {
                label: label.clone(),
                median_iters: median(&succ),
                min_iters: succ.iter().copied().fold(f64::INFINITY, f64::min),
                max_iters: succ.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                median_total_iters: median(&total),
                median_final_f: median(&finals),
                failures: runs.iter().filter(|r| !r.converged).count(),
                runs: runs.len(),
            }
        })
        .collect();
    table.sort_by(|a, b| a.median_iters.total_cmp(&b.median_iters));
    table
}

fn iters(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

pub const TABLE_HEADER: &str =
    "label,median_iters,min_iters,max_iters,median_total_iters,median_final_f,failures,runs";

pub fn table_csv(table: &[TableRow]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in table {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.label,
            iters(r.median_iters),
            iters(r.min_iters),
            iters(r.max_iters),
            iters(r.median_total_iters),
            real(r.median_final_f),
            r.failures,
            r.runs
        );
    }
    out
}

/// Fixed-width rendering for the terminal.
pub fn table_text(table: &[TableRow]) -> String {
    let width = table.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let mut out = format!(
        "{:<width$} {:>8} {:>8} {:>8} {:>8} {:>14} {:>8}\n",
        "optimizer", "median", "min", "max", "total", "final_f", "failed"
    );
    for r in table {
        let _ = writeln!(
            out,
            "{:<width$} {:>8} {:>8} {:>8} {:>8} {:>14.6e} {:>5}/{:<2}",
            r.label,
            iters(r.median_iters),
            iters(r.min_iters),
            iters(r.max_iters),
            iters(r.median_total_iters),
            r.median_final_f,
            r.failures,
            r.runs
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Rosenbrock;
    use crate::optimizers::{run, HyperParams, OptimizerKind, RunOptions};
    use nalgebra::DVector;

    fn rosenbrock_trace() -> Trace {
        let r = Rosenbrock::new(2);
        let x0 = DVector::from_vec(vec![-1.2, 1.0]);
        run(OptimizerKind::Arcm, &r, &x0, &HyperParams::default(), &RunOptions::default()).unwrap()
    }

    #[test]
    fn trace_csv_round_trips() {
        let t = rosenbrock_trace();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace.csv");
        write_trace_csv(&t, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.len(), t.records.len());
        for (a, b) in t.records.iter().zip(&back) {
            assert_eq!(a.k, b.k);
            assert_eq!(a.f.to_bits(), b.f.to_bits());
            assert_eq!(a.rho.to_bits(), b.rho.to_bits());
            assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
            assert_eq!(a.accepted, b.accepted);
            assert_eq!(a.momentum_sign, b.momentum_sign);
            assert_eq!(a.wall_time_s.to_bits(), b.wall_time_s.to_bits());
        }
    }

    #[test]
    fn non_finite_reals_round_trip() {
        for v in [f64::NEG_INFINITY, f64::INFINITY] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
        assert!(real(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "k,f\n0,1\n").unwrap();
        assert!(matches!(read_trace_csv(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY, 2.0]), f64::INFINITY);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn table_sorts_with_stable_ties() {
        let t = rosenbrock_trace();
        let mk = |label: &str, succ: usize, converged: bool| {
            let mut s = RunSummary::new(label, 0, &t);
            s.successful_iterations = succ;
            s.converged = converged;
            s
        };
        let rows = vec![mk("b", 10, true), mk("a", 5, true), mk("c", 10, true), mk("d", 1, false)];
        let labels: Vec<String> = ["b", "a", "c", "d"].iter().map(|s| s.to_string()).collect();
        let table = comparison_table(&labels, &rows);
        let order: Vec<&str> = table.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(order, ["a", "b", "c", "d"]);
        assert_eq!(table[3].failures, 1);
        assert!(table_csv(&table).contains("d,inf,inf,inf"));
    }

    #[test]
    fn summary_mentions_audit() {
        let s = RunSummary::new("arcm", 0, &rosenbrock_trace());
        let text = s.to_text();
        assert!(text.contains("successful_iterations: "));
        assert!(text.contains("audit: pass"), "{text}");
    }
}
