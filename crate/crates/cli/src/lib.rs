//! Problem files, certificate JSON and the `decide`, `verify` and `screen`
//! commands of the `qinterp` tool.
//!
//! Every command returns a [`Report`] instead of printing, so the binary and
//! the tests share one code path. Exit codes: 0 feasible (or all checks
//! passed), 1 infeasible (or a check failed), 2 indeterminate, 3 bad input.

use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};
use qinterp::choi::screen::screen;
use qinterp::choi::verify_channel;
use qinterp::linalg::{c64, CMatrix};
use qinterp::{
    decide, Certificate, DecideOptions, Evidence, FeasibilityProblem, KrausChannel, MapClass,
    Residuals, ScreenResult,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const EXIT_INVALID: i32 = 3;
pub const FORMAT_VERSION: u32 = 1;

/// Dense complex matrix, row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl WireMatrix {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> anyhow::Result<CMatrix> {
        if self.rows * self.cols != self.data.len() {
            bail!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            );
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            bail!("matrix has non-finite entries");
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            c64(re, im)
        }))
    }
}

/// Solver settings stored in a problem file; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub map_class: String,
    pub inputs: Vec<WireMatrix>,
    pub targets: Vec<WireMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prescribed_identity_image: Option<WireMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<FileOptions>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

impl ProblemFile {
    pub fn from_problem(p: &FeasibilityProblem) -> Self {
        Self {
            version: FORMAT_VERSION,
            map_class: p.class().as_str().to_string(),
            inputs: p.inputs().iter().map(WireMatrix::from_matrix).collect(),
            targets: p.targets().iter().map(WireMatrix::from_matrix).collect(),
            prescribed_identity_image: p.identity_image().map(WireMatrix::from_matrix),
            options: None,
        }
    }

    pub fn to_problem(&self) -> anyhow::Result<FeasibilityProblem> {
        if self.version != FORMAT_VERSION {
            bail!("unsupported problem file version {}", self.version);
        }
        let class: MapClass = self.map_class.parse()?;
        let read = |ms: &[WireMatrix], what: &str| -> anyhow::Result<Vec<CMatrix>> {
            ms.iter()
                .enumerate()
                .map(|(i, m)| m.to_matrix().with_context(|| format!("{what} {}", i + 1)))
                .collect()
        };
        let p = FeasibilityProblem::new(
            read(&self.inputs, "input")?,
            read(&self.targets, "target")?,
            class,
        )?;
        match &self.prescribed_identity_image {
            Some(b) => {
                Ok(p.with_identity_image(b.to_matrix().context("prescribed_identity_image")?)?)
            }
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_dim: usize,
    pub out_dim: usize,
    pub operators: Vec<WireMatrix>,
}

impl ChannelJson {
    pub fn from_channel(ch: &KrausChannel) -> Self {
        Self {
            in_dim: ch.in_dim(),
            out_dim: ch.out_dim(),
            operators: ch.operators().iter().map(WireMatrix::from_matrix).collect(),
        }
    }

    pub fn to_channel(&self) -> anyhow::Result<KrausChannel> {
        let ops = self
            .operators
            .iter()
            .map(WireMatrix::to_matrix)
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(KrausChannel::new(self.in_dim, self.out_dim, ops)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsJson {
    pub interpolation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_preserving: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unital: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_image: Option<f64>,
    pub max: f64,
}

impl From<&Residuals> for ResidualsJson {
    fn from(r: &Residuals) -> Self {
        Self {
            interpolation: r.interpolation,
            trace_preserving: r.trace_preserving,
            unital: r.unital,
            identity_image: r.identity_image,
            max: r.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenJson {
    pub kind: String,
    pub passed: bool,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl From<&ScreenResult> for ScreenJson {
    fn from(s: &ScreenResult) -> Self {
        Self {
            kind: s.kind.as_str().to_string(),
            passed: s.passed,
            margin: s.margin + 0.0,
            // one-based in files, like the messages
            pair: s.pair.map(|(i, j)| [i + 1, j + 1]),
            t: s.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub verdict: String,
    pub route: String,
    pub evidence: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<WireMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_choi_eigenvalue: Option<f64>,
    pub iterations: usize,
    pub screens: Vec<ScreenJson>,
    pub warnings: Vec<String>,
}

impl From<&Certificate> for CertificateJson {
    fn from(c: &Certificate) -> Self {
        Self {
            verdict: c.verdict.as_str().to_string(),
            route: c.route.clone(),
            evidence: c.evidence.to_string(),
            residuals: match &c.evidence {
                Evidence::Verified(r) => Some(r.into()),
                _ => None,
            },
            channel: c.channel.as_ref().map(ChannelJson::from_channel),
            correlation: c.correlation.as_ref().map(WireMatrix::from_matrix),
            negative_choi_eigenvalue: match c.evidence {
                Evidence::NegativeChoiEigenvalue(v) => Some(v),
                _ => None,
            },
            iterations: c.iterations,
            screens: c.screens.iter().map(ScreenJson::from).collect(),
            warnings: c.warnings.clone(),
        }
    }
}

/// Command-line overrides; `None` keeps the file's value or the default.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub boundary_tol: Option<f64>,
    pub oracle: bool,
}

impl Flags {
    pub fn options(&self, file: Option<&FileOptions>) -> DecideOptions {
        let file = file.cloned().unwrap_or_default();
        let d = DecideOptions::default();
        DecideOptions {
            tol: self.tol.or(file.tol).unwrap_or(d.tol),
            max_iter: self.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
            boundary_tol: self
                .boundary_tol
                .or(file.boundary_tol)
                .unwrap_or(d.boundary_tol),
            force_oracle: self.oracle || file.force_oracle.unwrap_or(false),
        }
    }
}

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Report {
    fn json(code: i32, value: &impl Serialize) -> Self {
        Self {
            code,
            stdout: serde_json::to_string_pretty(value).expect("serializable") + "\n",
            stderr: String::new(),
        }
    }

    fn invalid(err: anyhow::Error) -> Self {
        Self {
            code: EXIT_INVALID,
            stdout: String::new(),
            stderr: format!("error: {err:#}\n"),
        }
    }
}

/// Reads a file, or standard input for `-`.
pub fn read_source(path: &str) -> anyhow::Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading standard input")?;
        Ok(s)
    } else {
        std::fs::read_to_string(Path::new(path)).with_context(|| format!("reading {path}"))
    }
}

pub fn parse_problem(text: &str) -> anyhow::Result<ProblemFile> {
    serde_json::from_str(text).context("parsing problem file")
}

fn load(path: &str) -> anyhow::Result<(ProblemFile, FeasibilityProblem)> {
    let file = parse_problem(&read_source(path)?)?;
    let p = file
        .to_problem()
        .with_context(|| format!("validating {path}"))?;
    Ok((file, p))
}

pub fn decide_problem(
    p: &FeasibilityProblem,
    opts: &DecideOptions,
) -> (Certificate, CertificateJson) {
    let c = decide(p, opts);
    let j = CertificateJson::from(&c);
    (c, j)
}

/// `decide PATH`: certificate JSON on stdout, exit code from the verdict.
pub fn cmd_decide(path: &str, flags: &Flags) -> Report {
    match load(path) {
        Ok((file, p)) => {
            let opts = flags.options(file.options.as_ref());
            let (c, j) = decide_problem(&p, &opts);
            let mut r = Report::json(c.verdict.exit_code(), &j);
            for w in &c.warnings {
                r.stderr.push_str(&format!("warning: {w}\n"));
            }
            r
        }
        Err(e) => Report::invalid(e),
    }
}

#[derive(Debug, Serialize)]
struct BatchEntry {
    path: String,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// `decide PATH...` over several files with `jobs` worker threads.
///
/// Prints a JSON array in argument order and exits with the largest
/// individual code.
pub fn cmd_decide_batch(paths: &[String], flags: &Flags, jobs: usize) -> Report {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Report>>> = Mutex::new(vec![None; paths.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, paths.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let r = cmd_decide(path, flags);
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("no worker panicked");
    let mut entries = Vec::with_capacity(paths.len());
    let mut stderr = String::new();
    let mut code = 0;
    for (path, r) in paths.iter().zip(results) {
        let r = r.expect("every file processed");
        code = code.max(r.code);
        for line in r.stderr.lines() {
            stderr.push_str(&format!("{path}: {line}\n"));
        }
        entries.push(BatchEntry {
            path: path.clone(),
            exit_code: r.code,
            certificate: (!r.stdout.is_empty())
                .then(|| serde_json::from_str(&r.stdout).expect("commands print valid JSON")),
            error: (r.code == EXIT_INVALID).then(|| r.stderr.trim().to_string()),
        });
    }
    let mut report = Report::json(code, &entries);
    report.stderr = stderr;
    report
}

/// A channel file: either a whole certificate with a `channel` field or a
/// bare `{in_dim, out_dim, operators}` object.
pub fn parse_channel(text: &str) -> anyhow::Result<KrausChannel> {
    let value: Value = serde_json::from_str(text).context("parsing channel file")?;
    let inner = match value.get("channel") {
        Some(Value::Null) => bail!("certificate has no channel (verdict was not FEASIBLE)"),
        Some(ch) => ch.clone(),
        None => value,
    };
    let ch: ChannelJson = serde_json::from_value(inner).context("reading channel")?;
    ch.to_channel()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReportJson {
    pub passed: bool,
    pub screens: Vec<ScreenJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyJson {
    pub valid: bool,
    pub tol: f64,
    pub residuals: ResidualsJson,
    /// Names of the residuals above `tol`.
    pub failed: Vec<String>,
}

/// `verify PROBLEM CHANNEL`: residuals of the channel against the problem.
pub fn cmd_verify(problem_path: &str, channel_path: &str, flags: &Flags) -> Report {
    let run = || -> anyhow::Result<Report> {
        let (file, p) = load(problem_path)?;
        let ch = parse_channel(&read_source(channel_path)?)?;
        let tol = flags.options(file.options.as_ref()).tol;
        let r = verify_channel(&p, &ch).context("channel does not fit the problem")?;
        let named = [
            ("interpolation", Some(r.interpolation)),
            ("trace_preserving", r.trace_preserving),
            ("unital", r.unital),
            ("identity_image", r.identity_image),
        ];
        let failed: Vec<String> = named
            .iter()
            .filter_map(|(name, v)| v.filter(|v| *v > tol).map(|_| name.to_string()))
            .collect();
        let out = VerifyJson {
            valid: failed.is_empty(),
            tol,
            residuals: (&r).into(),
            failed,
        };
        let mut report = Report::json(if out.valid { 0 } else { 1 }, &out);
        for name in &out.failed {
            report
                .stderr
                .push_str(&format!("residual {name} exceeds {tol:e}\n"));
        }
        Ok(report)
    };
    run().unwrap_or_else(Report::invalid)
}

/// `screen PATH`: necessary conditions only; 1 when one fails.
pub fn cmd_screen(path: &str, flags: &Flags) -> Report {
    match load(path) {
        Ok((file, p)) => {
            let opts = flags.options(file.options.as_ref());
            let results = screen(&p, &opts.screens());
            let out = ScreenReportJson {
                passed: results.iter().all(|s| s.passed),
                screens: results.iter().map(ScreenJson::from).collect(),
            };
            let mut r = Report::json(if out.passed { 0 } else { 1 }, &out);
            r.stderr = screen_table(&results);
            r
        }
        Err(e) => Report::invalid(e),
    }
}

fn screen_table(results: &[ScreenResult]) -> String {
    let mut s = format!(
        "{:<18} {:<7} {:>14}  detail\n",
        "condition", "result", "margin"
    );
    for r in results {
        let mut detail = String::new();
        if let Some((i, j)) = r.pair {
            detail.push_str(&format!("pair ({}, {})", i + 1, j + 1));
        }
        if let Some(t) = r.t {
            detail.push_str(&format!(" t = {t:.6}"));
        }
        s.push_str(&format!(
            "{:<18} {:<7} {:>14.6e}  {}\n",
            r.kind.as_str(),
            if r.passed { "pass" } else { "FAIL" },
            r.margin,
            detail.trim()
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use qinterp::linalg::{diag, from_real};

    #[test]
    fn matrices_round_trip_exactly() {
        let m = CMatrix::from_fn(2, 3, |i, j| {
            c64(0.1 * i as f64 + 1.0 / 3.0, -(j as f64) / 7.0)
        });
        let w = WireMatrix::from_matrix(&m);
        let text = serde_json::to_string(&w).unwrap();
        let back: WireMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        let w = WireMatrix {
            rows: 2,
            cols: 2,
            data: vec![[1.0, 0.0]; 3],
        };
        assert!(w.to_matrix().is_err());
    }

    #[test]
    fn flags_override_file_options() {
        let file = FileOptions {
            tol: Some(1e-6),
            max_iter: Some(10),
            boundary_tol: None,
            force_oracle: Some(true),
        };
        let flags = Flags {
            tol: Some(1e-9),
            ..Flags::default()
        };
        let o = flags.options(Some(&file));
        assert_eq!(o.tol, 1e-9);
        assert_eq!(o.max_iter, 10);
        assert_eq!(o.boundary_tol, DecideOptions::default().boundary_tol);
        assert!(o.force_oracle);
    }

    #[test]
    fn problem_files_round_trip() {
        let s = 3f64.sqrt() / 4.0;
        let p = FeasibilityProblem::new(
            vec![diag(&[0.8, 0.2]), diag(&[1.0 / 3.0, 2.0 / 3.0])],
            vec![
                from_real(2, 2, &[0.25, s, s, 0.75]),
                from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            ],
            MapClass::Tpcp,
        )
        .unwrap();
        let file = ProblemFile::from_problem(&p);
        let text = serde_json::to_string(&file).unwrap();
        assert_eq!(parse_problem(&text).unwrap().to_problem().unwrap(), p);
    }
}
