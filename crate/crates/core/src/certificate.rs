//! Verdicts and the evidence attached to them.

use std::fmt;

use crate::choi::KrausChannel;
use crate::linalg::CMatrix;

/// Residual tolerance every FEASIBLE certificate must meet.
pub const VERIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl Verdict {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Feasible => 0,
            Verdict::Infeasible => 1,
            Verdict::Indeterminate => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Feasible => "FEASIBLE",
            Verdict::Infeasible => "INFEASIBLE",
            Verdict::Indeterminate => "INDETERMINATE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Residuals of a channel against a problem, all in Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `max_i ||T(A_i) - B_i||`.
    pub interpolation: f64,
    /// `||sum F*F - I||` when trace preservation is required.
    pub trace_preserving: Option<f64>,
    /// `||sum F F* - I||` when unitality is required.
    pub unital: Option<f64>,
    /// `||sum F F* - B||` when `T(I) = B` is prescribed.
    pub identity_image: Option<f64>,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [
            Some(self.interpolation),
            self.trace_preserving,
            self.unital,
            self.identity_image,
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Which necessary condition a screener evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScreenKind {
    /// `||A_i - t A_j||_1 >= ||B_i - t B_j||_1` for all `t >= 0`.
    TraceNorm,
    /// `F(B_i, B_j) >= F(A_i, A_j)`.
    Fidelity,
    /// Targets of a CP map applied to PSD inputs are PSD.
    TargetPositivity,
    /// `tr B_i = tr A_i` under trace preservation.
    TraceConsistency,
}

impl ScreenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScreenKind::TraceNorm => "trace_norm",
            ScreenKind::Fidelity => "fidelity",
            ScreenKind::TargetPositivity => "target_positivity",
            ScreenKind::TraceConsistency => "trace_consistency",
        }
    }
}

/// Outcome of one necessary-condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub kind: ScreenKind,
    pub passed: bool,
    /// Size of the worst violation (positive) or the smallest slack (nonpositive).
    pub margin: f64,
    /// Indices of the offending pair or state.
    pub pair: Option<(usize, usize)>,
    /// Worst grid point for the trace-norm condition.
    pub t: Option<f64>,
}

impl fmt::Display for ScreenResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} (margin {:.6e}",
            self.kind.as_str(),
            if self.passed { "passed" } else { "failed" },
            self.margin
        )?;
        if let Some((i, j)) = self.pair {
            write!(f, ", pair ({}, {})", i + 1, j + 1)?;
        }
        if let Some(t) = self.t {
            write!(f, ", t = {t}")?;
        }
        write!(f, ")")
    }
}

/// Why a verdict was reached.
#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    /// A channel was constructed and checked.
    Verified(Residuals),
    /// A necessary condition failed.
    ScreenFailed(ScreenResult),
    /// Alternating projections stalled with the sets this far apart.
    SeparationGap { gap: f64, iterations: usize },
    /// The unique candidate map has a Choi matrix with this eigenvalue.
    NegativeChoiEigenvalue(f64),
    /// A structural condition failed; the message names it.
    ConditionViolated(String),
    /// Neither band was reached.
    Unresolved { gap: f64, iterations: usize },
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::Verified(r) => write!(f, "verified (max residual {:.3e})", r.max()),
            Evidence::ScreenFailed(s) => write!(f, "{s}"),
            Evidence::SeparationGap { gap, iterations } => {
                write!(
                    f,
                    "projection gap {gap:.3e} stabilized after {iterations} iterations"
                )
            }
            Evidence::NegativeChoiEigenvalue(v) => {
                write!(f, "Choi matrix has negative eigenvalue {v:.6e}")
            }
            Evidence::ConditionViolated(s) => f.write_str(s),
            Evidence::Unresolved { gap, iterations } => {
                write!(
                    f,
                    "projection gap {gap:.3e} unresolved after {iterations} iterations"
                )
            }
        }
    }
}

/// Verdict plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub verdict: Verdict,
    pub channel: Option<KrausChannel>,
    pub evidence: Evidence,
    /// Which decision procedure produced the verdict.
    pub route: String,
    pub iterations: usize,
    /// Correlation matrix witnessing a pure-state decision.
    pub correlation: Option<CMatrix>,
    /// Screeners evaluated along the way.
    pub screens: Vec<ScreenResult>,
    pub warnings: Vec<String>,
}

impl Certificate {
    pub fn feasible(route: &str, channel: KrausChannel, residuals: Residuals) -> Self {
        Self {
            verdict: Verdict::Feasible,
            channel: Some(channel),
            evidence: Evidence::Verified(residuals),
            route: route.to_string(),
            iterations: 0,
            correlation: None,
            screens: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn infeasible(route: &str, evidence: Evidence) -> Self {
        Self {
            verdict: Verdict::Infeasible,
            channel: None,
            evidence,
            route: route.to_string(),
            iterations: 0,
            correlation: None,
            screens: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn indeterminate(route: &str, evidence: Evidence) -> Self {
        Self {
            verdict: Verdict::Indeterminate,
            channel: None,
            evidence,
            route: route.to_string(),
            iterations: 0,
            correlation: None,
            screens: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_warning(mut self, warning: String) -> Self {
        self.warnings.push(warning);
        self
    }

    pub fn with_correlation(mut self, m: CMatrix) -> Self {
        self.correlation = Some(m);
        self
    }

    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}
