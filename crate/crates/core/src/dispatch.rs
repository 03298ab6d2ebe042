//! Routing of a problem to the fastest procedure that decides it.
//!
//! Screens run first and any failure is final. Otherwise: qubit TPCP
//! problems go to the qubit procedures, rank-one inputs and targets to the
//! pure-state procedures, rank-one inputs with mixed TPCP targets try the
//! correlation form, and everything else (or anything left undecided) goes
//! to the Choi oracle.

use crate::certificate::{Certificate, Evidence, Verdict};
use crate::choi::oracle::{decide_general, OracleOptions};
use crate::choi::screen::{first_failure, screen, ScreenOptions, BOUNDARY_TOL};
use crate::choi::{FeasibilityProblem, MapClass};
use crate::mixed::{correlation_form_check, CorrelationForm};
use crate::pure::{decide_pure, rank_one_factor, PureOptions};
use crate::qubit::{decide_qubit, QubitOptions, QubitProblem};

#[derive(Debug, Clone)]
pub struct DecideOptions {
    /// Verification tolerance for constructed channels.
    pub tol: f64,
    pub max_iter: usize,
    pub boundary_tol: f64,
    /// Skip the screens and fast paths.
    pub force_oracle: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        Self {
            tol: crate::certificate::VERIFY_TOL,
            max_iter: 20_000,
            boundary_tol: BOUNDARY_TOL,
            force_oracle: false,
        }
    }
}

impl DecideOptions {
    pub fn oracle(&self) -> OracleOptions {
        OracleOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..OracleOptions::default()
        }
    }

    pub fn screens(&self) -> ScreenOptions {
        ScreenOptions {
            boundary_tol: self.boundary_tol,
            ..ScreenOptions::default()
        }
    }

    pub fn pure(&self) -> PureOptions {
        let mut o = PureOptions {
            boundary_tol: self.boundary_tol,
            ..PureOptions::default()
        };
        o.dykstra.max_iter = self.max_iter;
        o
    }

    pub fn qubit(&self) -> QubitOptions {
        QubitOptions {
            boundary_tol: self.boundary_tol,
            ..QubitOptions::default()
        }
    }
}

/// Decides `p`, recording the route taken and every screen evaluated.
pub fn decide(p: &FeasibilityProblem, opts: &DecideOptions) -> Certificate {
    let screens = screen(p, &opts.screens());
    if opts.force_oracle {
        let mut c = decide_general(p, &opts.oracle());
        c.screens = screens;
        return c;
    }
    if let Some(failed) = first_failure(&screens) {
        let mut c = Certificate::infeasible(
            &format!("screen-{}", failed.kind.as_str()),
            Evidence::ScreenFailed(failed.clone()),
        );
        c.screens = screens;
        return c;
    }
    let mut c = match fast_path(p, opts) {
        Some(c) if c.verdict != Verdict::Indeterminate => c,
        Some(fast) => {
            let mut c = decide_general(p, &opts.oracle());
            c.warnings.push(format!(
                "{} was inconclusive: {}",
                fast.route, fast.evidence
            ));
            c
        }
        None => decide_general(p, &opts.oracle()),
    };
    c.screens.extend(screens);
    c
}

fn fast_path(p: &FeasibilityProblem, opts: &DecideOptions) -> Option<Certificate> {
    let plain_tpcp = p.class() == MapClass::Tpcp && p.identity_image().is_none();
    if plain_tpcp && p.in_dim() == 2 && p.out_dim() == 2 && p.len() <= 4 {
        if let Ok(q) = QubitProblem::from_problem(p) {
            return Some(decide_qubit(&q, &opts.qubit()));
        }
    }
    if let Some(c) = decide_pure(p, &opts.pure()) {
        return Some(c);
    }
    if plain_tpcp {
        let cols = p
            .inputs()
            .iter()
            .map(rank_one_factor)
            .collect::<Option<Vec<_>>>()?;
        let x = crate::linalg::CMatrix::from_columns(&cols);
        return match correlation_form_check(&x, p.targets(), &opts.pure()) {
            CorrelationForm::Feasible(c) => Some(*c),
            CorrelationForm::SufficientConditionFailed(reason) => {
                let mut c = decide_general(p, &opts.oracle());
                c.warnings
                    .push(format!("correlation form inconclusive: {reason}"));
                Some(c)
            }
        };
    }
    None
}
