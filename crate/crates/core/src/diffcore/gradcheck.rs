//! Central finite-difference gradient verification.
//!
//! Used by the test suites to validate every primitive and arbitrary
//! compositions against an oracle that is independent of the backward pass.

use super::mat::Mat;
use super::tape::{Tape, Var};

/// Builds a scalar expression from leaf inputs. Reinvoked for every
/// perturbed evaluation, so it must be deterministic.
pub type BuildFn<'a> = &'a dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
}

fn eval(build: BuildFn, inputs: &[Mat<f64>]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let root = build(&mut tape, &vars);
    tape.value(root).item()
}

/// Compares reverse-mode gradients of `build` against central finite
/// differences with step `h`, for every element of every input.
pub fn check_gradients(build: BuildFn, inputs: &[Mat<f64>], h: f64) -> GradCheckReport {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let root = build(&mut tape, &vars);
    let grads = tape.backward(root).expect("backward failed in gradcheck");

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: 0,
    };

    for (vi, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .map(|m| m.as_slice().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[vi].len()]);
        for ei in 0..inputs[vi].len() {
            let mut plus = inputs.to_vec();
            plus[vi].as_mut_slice()[ei] += h;
            let mut minus = inputs.to_vec();
            minus[vi].as_mut_slice()[ei] -= h;
            let fd = (eval(build, &plus) - eval(build, &minus)) / (2.0 * h);
            let ad = analytic[ei];
            let abs = (ad - fd).abs();
            let rel = abs / ad.abs().max(fd.abs()).max(1.0);
            report.max_abs_err = report.max_abs_err.max(abs);
            report.max_rel_err = report.max_rel_err.max(rel);
            report.checked += 1;
        }
    }
    report
}
