//! Pooled readout heads: binding affinity (negative-log scale), binding
//! probability and the screening score that ranks candidates.

use crate::diffcore::{Real, Tape, Var};
use crate::error::Result;
use crate::net::{NetworkParams, ParamVars};

/// Mean-pools final node and edge features and layer-normalizes the
/// concatenation: `r = Norm(Concat(mean_i f_i, mean_ij e_ij))`, length
/// `d_f + d_e`.
pub fn pool<F: Real>(tape: &mut Tape<F>, f_final: Var, e_final: Var) -> Result<Var> {
    let fm = tape.mean_axis0(f_final);
    let em = tape.mean_axis0(e_final);
    let cat = tape.concat_cols(&[fm, em])?;
    tape.layer_norm_rows(cat)
}

/// `y_aff = ReLU(W2 LeakyReLU(W1 r))`, a non-negative scalar on the scaled
/// negative-log affinity domain.
pub fn affinity_head<F: Real>(
    tape: &mut Tape<F>,
    params: &NetworkParams<F>,
    pv: &ParamVars,
    pooled: Var,
) -> Result<Var> {
    let w1 = pv.get(params, "head.aff.1.w")?;
    let b1 = pv.get(params, "head.aff.1.b")?;
    let w2 = pv.get(params, "head.aff.2.w")?;
    let b2 = pv.get(params, "head.aff.2.b")?;
    let h = tape.linear(pooled, w1, b1)?;
    let h = tape.leaky_relu(h, params.cfg.leaky_slope);
    let out = tape.linear(h, w2, b2)?;
    Ok(tape.relu(out))
}

/// Binding-probability head: the same two-layer form with the final ReLU
/// replaced by a sigmoid.
pub fn screening_head<F: Real>(
    tape: &mut Tape<F>,
    params: &NetworkParams<F>,
    pv: &ParamVars,
    pooled: Var,
) -> Result<Var> {
    let w1 = pv.get(params, "head.bind.1.w")?;
    let b1 = pv.get(params, "head.bind.1.b")?;
    let w2 = pv.get(params, "head.bind.2.w")?;
    let b2 = pv.get(params, "head.bind.2.b")?;
    let h = tape.linear(pooled, w1, b1)?;
    let h = tape.leaky_relu(h, params.cfg.leaky_slope);
    let out = tape.linear(h, w2, b2)?;
    Ok(tape.sigmoid(out))
}

/// Screening score: predicted binding probability times predicted affinity
/// (unscaled). Ranking is unaffected by the positive scale constant.
pub fn screening_score(y_bind: f64, y_aff: f64) -> f64 {
    y_bind * y_aff
}
