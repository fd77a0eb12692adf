//! One recycling cycle of the network: input projections, optional gated
//! carry-merge of core-atom features, then the stacked feature and
//! coordinate update blocks.

use std::rc::Rc;

use crate::diffcore::{Mat, Real, Tape, Var};
use crate::error::{CoreError, Result};
use crate::graph::{NodeRole, SubGraph, LIGAND_NODE_DIM};

use super::{NetConfig, NetworkParams};

/// Distance epsilon inside the pairwise norm; guards the d=0 singularity
/// when two atoms coincide at initialization.
pub const DIST_EPS: f64 = 1e-8;

/// Tape handles for every parameter tensor, in parameter-store order.
pub struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn enter<F: Real>(
        tape: &mut Tape<F>,
        params: &NetworkParams<F>,
        requires_grad: bool,
    ) -> Self {
        ParamVars {
            vars: params
                .mats()
                .iter()
                .map(|m| tape.input(m.clone(), requires_grad))
                .collect(),
        }
    }

    pub fn get<F: Real>(&self, params: &NetworkParams<F>, name: &str) -> Result<Var> {
        Ok(self.vars[params.index_of(name)?])
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Detached state carried from one cycle into the next: final core-atom
/// features (gate-merged into the new projections) and the ligand pose.
#[derive(Clone, Debug)]
pub struct Carry<F> {
    /// Parent-graph indexes of the core atoms, ascending.
    pub core_parent_ids: Vec<usize>,
    pub node_feats: Mat<F>,
    /// Core-by-core pair rows, `[k*k, d_e]`.
    pub edge_feats: Mat<F>,
    pub lig_coords: Mat<F>,
}

/// Which nodes the coordinate update moves: ligand atoms always, plus
/// denoising-mode protein nodes identified by parent index.
#[derive(Clone, Debug, Default)]
pub enum CoordUpdateSet {
    #[default]
    LigandOnly,
    LigandPlus(Vec<usize>),
}

/// Traced (gradient-recording) outputs of one cycle.
pub struct CycleTrace {
    /// Full coordinate matrices after each block.
    pub block_coords: Vec<Var>,
    pub f_final: Var,
    pub e_final: Var,
}

/// Value-only outputs of one cycle, with the carry for the next.
pub struct CycleValues<F> {
    /// Ligand rows of the coordinates after each block (scaled).
    pub block_lig_coords: Vec<Mat<F>>,
    pub f_final: Mat<F>,
    pub e_final: Mat<F>,
    pub carry: Carry<F>,
}

/// Builds the starting coordinate tensor for a cycle: protein rows from the
/// sub-graph, ligand rows from `lig_override` (the stochastic initialization
/// or the carried pose). The ligand rows may require gradient.
pub fn initial_coords_var<F: Real>(
    tape: &mut Tape<F>,
    sub: &SubGraph,
    lig_override: Option<Mat<F>>,
    lig_requires_grad: bool,
) -> Result<Var> {
    let n = sub.n_total();
    let n_lig = sub.graph.n_lig;
    let base = tape.constant(sub.graph.coords.cast::<F>());
    let lig = match lig_override {
        Some(m) => {
            if m.shape() != (n_lig, 3) {
                return Err(CoreError::Shape(format!(
                    "ligand coordinate override {:?}, expected ({n_lig}, 3)",
                    m.shape()
                )));
            }
            m
        }
        None => sub.graph.ligand_coords().cast::<F>(),
    };
    let lig = tape.input(lig, lig_requires_grad);
    let rows = Rc::new((0..n_lig).collect::<Vec<_>>());
    let _ = n;
    tape.scatter_rows_replace(base, lig, rows)
}

/// Element-wise gate: `Norm(sigmoid(W [new, prev, new - prev] + b) * new + prev)`.
fn gate<F: Real>(tape: &mut Tape<F>, new: Var, prev: Var, w: Var, b: Var) -> Result<Var> {
    let diff = tape.sub(new, prev)?;
    let cat = tape.concat_cols(&[new, prev, diff])?;
    let lin = tape.linear(cat, w, b)?;
    let g = tape.sigmoid(lin);
    let gated = tape.mul(g, new)?;
    let merged = tape.add(gated, prev)?;
    tape.layer_norm_rows(merged)
}

fn sub_rows_of_parents(sub: &SubGraph, parents: &[usize]) -> Result<Vec<usize>> {
    parents
        .iter()
        .map(|p| {
            sub.parent_indexes
                .binary_search(p)
                .map_err(|_| CoreError::Net(format!("parent node {p} missing from sub-graph")))
        })
        .collect()
}

/// Runs the input projections, the optional recycle merge, and the stacked
/// feature/coordinate blocks for one cycle.
pub fn forward_cycle<F: Real>(
    tape: &mut Tape<F>,
    params: &NetworkParams<F>,
    pv: &ParamVars,
    sub: &SubGraph,
    coords0: Var,
    carry: Option<&Carry<F>>,
    update: &CoordUpdateSet,
) -> Result<CycleTrace> {
    let cfg = &params.cfg;
    let n = sub.n_total();
    let n_lig = sub.graph.n_lig;
    let heads = cfg.n_heads;
    let slope = cfg.leaky_slope;

    // Input projections per feature type.
    let node_in = tape.constant(sub.graph.node_feats.cast::<F>());
    let lig_rows = Rc::new((0..n_lig).collect::<Vec<_>>());
    let prot_rows = Rc::new((n_lig..n).collect::<Vec<_>>());
    let lig_in_padded = tape.gather_rows(node_in, lig_rows.clone())?;
    let lig_in = tape.slice_cols(lig_in_padded, 0, LIGAND_NODE_DIM)?;
    let w = pv.get(params, "input.lig.w")?;
    let b = pv.get(params, "input.lig.b")?;
    let lig_proj = tape.linear(lig_in, w, b)?;
    let prot_in = tape.gather_rows(node_in, prot_rows.clone())?;
    let w = pv.get(params, "input.prot.w")?;
    let b = pv.get(params, "input.prot.b")?;
    let prot_proj = tape.linear(prot_in, w, b)?;
    let zero_nodes = tape.constant(Mat::zeros(n, cfg.d_f));
    let with_lig = tape.scatter_rows_replace(zero_nodes, lig_proj, lig_rows)?;
    let mut f = tape.scatter_rows_replace(with_lig, prot_proj, prot_rows)?;

    let edge_in = tape.constant(sub.graph.edge_feats.cast::<F>());
    let w = pv.get(params, "input.edge.w")?;
    let b = pv.get(params, "input.edge.b")?;
    let mut e = tape.linear(edge_in, w, b)?;

    // Recycle: gate-merge carried core features into the fresh projections;
    // context carries are ignored.
    if let Some(carry) = carry {
        let core_rows = sub_rows_of_parents(sub, &carry.core_parent_ids)?;
        let core_rc = Rc::new(core_rows.clone());
        let fresh_core = tape.gather_rows(f, core_rc.clone())?;
        let carried = tape.constant(carry.node_feats.clone());
        let wg = pv.get(params, "recycle.node.w")?;
        let bg = pv.get(params, "recycle.node.b")?;
        let merged = gate(tape, fresh_core, carried, wg, bg)?;
        f = tape.scatter_rows_replace(f, merged, core_rc)?;

        let mut pair_rows = Vec::with_capacity(core_rows.len() * core_rows.len());
        for &a in &core_rows {
            for &bb in &core_rows {
                pair_rows.push(a * n + bb);
            }
        }
        let pair_rc = Rc::new(pair_rows);
        let fresh_edges = tape.gather_rows(e, pair_rc.clone())?;
        let carried_e = tape.constant(carry.edge_feats.clone());
        let wg = pv.get(params, "recycle.edge.w")?;
        let bg = pv.get(params, "recycle.edge.b")?;
        let merged_e = gate(tape, fresh_edges, carried_e, wg, bg)?;
        e = tape.scatter_rows_replace(e, merged_e, pair_rc)?;
    }

    // Coordinate update mask.
    let mut mask = Mat::zeros(n, 1);
    for i in 0..n_lig {
        mask.set(i, 0, F::one());
    }
    if let CoordUpdateSet::LigandPlus(extra) = update {
        for row in sub_rows_of_parents(sub, extra)? {
            debug_assert!(sub.graph.roles[row] != NodeRole::Ligand);
            mask.set(row, 0, F::one());
        }
    }
    let update_mask = tape.constant(mask);

    let (centers, width) = cfg.rbf_centers();
    let centers = Rc::new(centers);
    let inv_sqrt_dh = 1.0 / (cfg.d_h() as f64).sqrt();

    let mut x = coords0;
    let mut block_coords = Vec::with_capacity(cfg.n_blocks);

    for l in 0..cfg.n_blocks {
        let name = |suffix: &str| format!("block{l}.{suffix}");
        let p = |pv: &ParamVars, s: &str| pv.get(params, &name(s));

        // Distance-aware edge encoding, recomputed from current coordinates.
        let xi = tape.expand_i(x, n)?;
        let xj = tape.expand_j(x, n)?;
        let diff = tape.sub(xi, xj)?;
        let dist = tape.row_l2_norm(diff, DIST_EPS);
        let rbf = tape.rbf_encode(dist, centers.clone(), width)?;
        let dcat = tape.concat_cols(&[rbf, e])?;

        // Attention: q from the central node, k from the neighbor node
        // modulated by the encoded edge.
        let (w, b) = (p(pv, "k.w")?, p(pv, "k.b")?);
        let kf = tape.linear(f, w, b)?;
        let (w, b) = (p(pv, "e.w")?, p(pv, "e.b")?);
        let ke_lin = tape.linear(dcat, w, b)?;
        let ke = tape.leaky_relu(ke_lin, slope);
        let kf_pair = tape.expand_j(kf, n)?;
        let k_pair = tape.mul(kf_pair, ke)?;
        let (w, b) = (p(pv, "q.w")?, p(pv, "q.b")?);
        let q = tape.linear(f, w, b)?;
        let q_pair = tape.expand_i(q, n)?;
        let a = tape.mul(q_pair, k_pair)?;
        let s_raw = tape.head_sum(a, heads)?;
        let s = tape.affine(s_raw, inv_sqrt_dh, 0.0);
        let omega = tape.softmax_pairs_over_j(s, n)?;

        // Node aggregation over Concat(v_i, v_j).
        let (w, b) = (p(pv, "v.w")?, p(pv, "v.b")?);
        let v = tape.linear(f, w, b)?;
        let omega_rowsum = tape.sum_over_j(omega, n, false)?;
        let vi_part = tape.head_scale(v, omega_rowsum, heads)?;
        let vj = tape.expand_j(v, n)?;
        let vj_scaled = tape.head_scale(vj, omega, heads)?;
        let vj_part = tape.sum_over_j(vj_scaled, n, false)?;
        let inner = tape.head_interleave2(vi_part, vj_part, heads)?;
        let (w, b) = (p(pv, "fo.w")?, p(pv, "fo.b")?);
        let f_hat = tape.linear(inner, w, b)?;

        // Edge aggregation.
        let (w, b) = (p(pv, "t.w")?, p(pv, "t.b")?);
        let t_lin = tape.linear(dcat, w, b)?;
        let t = tape.leaky_relu(t_lin, slope);
        let e_inner = tape.head_scale(t, omega, heads)?;
        let (w, b) = (p(pv, "eo.w")?, p(pv, "eo.b")?);
        let e_hat = tape.linear(e_inner, w, b)?;

        // Gate, then gated feedforward, for nodes and edges alike.
        let (wg, bg) = (p(pv, "g1.w")?, p(pv, "g1.b")?);
        let f_gated = gate(tape, f_hat, f, wg, bg)?;
        let (w1, b1) = (p(pv, "f1.w")?, p(pv, "f1.b")?);
        let (w2, b2) = (p(pv, "f2.w")?, p(pv, "f2.b")?);
        let h_lin = tape.linear(f_gated, w1, b1)?;
        let h_act = tape.leaky_relu(h_lin, slope);
        let h = tape.linear(h_act, w2, b2)?;
        let (wg2, bg2) = (p(pv, "g2.w")?, p(pv, "g2.b")?);
        let f_next = gate(tape, h, f_gated, wg2, bg2)?;

        let (wg, bg) = (p(pv, "ge1.w")?, p(pv, "ge1.b")?);
        let e_gated = gate(tape, e_hat, e, wg, bg)?;
        let (w1, b1) = (p(pv, "ef1.w")?, p(pv, "ef1.b")?);
        let (w2, b2) = (p(pv, "ef2.w")?, p(pv, "ef2.b")?);
        let he_lin = tape.linear(e_gated, w1, b1)?;
        let he_act = tape.leaky_relu(he_lin, slope);
        let he = tape.linear(he_act, w2, b2)?;
        let (wg2, bg2) = (p(pv, "ge2.w")?, p(pv, "ge2.b")?);
        let e_next = gate(tape, he, e_gated, wg2, bg2)?;

        // Coordinate update from the pre-softmax attention products: each
        // pair contributes along the unit direction between the atoms;
        // heads are combined by the learned lambda weights. Self-pairs are
        // excluded from the sum.
        let wx = p(pv, "x.w")?;
        let bx = p(pv, "x.b")?;
        let prod = tape.mul_bcast_row(a, wx)?;
        let phi_raw = tape.head_sum(prod, heads)?;
        let phi = tape.add_bcast_row(phi_raw, bx)?;
        let lambda = p(pv, "lambda")?;
        let psi = tape.matmul(phi, lambda)?;
        let dirn = tape.div_bcast_col(diff, dist)?;
        let scaled = tape.mul_bcast_col(dirn, psi)?;
        let delta = tape.sum_over_j(scaled, n, true)?;
        let masked = tape.mul_bcast_col(delta, update_mask)?;
        let x_next = tape.add(x, masked)?;

        f = f_next;
        e = e_next;
        x = x_next;
        block_coords.push(x);
    }

    Ok(CycleTrace {
        block_coords,
        f_final: f,
        e_final: e,
    })
}

/// Runs one cycle without gradient recording and extracts plain values plus
/// the carry for the next cycle.
pub fn forward_cycle_values<F: Real>(
    params: &NetworkParams<F>,
    sub: &SubGraph,
    lig_coords_in: Option<Mat<F>>,
    carry: Option<&Carry<F>>,
    update: &CoordUpdateSet,
) -> Result<CycleValues<F>> {
    let mut tape: Tape<F> = Tape::new();
    let pv = ParamVars::enter(&mut tape, params, false);
    let coords0 = initial_coords_var(&mut tape, sub, lig_coords_in, false)?;
    let trace = forward_cycle(&mut tape, params, &pv, sub, coords0, carry, update)?;
    extract_values(&tape, params, sub, &trace)
}

/// Copies a finished cycle's tensors out of the tape.
pub fn extract_values<F: Real>(
    tape: &Tape<F>,
    params: &NetworkParams<F>,
    sub: &SubGraph,
    trace: &CycleTrace,
) -> Result<CycleValues<F>> {
    let n = sub.n_total();
    let n_lig = sub.graph.n_lig;
    let take_lig = |m: &Mat<F>| -> Mat<F> {
        let mut out = Mat::zeros(n_lig, 3);
        for i in 0..n_lig {
            out.row_mut(i).copy_from_slice(m.row(i));
        }
        out
    };
    let block_lig_coords: Vec<Mat<F>> = trace
        .block_coords
        .iter()
        .map(|&v| take_lig(tape.value(v)))
        .collect();
    let f_final = tape.value(trace.f_final).clone();
    let e_final = tape.value(trace.e_final).clone();

    let core_parent_ids: Vec<usize> = sub
        .parent_indexes
        .iter()
        .enumerate()
        .filter(|&(row, _)| sub.graph.roles[row] != NodeRole::ProteinContext)
        .map(|(_, &p)| p)
        .collect();
    let core_rows: Vec<usize> = (0..n)
        .filter(|&row| sub.graph.roles[row] != NodeRole::ProteinContext)
        .collect();
    let k = core_rows.len();
    let mut node_feats = Mat::zeros(k, params.cfg.d_f);
    for (out_row, &row) in core_rows.iter().enumerate() {
        node_feats.row_mut(out_row).copy_from_slice(f_final.row(row));
    }
    let mut edge_feats = Mat::zeros(k * k, params.cfg.d_e);
    for (oa, &a) in core_rows.iter().enumerate() {
        for (ob, &b) in core_rows.iter().enumerate() {
            edge_feats
                .row_mut(oa * k + ob)
                .copy_from_slice(e_final.row(a * n + b));
        }
    }
    let lig_coords = block_lig_coords
        .last()
        .cloned()
        .unwrap_or_else(|| take_lig(&sub.graph.coords.cast::<F>()));

    Ok(CycleValues {
        block_lig_coords,
        f_final,
        e_final,
        carry: Carry {
            core_parent_ids,
            node_feats,
            edge_feats,
            lig_coords,
        },
    })
}

/// Convenience used by config validation: a cycle plan's total number of
/// ligand updates.
pub fn total_ligand_updates(cfg: &NetConfig) -> usize {
    cfg.n_cycles * cfg.n_blocks
}
