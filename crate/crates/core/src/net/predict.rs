//! Ensemble inference: independent full passes with fresh stochastic
//! initializations and sub-graph samples, aggregated by the RMSD-medoid
//! pose and averaged scalar heads.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{Mat, Real, Tape};
use crate::error::Result;
use crate::graph::{init_ligand_coords, sample_subgraph, ComplexGraph, COORD_SCALE};
use crate::heads;
use crate::metrics;
use crate::symmetry::EquivalentIndexSet;

use super::forward::{forward_cycle_values, Carry, CoordUpdateSet, CycleValues, ParamVars};
use super::NetworkParams;

/// One ensemble member's outputs (unscaled Angstroms / affinity units).
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub lig_coords: Mat<f64>,
    pub affinity: f64,
    pub probability: f64,
}

/// Aggregated prediction for one complex.
#[derive(Clone, Debug)]
pub struct PredictionRecord {
    /// Medoid pose, unscaled Angstroms.
    pub coords_final: Mat<f64>,
    /// Ligand coordinates after every block of every cycle of the medoid
    /// member, unscaled.
    pub block_trace: Vec<Mat<f64>>,
    /// Negative-log affinity, unscaled.
    pub affinity: f64,
    /// Binding probability in (0, 1).
    pub probability: f64,
    /// `probability * affinity`.
    pub screening_score: f64,
    pub medoid_index: usize,
    pub members: Vec<EnsembleMember>,
}

fn unscale(m: &Mat<f64>) -> Mat<f64> {
    m.map(|v| v / COORD_SCALE)
}

/// One full pass: `n_cycles` cycles with fresh sub-graphs, heads on the
/// final cycle's features.
pub fn single_pass<F: Real>(
    params: &NetworkParams<F>,
    graph: &ComplexGraph,
    init_seed: u64,
    cycle_seeds: &[u64],
) -> Result<(Vec<Mat<f64>>, EnsembleMember)> {
    let cfg = &params.cfg;
    let initialized = init_ligand_coords(graph, init_seed);
    let mut carry: Option<Carry<F>> = None;
    let mut trace: Vec<Mat<f64>> = Vec::with_capacity(cfg.n_cycles * cfg.n_blocks);
    let mut last: Option<CycleValues<F>> = None;
    for c in 0..cfg.n_cycles {
        let sub = sample_subgraph(&initialized, cfg.max_nodes, cycle_seeds[c])?;
        let lig_in = carry.as_ref().map(|cr: &Carry<F>| cr.lig_coords.clone());
        let vals =
            forward_cycle_values(params, &sub, lig_in, carry.as_ref(), &CoordUpdateSet::LigandOnly)?;
        for m in &vals.block_lig_coords {
            trace.push(unscale(&m.cast::<f64>()));
        }
        carry = Some(vals.carry.clone());
        last = Some(vals);
    }
    let last = last.expect("at least one cycle");

    let mut tape: Tape<F> = Tape::new();
    let pv = ParamVars::enter(&mut tape, params, false);
    let f = tape.constant(last.f_final.clone());
    let e = tape.constant(last.e_final.clone());
    let pooled = heads::pool(&mut tape, f, e)?;
    let aff = heads::affinity_head(&mut tape, params, &pv, pooled)?;
    let bind = heads::screening_head(&mut tape, params, &pv, pooled)?;
    let affinity = tape.value(aff).item().as_f64() / COORD_SCALE;
    let probability = tape.value(bind).item().as_f64();

    let lig_coords = unscale(&last.carry.lig_coords.cast::<f64>());
    Ok((
        trace,
        EnsembleMember {
            lig_coords,
            affinity,
            probability,
        },
    ))
}

/// Runs `n_ens` independent passes and aggregates: the reported pose is the
/// member minimizing the summed symmetry-corrected RMSD to the other
/// members (ties to the lowest index); affinity and probability are
/// averaged.
pub fn predict<F: Real>(
    params: &NetworkParams<F>,
    graph: &ComplexGraph,
    eqset: &EquivalentIndexSet,
    seed: u64,
) -> Result<PredictionRecord> {
    let cfg = &params.cfg;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(cfg.n_ens);
    let mut traces = Vec::with_capacity(cfg.n_ens);
    for _ in 0..cfg.n_ens {
        let init_seed: u64 = seeder.gen();
        let cycle_seeds: Vec<u64> = (0..cfg.n_cycles).map(|_| seeder.gen()).collect();
        let (trace, member) = single_pass(params, graph, init_seed, &cycle_seeds)?;
        members.push(member);
        traces.push(trace);
    }

    let medoid_index = medoid(&members, eqset);
    let affinity = members.iter().map(|m| m.affinity).sum::<f64>() / members.len() as f64;
    let probability = members.iter().map(|m| m.probability).sum::<f64>() / members.len() as f64;
    Ok(PredictionRecord {
        coords_final: members[medoid_index].lig_coords.clone(),
        block_trace: traces.swap_remove(medoid_index),
        affinity,
        probability,
        screening_score: heads::screening_score(probability, affinity),
        medoid_index,
        members,
    })
}

/// Index of the member with the smallest summed symmetry-corrected RMSD to
/// all other members.
pub fn medoid(members: &[EnsembleMember], eqset: &EquivalentIndexSet) -> usize {
    let n = members.len();
    if n <= 1 {
        return 0;
    }
    let mut best = 0;
    let mut best_sum = f64::INFINITY;
    for i in 0..n {
        let mut sum = 0.0;
        for (j, other) in members.iter().enumerate() {
            if i != j {
                sum += metrics::rmsd(&members[i].lig_coords, &other.lig_coords, eqset);
            }
        }
        if sum < best_sum {
            best_sum = sum;
            best = i;
        }
    }
    best
}
