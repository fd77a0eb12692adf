//! Featurization, stochastic initialization and sub-graph sampling
//! properties, checked against counting and statistical oracles.

use ligpose_core::chemio::Pocket;
use ligpose_core::graph::{
    self, featurize, init_ligand_coords, init_ligand_coords_with_sigma, sample_subgraph,
    NodeRole, COORD_SCALE, CROSS_PART_DISTANCE, EDGE_DIM, EDGE_DISTANCE, LIGAND_NODE_DIM,
    PROTEIN_NODE_DIM,
};
use ligpose_core::synth;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn toy_graph(seed: u64) -> graph::ComplexGraph {
    let complex = synth::toy_complex(seed, 5, seed as usize, 6.0);
    let pocket = Pocket::external(complex.protein.residues.clone()).unwrap();
    featurize(&pocket, &complex.ligand).unwrap()
}

#[test]
fn structural_constants() {
    assert_eq!(PROTEIN_NODE_DIM, 79);
    assert_eq!(LIGAND_NODE_DIM, 45);
    assert_eq!(EDGE_DIM, 7);
    let g = toy_graph(3);
    assert_eq!(g.node_feats.cols(), 79);
    assert_eq!(g.edge_feats.cols(), 7);
    // Ligand rows use only the first 45 columns.
    for i in 0..g.n_lig {
        for c in LIGAND_NODE_DIM..PROTEIN_NODE_DIM {
            assert_eq!(g.node_feats.get(i, c), 0.0);
        }
    }
}

#[test]
fn benzene_carbon_feature_bits() {
    let complex = synth::toy_complex(42, 4, 1, 6.0); // kind 1 = benzene
    let pocket = Pocket::external(complex.protein.residues.clone()).unwrap();
    let g = featurize(&pocket, &complex.ligand).unwrap();
    for i in 0..g.n_lig {
        let row = g.node_feats.row(i);
        assert_eq!(row[44], 1.0, "aromatic bit");
        assert_eq!(row[38 + 3], 1.0, "ring-size-6 bit");
        assert_eq!(row[0], 1.0, "carbon element bit");
    }
}

#[test]
fn cross_rigid_part_distance_is_masked() {
    // Ligand kind 5 carries a rotatable bond: ring part and tail part.
    let complex = synth::toy_complex(7, 4, 5, 6.0);
    let pocket = Pocket::external(complex.protein.residues.clone()).unwrap();
    let g = featurize(&pocket, &complex.ligand).unwrap();
    let n = g.n_total();
    let rigid = &g.rigid_part;
    let mut seen_cross = false;
    let mut seen_same = false;
    for i in 0..g.n_lig {
        for j in 0..g.n_lig {
            let d = g.edge_feats.get(i * n + j, EDGE_DISTANCE);
            if rigid[i] == rigid[j] {
                let expect = ((g.coords.get(i, 0) - g.coords.get(j, 0)).powi(2)
                    + (g.coords.get(i, 1) - g.coords.get(j, 1)).powi(2)
                    + (g.coords.get(i, 2) - g.coords.get(j, 2)).powi(2))
                .sqrt();
                assert!((d - expect).abs() < 1e-12);
                seen_same = true;
            } else {
                assert_eq!(d, CROSS_PART_DISTANCE);
                seen_cross = true;
            }
        }
    }
    assert!(seen_cross && seen_same);
    // Protein-ligand pairs are always cross-part.
    for i in 0..g.n_lig {
        for j in g.n_lig..n {
            assert_eq!(g.edge_feats.get(i * n + j, EDGE_DISTANCE), CROSS_PART_DISTANCE);
        }
    }
    // Every node has a self-edge row with zero self-distance.
    for i in 0..n {
        assert_eq!(g.edge_feats.get(i * n + i, EDGE_DISTANCE), 0.0);
    }
}

#[test]
fn edge_channels_are_symmetric() {
    let g = toy_graph(11);
    let n = g.n_total();
    for i in 0..n {
        for j in 0..n {
            for c in 0..EDGE_DIM {
                assert_eq!(
                    g.edge_feats.get(i * n + j, c),
                    g.edge_feats.get(j * n + i, c),
                    "edge channel {c} must be symmetric at ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn featurization_invariant_under_rigid_transform() {
    let complex = synth::toy_complex(19, 5, 2, 6.0);
    let pocket = Pocket::external(complex.protein.residues.clone()).unwrap();
    let g0 = featurize(&pocket, &complex.ligand).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rot = synth::random_rotation(&mut rng);
    let t = [3.0, -7.0, 11.0];
    let mut moved = complex.clone();
    for res in &mut moved.protein.residues {
        for a in &mut res.atoms {
            a.coords = synth::add(synth::rotate(a.coords, &rot), t);
        }
    }
    for a in &mut moved.ligand.atoms {
        a.coords = synth::add(synth::rotate(a.coords, &rot), t);
    }
    let pocket1 = Pocket::external(moved.protein.residues.clone()).unwrap();
    let g1 = featurize(&pocket1, &moved.ligand).unwrap();

    // One-hot channels are bit-identical; the distance channel is preserved
    // up to floating-point rotation roundoff.
    assert_eq!(g0.node_feats, g1.node_feats);
    assert_eq!(g0.roles, g1.roles);
    assert_eq!(g0.rigid_part, g1.rigid_part);
    let n = g0.n_total();
    for r in 0..n * n {
        for c in 0..EDGE_DIM {
            let (a, b) = (g0.edge_feats.get(r, c), g1.edge_feats.get(r, c));
            if c == EDGE_DISTANCE {
                assert!((a - b).abs() < 1e-9, "distance drifted: {a} vs {b}");
            } else {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn node_permutation_permutes_tensors_consistently() {
    // Permuting ligand atom order permutes rows/columns of all tensors.
    let complex = synth::toy_complex(23, 4, 7, 6.0);
    let pocket = Pocket::external(complex.protein.residues.clone()).unwrap();
    let g0 = featurize(&pocket, &complex.ligand).unwrap();

    let n_lig = complex.ligand.n_atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut perm: Vec<usize> = (0..n_lig).collect();
    perm.shuffle(&mut rng);
    // relabeled[k] = original[perm[k]]
    let mut atoms = Vec::with_capacity(n_lig);
    for &p in &perm {
        atoms.push(complex.ligand.atoms[p].clone());
    }
    let mut inverse = vec![0usize; n_lig];
    for (k, &p) in perm.iter().enumerate() {
        inverse[p] = k;
    }
    let bonds = complex
        .ligand
        .bonds
        .iter()
        .map(|b| (inverse[b.i], inverse[b.j], b.order))
        .collect();
    let relabeled =
        ligpose_core::chemio::LigandMol::build(complex.ligand.name.clone(), atoms, bonds).unwrap();
    let g1 = featurize(&pocket, &relabeled).unwrap();

    let n = g0.n_total();
    let map = |k: usize| -> usize {
        if k < n_lig {
            perm[k]
        } else {
            k
        }
    };
    for k in 0..n {
        assert_eq!(g1.node_feats.row(k), g0.node_feats.row(map(k)));
        assert_eq!(g1.coords.row(k), g0.coords.row(map(k)));
    }
    for a in 0..n {
        for b in 0..n {
            assert_eq!(
                g1.edge_feats.row(a * n + b),
                g0.edge_feats.row(map(a) * n + map(b)),
                "edge ({a},{b})"
            );
        }
    }
}

#[test]
fn init_is_deterministic_and_sigma_zero_collapses_to_centroid() {
    let g = toy_graph(2);
    let a = init_ligand_coords(&g, 9);
    let b = init_ligand_coords(&g, 9);
    assert_eq!(a.coords, b.coords);
    let c = init_ligand_coords(&g, 10);
    assert_ne!(a.coords, c.coords);
    // Protein untouched.
    for i in g.n_lig..g.n_total() {
        assert_eq!(a.coords.row(i), g.coords.row(i));
    }
    let zero = init_ligand_coords_with_sigma(&g, 4, 0.0);
    for i in 0..g.n_lig {
        for c in 0..3 {
            assert!((zero.coords.get(i, c) - g.pocket_center[c]).abs() < 1e-12);
        }
    }
}

/// Monte-Carlo oracle: sample mean within 0.15 A of the centroid component,
/// sample standard deviation within [9.8, 10.2] A.
#[test]
fn init_statistics_match_the_gaussian() {
    let g = toy_graph(6);
    let mut values = Vec::with_capacity(100_000);
    let mut seed = 0u64;
    while values.len() < 100_000 {
        let init = init_ligand_coords(&g, seed);
        for i in 0..g.n_lig {
            values.push(init.coords.get(i, 0) / COORD_SCALE);
        }
        seed += 1;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let center = g.pocket_center[0] / COORD_SCALE;
    assert!(
        (mean - center).abs() < 0.15,
        "mean {mean} vs centroid {center}"
    );
    assert!((9.8..=10.2).contains(&std), "std {std}");
}

#[test]
fn subgraph_counts_and_saturation() {
    let g = toy_graph(13);
    let core = g.core_indexes().len();
    let context = g.context_indexes().len();
    assert!(context > 2, "need context atoms for this test");

    // Saturation: max_nodes >= total keeps every node.
    let all = sample_subgraph(&g, g.n_total() + 5, 1).unwrap();
    assert_eq!(all.n_total(), g.n_total());
    assert_eq!(all.parent_indexes, (0..g.n_total()).collect::<Vec<_>>());

    // Partial: exactly max_nodes, all core present.
    let max_nodes = core + context / 2;
    let sub = sample_subgraph(&g, max_nodes, 1).unwrap();
    assert_eq!(sub.n_total(), max_nodes);
    for &i in &g.core_indexes() {
        assert!(sub.parent_indexes.contains(&i));
    }
    // Core alone exceeding the budget is an error.
    assert!(sample_subgraph(&g, core - 1, 1).is_err());
}

/// Monte-Carlo uniformity oracle: with half the context sampled, every
/// context atom appears with frequency 1/2 within 0.05 over many draws.
#[test]
fn subgraph_sampling_is_uniform() {
    let g = toy_graph(17);
    let core = g.core_indexes().len();
    let context = g.context_indexes();
    let picked_per_draw = context.len() / 2;
    let max_nodes = core + picked_per_draw;
    let mut counts = std::collections::HashMap::new();
    let draws = 10_000u32;
    for seed in 0..draws {
        let sub = sample_subgraph(&g, max_nodes, u64::from(seed)).unwrap();
        for &i in &sub.parent_indexes {
            if g.roles[i] == NodeRole::ProteinContext {
                *counts.entry(i).or_insert(0u32) += 1;
            }
        }
    }
    let expected = picked_per_draw as f64 / context.len() as f64;
    for &i in &context {
        let freq = f64::from(*counts.get(&i).unwrap_or(&0)) / f64::from(draws);
        assert!(
            (freq - expected).abs() < 0.05,
            "context atom {i}: frequency {freq} vs {expected}"
        );
    }
}

#[test]
fn binary_and_json_serialization_roundtrip() {
    let g = toy_graph(29);
    let bytes = graph::graph_to_bytes(&g);
    let back = graph::graph_from_bytes(&bytes).unwrap();
    assert_eq!(back.n_lig, g.n_lig);
    assert_eq!(back.node_feats, g.node_feats);
    assert_eq!(back.edge_feats, g.edge_feats);
    assert_eq!(back.coords, g.coords);
    assert_eq!(back.roles, g.roles);
    assert_eq!(back.rigid_part, g.rigid_part);
    assert_eq!(back.pocket_center, g.pocket_center);

    let json = graph::graph_to_json(&g);
    assert!(json.contains("\"n_lig\""));

    // Corrupted magic is rejected.
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(graph::graph_from_bytes(&bad).is_err());
}
