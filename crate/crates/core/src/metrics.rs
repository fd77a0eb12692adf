//! Evaluation metrics: symmetry-corrected RMSD, docking success rate,
//! enrichment factors and top-ranked screening success, and non-covalent
//! interaction reproducibility over supplied interaction lists.

use std::collections::HashMap;

use crate::diffcore::Mat;
use crate::error::{CoreError, Result};
use crate::symmetry::EquivalentIndexSet;

/// Minimum over the equivalent indexings of
/// `sqrt(mean_i ||pred_i - native_{perm(i)}||^2)`; poses are compared in the
/// pocket frame without realignment. Returns the value and the argmin
/// permutation index.
pub fn rmsd_with_perm(
    pred: &Mat<f64>,
    native: &Mat<f64>,
    eqset: &EquivalentIndexSet,
) -> (f64, usize) {
    assert_eq!(pred.shape(), native.shape(), "pose shapes must match");
    let n = pred.rows();
    let mut best = f64::INFINITY;
    let mut best_perm = 0;
    for (pi, perm) in eqset.perms.iter().enumerate() {
        let mut ss = 0.0;
        for i in 0..n {
            let p = pred.row(i);
            let q = native.row(perm[i]);
            ss += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
        }
        let value = (ss / n as f64).sqrt();
        if value < best {
            best = value;
            best_perm = pi;
        }
    }
    (best, best_perm)
}

pub fn rmsd(pred: &Mat<f64>, native: &Mat<f64>, eqset: &EquivalentIndexSet) -> f64 {
    rmsd_with_perm(pred, native, eqset).0
}

/// Fraction of predictions below the success threshold (2 A by convention).
pub fn success_rate(rmsds: &[f64], threshold: f64) -> Result<f64> {
    if rmsds.is_empty() {
        return Err(CoreError::Metrics("success rate of an empty list".into()));
    }
    let hits = rmsds.iter().filter(|&&r| r < threshold).count();
    Ok(hits as f64 / rmsds.len() as f64)
}

/// One scored candidate of a screening panel.
#[derive(Clone, Debug)]
pub struct ScreenCandidate {
    pub id: String,
    pub score: f64,
    pub true_binder: bool,
    /// The highest-affinity true binder of the target.
    pub best: bool,
}

/// A per-target ranked candidate list.
#[derive(Clone, Debug)]
pub struct ScreenPanel {
    pub target: String,
    pub candidates: Vec<ScreenCandidate>,
}

impl ScreenPanel {
    /// Descending score; ties broken by candidate id for determinism.
    pub fn ranked(&self) -> Vec<&ScreenCandidate> {
        let mut order: Vec<&ScreenCandidate> = self.candidates.iter().collect();
        order.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        });
        order
    }

    fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(CoreError::Metrics(format!("panel {} is empty", self.target)));
        }
        if !self.candidates.iter().any(|c| c.true_binder) {
            return Err(CoreError::Metrics(format!(
                "panel {} has no true binder",
                self.target
            )));
        }
        Ok(())
    }
}

fn top_count(m: usize, alpha: f64) -> usize {
    ((alpha * m as f64).ceil() as usize).clamp(1, m)
}

/// `EF_alpha` = (true binders in the top `ceil(alpha * M)`) divided by
/// (total true binders times alpha).
pub fn enrichment_factor(panel: &ScreenPanel, alpha: f64) -> Result<f64> {
    panel.validate()?;
    if !(0.0..=1.0).contains(&alpha) || alpha == 0.0 {
        return Err(CoreError::Metrics(format!("alpha {alpha} out of (0, 1]")));
    }
    let ranked = panel.ranked();
    let top = top_count(ranked.len(), alpha);
    let hits = ranked[..top].iter().filter(|c| c.true_binder).count();
    let total_true = panel.candidates.iter().filter(|c| c.true_binder).count();
    Ok(hits as f64 / (total_true as f64 * alpha))
}

/// Fraction of targets whose best ligand lands in the top `ceil(alpha * M)`.
pub fn screening_success(panels: &[ScreenPanel], alpha: f64) -> Result<f64> {
    if panels.is_empty() {
        return Err(CoreError::Metrics("no screening panels".into()));
    }
    let mut hits = 0usize;
    for panel in panels {
        panel.validate()?;
        if panel.candidates.iter().filter(|c| c.best).count() != 1 {
            return Err(CoreError::Metrics(format!(
                "panel {} must flag exactly one best ligand",
                panel.target
            )));
        }
        let ranked = panel.ranked();
        let top = top_count(ranked.len(), alpha);
        if ranked[..top].iter().any(|c| c.best) {
            hits += 1;
        }
    }
    Ok(hits as f64 / panels.len() as f64)
}

/// `(1 + |shared|) / (2 + |union|)` over interaction multisets; the union
/// counts every distinct interaction at its maximum multiplicity.
pub fn interaction_reproducibility<T: Eq + std::hash::Hash + Clone>(
    pred: &[T],
    native: &[T],
) -> f64 {
    let count = |items: &[T]| -> HashMap<T, usize> {
        let mut m = HashMap::new();
        for item in items {
            *m.entry(item.clone()).or_insert(0) += 1;
        }
        m
    };
    let p = count(pred);
    let n = count(native);
    let mut shared = 0usize;
    let mut union = 0usize;
    for (key, &pc) in &p {
        let nc = n.get(key).copied().unwrap_or(0);
        shared += pc.min(nc);
        union += pc.max(nc);
    }
    for (key, &nc) in &n {
        if !p.contains_key(key) {
            union += nc;
        }
    }
    (1.0 + shared as f64) / (2.0 + union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{enumerate_equivalent_indexes, DEFAULT_PERMUTATION_CAP};
    use crate::synth;

    fn pose_of(mol: &crate::chemio::LigandMol) -> Mat<f64> {
        Mat::from_fn(mol.n_atoms(), 3, |i, c| mol.atoms[i].coords[c])
    }

    #[test]
    fn identical_poses_have_zero_rmsd() {
        let mol = synth::phenol();
        let pose = pose_of(&mol);
        let eqset = EquivalentIndexSet::identity(mol.n_atoms());
        assert_eq!(rmsd(&pose, &pose, &eqset), 0.0);
    }

    #[test]
    fn uniform_translation_gives_its_length() {
        let mol = synth::benzene();
        let native = pose_of(&mol);
        let pred = Mat::from_fn(native.rows(), 3, |i, c| {
            native.get(i, c) + [3.0, 4.0, 0.0][c]
        });
        let eqset = EquivalentIndexSet::identity(native.rows());
        assert!((rmsd(&pred, &native, &eqset) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn phenol_ring_flip_is_corrected_by_symmetry() {
        let mol = synth::phenol();
        let native = pose_of(&mol);
        let eqset = enumerate_equivalent_indexes(&mol, DEFAULT_PERMUTATION_CAP);
        assert_eq!(eqset.len(), 2);
        let flip = eqset
            .perms
            .iter()
            .find(|p| **p != (0..mol.n_atoms()).collect::<Vec<_>>())
            .unwrap()
            .clone();
        let pred = Mat::from_fn(native.rows(), 3, |i, c| native.get(flip[i], c));
        let naive = rmsd(&pred, &native, &EquivalentIndexSet::identity(native.rows()));
        assert!(naive > 0.5, "flip must move atoms, got {naive}");
        let corrected = rmsd(&pred, &native, &eqset);
        assert!(corrected < 1e-12, "symmetry-corrected RMSD {corrected}");
    }

    #[test]
    fn rmsd_is_symmetric_under_group_closure() {
        let mol = synth::phenol();
        let eqset = enumerate_equivalent_indexes(&mol, DEFAULT_PERMUTATION_CAP);
        let native = pose_of(&mol);
        let pred = Mat::from_fn(native.rows(), 3, |i, c| {
            native.get(i, c) + 0.3 * (i as f64) + 0.1 * c as f64
        });
        let ab = rmsd(&pred, &native, &eqset);
        let ba = rmsd(&native, &pred, &eqset);
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn rmsd_invariant_under_joint_rigid_transforms() {
        use rand::prelude::*;
        let mol = synth::phenol();
        let eqset = enumerate_equivalent_indexes(&mol, DEFAULT_PERMUTATION_CAP);
        let native = pose_of(&mol);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pred = Mat::from_fn(native.rows(), 3, |i, c| {
            native.get(i, c) + rng.gen_range(-0.5..0.5)
        });
        let base = rmsd(&pred, &native, &eqset);
        for seed in 0..5 {
            let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rot = synth::random_rotation(&mut r2);
            let t = [
                r2.gen_range(-5.0..5.0),
                r2.gen_range(-5.0..5.0),
                r2.gen_range(-5.0..5.0),
            ];
            let apply = |m: &Mat<f64>| {
                Mat::from_fn(m.rows(), 3, |i, c| {
                    let v = [m.get(i, 0), m.get(i, 1), m.get(i, 2)];
                    synth::add(synth::rotate(v, &rot), t)[c]
                })
            };
            let got = rmsd(&apply(&pred), &apply(&native), &eqset);
            assert!((got - base).abs() < 1e-9, "transform changed RMSD: {got} vs {base}");
        }
    }

    #[test]
    fn success_rate_counts_below_threshold() {
        assert!((success_rate(&[1.0, 2.5, 0.5], 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(success_rate(&[], 2.0).is_err());
    }

    fn panel_with(scores: &[(bool, f64)]) -> ScreenPanel {
        let mut best_set = false;
        let mut candidates: Vec<ScreenCandidate> = scores
            .iter()
            .enumerate()
            .map(|(k, &(true_binder, score))| ScreenCandidate {
                id: format!("c{k:04}"),
                score,
                true_binder,
                best: false,
            })
            .collect();
        for c in candidates.iter_mut() {
            if c.true_binder && !best_set {
                c.best = true;
                best_set = true;
            }
        }
        ScreenPanel {
            target: "t".into(),
            candidates,
        }
    }

    #[test]
    fn enrichment_factor_matches_hand_count() {
        // 100 candidates, 10 true; 5 of the true ones in the top 10.
        let mut scores = Vec::new();
        for k in 0..100 {
            let true_binder = k < 5 || (50..55).contains(&k);
            scores.push((true_binder, 100.0 - k as f64));
        }
        let panel = panel_with(&scores);
        let ef = enrichment_factor(&panel, 0.10).unwrap();
        assert!((ef - 5.0).abs() < 1e-12);
    }

    #[test]
    fn enrichment_factor_saturates_at_inverse_alpha() {
        let mut scores = vec![(true, 10.0)];
        for k in 0..99 {
            scores.push((false, 1.0 - k as f64 * 0.001));
        }
        let panel = panel_with(&scores);
        let ef = enrichment_factor(&panel, 0.01).unwrap();
        assert!((ef - 100.0).abs() < 1e-12);
    }

    #[test]
    fn screening_success_checks_best_in_top() {
        // Best ligand ranked first of 100: counted at alpha = 0.01.
        let mut scores = vec![(true, 99.0)];
        for k in 0..99 {
            scores.push((false, 90.0 - k as f64));
        }
        let hit = panel_with(&scores);
        assert_eq!(screening_success(&[hit], 0.01).unwrap(), 1.0);

        // Best ligand ranked second of 100: not counted at alpha = 0.01.
        let mut scores = vec![(false, 99.0), (true, 98.0)];
        for k in 0..98 {
            scores.push((false, 90.0 - k as f64));
        }
        let miss = panel_with(&scores);
        assert_eq!(screening_success(&[miss], 0.01).unwrap(), 0.0);
    }

    #[test]
    fn rank_metrics_invariant_under_monotone_transforms() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let scores: Vec<(bool, f64)> = (0..60)
            .map(|_| (rng.gen_bool(0.2), rng.gen_range(-3.0..3.0)))
            .collect();
        let mut panel = panel_with(&scores);
        if !panel.candidates.iter().any(|c| c.true_binder) {
            panel.candidates[0].true_binder = true;
            panel.candidates[0].best = true;
        }
        let ef0 = enrichment_factor(&panel, 0.10).unwrap();
        let ss0 = screening_success(std::slice::from_ref(&panel), 0.10).unwrap();
        for _ in 0..5 {
            let a = rng.gen_range(0.5..3.0);
            let b = rng.gen_range(-2.0..2.0);
            let mut mapped = panel.clone();
            for c in mapped.candidates.iter_mut() {
                // strictly monotone: exp is increasing, a > 0
                c.score = a * (c.score).exp() + b;
            }
            assert_eq!(enrichment_factor(&mapped, 0.10).unwrap(), ef0);
            assert_eq!(screening_success(&[mapped], 0.10).unwrap(), ss0);
        }
    }

    #[test]
    fn interaction_reproducibility_formula() {
        let empty: [&str; 0] = [];
        assert_eq!(interaction_reproducibility(&empty, &empty), 0.5);
        let pred = ["hb:1", "hb:2", "pi:3", "x:9"];
        let native = ["hb:1", "hb:2", "pi:3"];
        let got = interaction_reproducibility(&pred, &native);
        assert!((got - 4.0 / 6.0).abs() < 1e-15);
        let same = ["a", "b", "c"];
        let k = same.len() as f64;
        assert!(
            (interaction_reproducibility(&same, &same) - (1.0 + k) / (2.0 + k)).abs() < 1e-15
        );
    }
}
