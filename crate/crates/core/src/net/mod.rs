//! The pose-prediction network: stacked feature-update and coordinate-update
//! blocks over the complete protein-ligand graph, with recycling and
//! ensemble inference.

mod checkpoint;
mod forward;
mod predict;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    forward_cycle, forward_cycle_values, initial_coords_var, CoordUpdateSet, Carry, CycleTrace,
    CycleValues, ParamVars,
};
pub use predict::{predict, EnsembleMember, PredictionRecord};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::diffcore::{Mat, Real};
use crate::error::{CoreError, Result};
use crate::graph::{EDGE_DIM, LIGAND_NODE_DIM, PROTEIN_NODE_DIM};

/// Architecture hyperparameters. `light()` is the configuration exercised by
/// the test suites; the full-size variant is constructible but not tuned
/// here.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub d_f: usize,
    pub d_e: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub n_cycles: usize,
    pub n_ens: usize,
    /// Number of radial basis functions encoding inter-atom distances.
    pub d_r: usize,
    /// Upper end of the RBF center grid, in scaled units (2.0 = 20 A).
    pub rbf_max: f64,
    pub leaky_slope: f64,
    pub max_nodes: usize,
}

impl NetConfig {
    pub fn light() -> Self {
        NetConfig {
            d_f: 160,
            d_e: 80,
            n_heads: 4,
            n_blocks: 6,
            n_cycles: 3,
            n_ens: 10,
            d_r: 16,
            rbf_max: 2.0,
            leaky_slope: 0.01,
            max_nodes: 200,
        }
    }

    /// Full-size configuration; constructible, not exercised by the tests.
    pub fn full() -> Self {
        NetConfig {
            d_f: 768,
            d_e: 384,
            n_heads: 8,
            n_cycles: 4,
            ..Self::light()
        }
    }

    /// Miniature configuration for finite-difference gradient suites.
    pub fn tiny() -> Self {
        NetConfig {
            d_f: 16,
            d_e: 8,
            n_heads: 2,
            n_blocks: 2,
            n_cycles: 2,
            n_ens: 1,
            d_r: 4,
            rbf_max: 2.0,
            leaky_slope: 0.01,
            max_nodes: 64,
        }
    }

    pub fn d_h(&self) -> usize {
        self.d_f / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_f == 0 || self.d_e == 0 || self.n_heads == 0 || self.n_blocks == 0 {
            return Err(CoreError::Net("config dimensions must be positive".into()));
        }
        if self.d_f % self.n_heads != 0 {
            return Err(CoreError::Net(format!(
                "d_f {} not divisible by n_heads {}",
                self.d_f, self.n_heads
            )));
        }
        if self.n_cycles == 0 || self.n_ens == 0 || self.d_r == 0 {
            return Err(CoreError::Net("cycle/ensemble/rbf counts must be positive".into()));
        }
        Ok(())
    }

    /// Evenly spaced RBF centers on `[0, rbf_max]`; the width equals the
    /// spacing.
    pub fn rbf_centers(&self) -> (Vec<f64>, f64) {
        let k = self.d_r;
        let spacing = if k > 1 { self.rbf_max / (k - 1) as f64 } else { self.rbf_max };
        ((0..k).map(|i| i as f64 * spacing).collect(), spacing)
    }
}

/// All learnable weights, stored as named matrices. The name layout is
/// stable and round-trips through the checkpoint format.
#[derive(Clone, Debug)]
pub struct NetworkParams<F: Real> {
    pub cfg: NetConfig,
    mats: Vec<Mat<F>>,
    names: Vec<String>,
    by_name: HashMap<String, usize>,
}

impl<F: Real> NetworkParams<F> {
    /// Glorot-uniform initialization, deterministic per seed.
    pub fn init(cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = NetworkParams {
            cfg: cfg.clone(),
            mats: Vec::new(),
            names: Vec::new(),
            by_name: HashMap::new(),
        };
        let (d_f, d_e, h) = (cfg.d_f, cfg.d_e, cfg.n_heads);
        let d_in_edge = d_e + cfg.d_r;

        let mut linear = |p: &mut Self, name: String, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Mat::from_fn(fan_in, fan_out, |_, _| F::from_f64(rng.gen_range(-limit..limit)));
            p.push(format!("{name}.w"), w);
            p.push(format!("{name}.b"), Mat::zeros(1, fan_out));
        };

        linear(&mut p, "input.prot".into(), PROTEIN_NODE_DIM, d_f, &mut rng);
        linear(&mut p, "input.lig".into(), LIGAND_NODE_DIM, d_f, &mut rng);
        linear(&mut p, "input.edge".into(), EDGE_DIM, d_e, &mut rng);

        for l in 0..cfg.n_blocks {
            let b = format!("block{l}");
            linear(&mut p, format!("{b}.q"), d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.k"), d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.v"), d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.e"), d_in_edge, d_f, &mut rng);
            linear(&mut p, format!("{b}.t"), d_in_edge, d_f, &mut rng);
            linear(&mut p, format!("{b}.fo"), 2 * d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.eo"), d_f, d_e, &mut rng);
            linear(&mut p, format!("{b}.g1"), 3 * d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.f1"), d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.f2"), d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.g2"), 3 * d_f, d_f, &mut rng);
            linear(&mut p, format!("{b}.ge1"), 3 * d_e, d_e, &mut rng);
            linear(&mut p, format!("{b}.ef1"), d_e, d_e, &mut rng);
            linear(&mut p, format!("{b}.ef2"), d_e, d_e, &mut rng);
            linear(&mut p, format!("{b}.ge2"), 3 * d_e, d_e, &mut rng);
            linear(&mut p, format!("{b}.x"), cfg.d_h(), 1, &mut rng);
            // The coordinate-head weight row is stored per head: [1, d_f]
            // packed, bias [1, h]. Replace what `linear` pushed.
            p.pop_last_two();
            let limit = (6.0 / (cfg.d_h() + 1) as f64).sqrt();
            let w = Mat::from_fn(1, d_f, |_, _| F::from_f64(rng.gen_range(-limit..limit)));
            p.push(format!("{b}.x.w"), w);
            p.push(format!("{b}.x.b"), Mat::zeros(1, h));
            let lambda = Mat::from_fn(h, 1, |_, _| F::from_f64(1.0 / h as f64));
            p.push(format!("{b}.lambda"), lambda);
        }

        linear(&mut p, "recycle.node".into(), 3 * d_f, d_f, &mut rng);
        linear(&mut p, "recycle.edge".into(), 3 * d_e, d_e, &mut rng);

        let d_r_pool = d_f + d_e;
        linear(&mut p, "head.aff.1".into(), d_r_pool, d_r_pool, &mut rng);
        linear(&mut p, "head.aff.2".into(), d_r_pool, 1, &mut rng);
        linear(&mut p, "head.bind.1".into(), d_r_pool, d_r_pool, &mut rng);
        linear(&mut p, "head.bind.2".into(), d_r_pool, 1, &mut rng);

        linear(&mut p, "mcm.atom_name.1".into(), d_f, d_f, &mut rng);
        linear(&mut p, "mcm.atom_name.2".into(), d_f, 37, &mut rng);
        linear(&mut p, "mcm.residue.1".into(), d_f, d_f, &mut rng);
        linear(&mut p, "mcm.residue.2".into(), d_f, 20, &mut rng);
        linear(&mut p, "mcm.element.1".into(), d_f, d_f, &mut rng);
        linear(&mut p, "mcm.element.2".into(), d_f, 10, &mut rng);
        linear(&mut p, "mcm.bond.1".into(), d_e, d_e, &mut rng);
        linear(&mut p, "mcm.bond.2".into(), d_e, 5, &mut rng);

        Ok(p)
    }

    fn push(&mut self, name: String, mat: Mat<F>) {
        self.by_name.insert(name.clone(), self.mats.len());
        self.names.push(name);
        self.mats.push(mat);
    }

    fn pop_last_two(&mut self) {
        for _ in 0..2 {
            let name = self.names.pop().expect("params present");
            self.by_name.remove(&name);
            self.mats.pop();
        }
    }

    pub fn from_named(cfg: NetConfig, entries: Vec<(String, Mat<F>)>) -> Self {
        let mut p = NetworkParams {
            cfg,
            mats: Vec::new(),
            names: Vec::new(),
            by_name: HashMap::new(),
        };
        for (name, mat) in entries {
            p.push(name, mat);
        }
        p
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| CoreError::Net(format!("unknown parameter {name:?}")))
    }

    pub fn get(&self, name: &str) -> Result<&Mat<F>> {
        Ok(&self.mats[self.index_of(name)?])
    }

    pub fn n_tensors(&self) -> usize {
        self.mats.len()
    }

    pub fn n_scalars(&self) -> usize {
        self.mats.iter().map(Mat::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat<F>)> {
        self.names.iter().map(String::as_str).zip(self.mats.iter())
    }

    pub fn mats(&self) -> &[Mat<F>] {
        &self.mats
    }

    pub fn mats_mut(&mut self) -> &mut [Mat<F>] {
        &mut self.mats
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cast<G: Real>(&self) -> NetworkParams<G> {
        NetworkParams {
            cfg: self.cfg.clone(),
            mats: self.mats.iter().map(Mat::cast).collect(),
            names: self.names.clone(),
            by_name: self.by_name.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn light_config_matches_published_sizes() {
        let cfg = NetConfig::light();
        assert_eq!(cfg.d_f, 160);
        assert_eq!(cfg.d_e, 80);
        assert_eq!(cfg.n_heads, 4);
        assert_eq!(cfg.n_blocks, 6);
        assert_eq!(cfg.n_cycles, 3);
        assert_eq!(cfg.n_ens, 10);
        assert_eq!(cfg.d_h(), 40);
        cfg.validate().unwrap();
    }

    #[test]
    fn head_split_must_divide_feature_dim() {
        let cfg = NetConfig {
            d_f: 15,
            ..NetConfig::tiny()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let cfg = NetConfig::tiny();
        let a: NetworkParams<f64> = NetworkParams::init(&cfg, 5).unwrap();
        let b: NetworkParams<f64> = NetworkParams::init(&cfg, 5).unwrap();
        for ((na, ma), (nb, mb)) in a.iter().zip(b.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ma, mb);
        }
        assert_eq!(a.get("block0.q.w").unwrap().shape(), (16, 16));
        assert_eq!(a.get("block0.fo.w").unwrap().shape(), (32, 16));
        assert_eq!(a.get("block1.lambda").unwrap().shape(), (2, 1));
        assert_eq!(a.get("block0.x.w").unwrap().shape(), (1, 16));
        assert_eq!(a.get("block0.x.b").unwrap().shape(), (1, 2));
        assert_eq!(a.get("head.aff.2.w").unwrap().shape(), (24, 1));
        assert_eq!(a.get("input.lig.w").unwrap().shape(), (45, 16));
    }

    #[test]
    fn rbf_grid_spans_the_range() {
        let cfg = NetConfig::light();
        let (centers, width) = cfg.rbf_centers();
        assert_eq!(centers.len(), 16);
        assert_eq!(centers[0], 0.0);
        assert!((centers[15] - 2.0).abs() < 1e-12);
        assert!((width - 2.0 / 15.0).abs() < 1e-12);
    }
}
