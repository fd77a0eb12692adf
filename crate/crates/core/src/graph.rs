//! Complete protein-ligand graph construction: chemical node/edge features,
//! stochastic ligand coordinate initialization and core/context sub-graph
//! sampling for recycling.
//!
//! All coordinates (and affinities elsewhere) are rescaled by 0.1 right at
//! graph construction; metrics and interfaces report unscaled Angstroms.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chemio::{vocab, LigandMol, Pocket};
use crate::diffcore::Mat;
use crate::error::{CoreError, Result};

pub const COORD_SCALE: f64 = 0.1;
pub const PROTEIN_NODE_DIM: usize = 79;
pub const LIGAND_NODE_DIM: usize = 45;
pub const EDGE_DIM: usize = 7;

/// Edge channel layout.
pub const EDGE_CONNECTION: usize = 0;
pub const EDGE_DISTANCE: usize = 1;
/// Bond-type one-hot occupies channels 2..7: none, single, double, triple,
/// aromatic.
pub const EDGE_BOND_TYPE: usize = 2;
pub const BOND_TYPE_CLASSES: usize = 5;

/// Distance sentinel between different rigid parts.
pub const CROSS_PART_DISTANCE: f64 = -1.0;

/// Default standard deviation of the stochastic ligand initialization, in
/// Angstroms.
pub const INIT_SIGMA_ANGSTROM: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Ligand,
    ProteinCore,
    ProteinContext,
}

/// Complete undirected protein-ligand graph. Ligand nodes come first; the
/// pair `(i, j)` of the edge tensor is stored at row `i * n + j`. Ligand
/// node features use the first 45 columns of the padded node matrix.
#[derive(Clone, Debug)]
pub struct ComplexGraph {
    pub n_lig: usize,
    pub node_feats: Mat<f64>,
    pub edge_feats: Mat<f64>,
    /// Scaled coordinates.
    pub coords: Mat<f64>,
    pub roles: Vec<NodeRole>,
    pub rigid_part: Vec<usize>,
    /// Mean of pocket CA positions (scaled); the center of the stochastic
    /// ligand initialization.
    pub pocket_center: [f64; 3],
}

impl ComplexGraph {
    pub fn n_total(&self) -> usize {
        self.roles.len()
    }

    pub fn core_indexes(&self) -> Vec<usize> {
        (0..self.n_total())
            .filter(|&i| self.roles[i] != NodeRole::ProteinContext)
            .collect()
    }

    pub fn context_indexes(&self) -> Vec<usize> {
        (0..self.n_total())
            .filter(|&i| self.roles[i] == NodeRole::ProteinContext)
            .collect()
    }

    /// Ligand rows of the coordinate matrix (scaled).
    pub fn ligand_coords(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.n_lig, 3);
        for i in 0..self.n_lig {
            out.row_mut(i).copy_from_slice(self.coords.row(i));
        }
        out
    }
}

fn one_hot(row: &mut [f64], offset: usize, index: usize, classes: usize) {
    let clamped = index.min(classes - 1);
    row[offset + clamped] = 1.0;
}

fn ligand_feature_row(mol: &LigandMol, i: usize, strict: bool) -> Result<Vec<f64>> {
    let atom = &mol.atoms[i];
    let mut row = vec![0.0; LIGAND_NODE_DIM];
    let elem_class = vocab::ligand_element_class(&atom.element);
    if strict && elem_class == vocab::LIGAND_ELEMENTS.len() {
        return Err(CoreError::Featurize(format!(
            "ligand element {:?} outside the 10-element vocabulary",
            atom.element
        )));
    }
    one_hot(&mut row, 0, elem_class, 10);
    one_hot(&mut row, 10, mol.degree(i), 6);
    one_hot(&mut row, 16, mol.implicit_valence(i) as usize, 5);
    one_hot(&mut row, 21, mol.hydrogen_count(i) as usize, 5);
    one_hot(&mut row, 26, mol.hybridization_class(i), 6);
    let charge_class = match atom.charge {
        -2 => 0,
        -1 => 1,
        0 => 2,
        1 => 3,
        2 => 4,
        _ => 5,
    };
    one_hot(&mut row, 32, charge_class, 6);
    for size in 3..=8u8 {
        if atom.in_ring_of_size(size) {
            row[38 + (size as usize - 3)] = 1.0;
        }
    }
    row[44] = if atom.aromatic { 1.0 } else { 0.0 };
    Ok(row)
}

struct ProteinSite {
    residue: usize,
    res_name: String,
    atom_name: String,
    element: String,
    coords: [f64; 3],
}

fn protein_feature_row(site: &ProteinSite, degree: usize, strict: bool) -> Result<Vec<f64>> {
    let mut row = vec![0.0; PROTEIN_NODE_DIM];
    let elem = vocab::protein_element_index(&site.element).ok_or_else(|| {
        CoreError::Featurize(format!(
            "protein element {:?} outside the 4-element vocabulary",
            site.element
        ))
    })?;
    one_hot(&mut row, 0, elem, 4);
    one_hot(&mut row, 4, degree, 5);
    let implicit_h = vocab::default_valence(&site.element)
        .map(|v| (v as i64 - degree as i64).max(0) as usize)
        .unwrap_or(0);
    one_hot(&mut row, 9, implicit_h, 5);
    one_hot(&mut row, 14, implicit_h, 5);
    let hyb = match vocab::protein_hybridization(&site.res_name, &site.atom_name) {
        vocab::ProteinHybridization::Sp => 0,
        vocab::ProteinHybridization::Sp2 => 1,
        vocab::ProteinHybridization::Sp3 => 2,
    };
    one_hot(&mut row, 19, hyb, 3);
    let res = vocab::residue_index(&site.res_name).ok_or_else(|| {
        CoreError::Featurize(format!("non-canonical residue {:?}", site.res_name))
    })?;
    one_hot(&mut row, 22, res, 20);
    match vocab::atom_name_index(&site.atom_name) {
        Some(name) => one_hot(&mut row, 42, name, 37),
        None if strict => {
            return Err(CoreError::Featurize(format!(
                "protein atom name {:?} outside the 37-name vocabulary",
                site.atom_name
            )));
        }
        None => {}
    }
    Ok(row)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Builds the complete graph with padded node features from a pocket and a
/// parsed ligand; strict vocabularies.
pub fn featurize(pocket: &Pocket, ligand: &LigandMol) -> Result<ComplexGraph> {
    featurize_with(pocket, ligand, true)
}

pub fn featurize_with(pocket: &Pocket, ligand: &LigandMol, strict: bool) -> Result<ComplexGraph> {
    if pocket.residues.is_empty() {
        return Err(CoreError::Featurize("empty pocket".into()));
    }
    let n_lig = ligand.n_atoms();

    // Protein sites in residue order.
    let mut sites: Vec<ProteinSite> = Vec::new();
    for (ri, res) in pocket.residues.iter().enumerate() {
        for atom in &res.atoms {
            sites.push(ProteinSite {
                residue: ri,
                res_name: res.name.clone(),
                atom_name: atom.name.clone(),
                element: atom.element.clone(),
                coords: atom.coords,
            });
        }
    }
    let n_prot = sites.len();
    let n = n_lig + n_prot;

    // Covalent bonds between protein heavy atoms: distance rule within a
    // residue plus the peptide C-N link between sequence-adjacent residues.
    let mut protein_bonds: Vec<(usize, usize)> = Vec::new();
    for a in 0..n_prot {
        for b in (a + 1)..n_prot {
            let (sa, sb) = (&sites[a], &sites[b]);
            let d = dist(&sa.coords, &sb.coords);
            let bonded = if sa.residue == sb.residue {
                d <= vocab::covalent_radius(&sa.element) + vocab::covalent_radius(&sb.element) + 0.4
            } else {
                let (ra, rb) = (&pocket.residues[sa.residue], &pocket.residues[sb.residue]);
                let peptide = (sa.atom_name == "C" && sb.atom_name == "N" && rb.seq == ra.seq + 1)
                    || (sa.atom_name == "N" && sb.atom_name == "C" && ra.seq == rb.seq + 1);
                peptide && d <= 2.0
            };
            if bonded {
                protein_bonds.push((a, b));
            }
        }
    }
    let mut protein_degree = vec![0usize; n_prot];
    for &(a, b) in &protein_bonds {
        protein_degree[a] += 1;
        protein_degree[b] += 1;
    }

    // Node features, padded to the protein width.
    let mut node_feats = Mat::zeros(n, PROTEIN_NODE_DIM);
    for i in 0..n_lig {
        let row = ligand_feature_row(ligand, i, strict)?;
        node_feats.row_mut(i)[..LIGAND_NODE_DIM].copy_from_slice(&row);
    }
    for (k, site) in sites.iter().enumerate() {
        let row = protein_feature_row(site, protein_degree[k], strict)?;
        node_feats.row_mut(n_lig + k).copy_from_slice(&row);
    }

    // Coordinates, scaled.
    let mut coords = Mat::zeros(n, 3);
    for i in 0..n_lig {
        for c in 0..3 {
            coords.set(i, c, ligand.atoms[i].coords[c] * COORD_SCALE);
        }
    }
    for (k, site) in sites.iter().enumerate() {
        for c in 0..3 {
            coords.set(n_lig + k, c, site.coords[c] * COORD_SCALE);
        }
    }

    // Roles and rigid parts: ligand parts from rotatable-bond cutting, then
    // one part per residue (peptide links stay in separate parts).
    let mut roles = Vec::with_capacity(n);
    let lig_parts = ligand.rigid_parts();
    let n_lig_parts = lig_parts.iter().copied().max().map_or(0, |m| m + 1);
    let mut rigid_part = Vec::with_capacity(n);
    for i in 0..n_lig {
        roles.push(NodeRole::Ligand);
        rigid_part.push(lig_parts[i]);
    }
    for site in &sites {
        roles.push(if site.atom_name == "CA" || site.atom_name == "CB" {
            NodeRole::ProteinCore
        } else {
            NodeRole::ProteinContext
        });
        rigid_part.push(n_lig_parts + site.residue);
    }

    // Edge tensor: covalent connection, rigid-part-masked distance, bond
    // type. Protein covalent bonds carry the single-bond class (bond orders
    // are not perceived from PDB input).
    let mut lig_bond = std::collections::HashMap::new();
    for b in &ligand.bonds {
        lig_bond.insert((b.i, b.j), b.order);
        lig_bond.insert((b.j, b.i), b.order);
    }
    let mut prot_bond = std::collections::HashSet::new();
    for &(a, b) in &protein_bonds {
        prot_bond.insert((a, b));
        prot_bond.insert((b, a));
    }

    let mut edge_feats = Mat::zeros(n * n, EDGE_DIM);
    for i in 0..n {
        for j in 0..n {
            let mut bond_class = 0usize; // none
            let mut connected = false;
            if i < n_lig && j < n_lig {
                if let Some(order) = lig_bond.get(&(i, j)) {
                    connected = true;
                    bond_class = order.to_v2000() as usize;
                }
            } else if i >= n_lig && j >= n_lig && prot_bond.contains(&(i - n_lig, j - n_lig)) {
                connected = true;
                bond_class = 1; // single
            }
            let distance = if rigid_part[i] == rigid_part[j] {
                dist(coords.row(i), coords.row(j))
            } else {
                CROSS_PART_DISTANCE
            };
            let row = edge_feats.row_mut(i * n + j);
            row[EDGE_CONNECTION] = if connected { 1.0 } else { 0.0 };
            row[EDGE_BOND_TYPE + bond_class] = 1.0;
            row[EDGE_DISTANCE] = distance;
        }
    }

    // Pocket center: mean CA position (scaled).
    let mut center = [0.0; 3];
    let mut n_ca = 0.0;
    for site in &sites {
        if site.atom_name == "CA" {
            for (c, item) in center.iter_mut().enumerate() {
                *item += site.coords[c] * COORD_SCALE;
            }
            n_ca += 1.0;
        }
    }
    if n_ca == 0.0 {
        return Err(CoreError::Featurize("pocket has no CA atoms".into()));
    }
    for c in center.iter_mut() {
        *c /= n_ca;
    }

    Ok(ComplexGraph {
        n_lig,
        node_feats,
        edge_feats,
        coords,
        roles,
        rigid_part,
        pocket_center: center,
    })
}

/// Replaces ligand coordinates with iid Gaussian samples centered on the
/// pocket, leaving protein coordinates untouched. Deterministic per seed.
pub fn init_ligand_coords(graph: &ComplexGraph, seed: u64) -> ComplexGraph {
    init_ligand_coords_with_sigma(graph, seed, INIT_SIGMA_ANGSTROM)
}

pub fn init_ligand_coords_with_sigma(
    graph: &ComplexGraph,
    seed: u64,
    sigma_angstrom: f64,
) -> ComplexGraph {
    let mut out = graph.clone();
    let sigma = sigma_angstrom * COORD_SCALE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..graph.n_lig {
        for c in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            out.coords.set(i, c, graph.pocket_center[c] + sigma * z);
        }
    }
    out
}

/// Core atoms plus a random context sample, restricted to at most
/// `max_nodes` nodes.
#[derive(Clone, Debug)]
pub struct SubGraph {
    /// Indexes into the parent graph, ascending (ligand first).
    pub parent_indexes: Vec<usize>,
    pub graph: ComplexGraph,
}

impl SubGraph {
    pub fn n_total(&self) -> usize {
        self.graph.n_total()
    }
}

/// Samples a sub-graph containing every core atom (ligand plus protein
/// CA/CB) and uniformly chosen context atoms filling up to `max_nodes`.
pub fn sample_subgraph(graph: &ComplexGraph, max_nodes: usize, seed: u64) -> Result<SubGraph> {
    let core = graph.core_indexes();
    if core.len() > max_nodes {
        return Err(CoreError::Graph(format!(
            "core atoms ({}) exceed max_nodes ({max_nodes})",
            core.len()
        )));
    }
    let context = graph.context_indexes();
    let room = max_nodes - core.len();
    let chosen_context: Vec<usize> = if context.len() <= room {
        context
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = context;
        let mut picked = Vec::with_capacity(room);
        for _ in 0..room {
            let k = rng.gen_range(0..pool.len());
            picked.push(pool.swap_remove(k));
        }
        picked
    };

    let mut parent_indexes: Vec<usize> = core.into_iter().chain(chosen_context).collect();
    parent_indexes.sort_unstable();
    Ok(SubGraph {
        graph: restrict(graph, &parent_indexes),
        parent_indexes,
    })
}

fn restrict(graph: &ComplexGraph, keep: &[usize]) -> ComplexGraph {
    let m = keep.len();
    let n = graph.n_total();
    let n_lig = keep.iter().filter(|&&i| i < graph.n_lig).count();
    let mut node_feats = Mat::zeros(m, PROTEIN_NODE_DIM);
    let mut coords = Mat::zeros(m, 3);
    let mut roles = Vec::with_capacity(m);
    let mut rigid_part = Vec::with_capacity(m);
    for (k, &i) in keep.iter().enumerate() {
        node_feats.row_mut(k).copy_from_slice(graph.node_feats.row(i));
        coords.row_mut(k).copy_from_slice(graph.coords.row(i));
        roles.push(graph.roles[i]);
        rigid_part.push(graph.rigid_part[i]);
    }
    let mut edge_feats = Mat::zeros(m * m, EDGE_DIM);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            edge_feats
                .row_mut(a * m + b)
                .copy_from_slice(graph.edge_feats.row(i * n + j));
        }
    }
    ComplexGraph {
        n_lig,
        node_feats,
        edge_feats,
        coords,
        roles,
        rigid_part,
        pocket_center: graph.pocket_center,
    }
}

// ---- serialization ----

const MAGIC: &[u8; 8] = b"LPGRAPH\x01";
const FORMAT_VERSION: u32 = 1;

/// Little-endian binary container: magic, version, sizes, pocket center,
/// then row-major f64 tensors (nodes, edges, coordinates), roles and rigid
/// part ids.
pub fn graph_to_bytes(graph: &ComplexGraph) -> Vec<u8> {
    let n = graph.n_total() as u32;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&(graph.n_lig as u32).to_le_bytes());
    out.extend_from_slice(&(PROTEIN_NODE_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(EDGE_DIM as u32).to_le_bytes());
    for c in graph.pocket_center {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for m in [&graph.node_feats, &graph.edge_feats, &graph.coords] {
        for &v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for role in &graph.roles {
        out.push(match role {
            NodeRole::Ligand => 0,
            NodeRole::ProteinCore => 1,
            NodeRole::ProteinContext => 2,
        });
    }
    for &p in &graph.rigid_part {
        out.extend_from_slice(&(p as u32).to_le_bytes());
    }
    out
}

pub fn graph_from_bytes(bytes: &[u8]) -> Result<ComplexGraph> {
    struct Cursor<'a> {
        data: &'a [u8],
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            if self.pos + n > self.data.len() {
                return Err(CoreError::Graph("truncated graph file".into()));
            }
            let s = &self.data[self.pos..self.pos + n];
            self.pos += n;
            Ok(s)
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
        }
        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
        }
    }

    let mut cur = Cursor { data: bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(CoreError::Graph("bad magic: not a graph container".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(CoreError::Graph(format!("unsupported graph version {version}")));
    }
    let n = cur.u32()? as usize;
    let n_lig = cur.u32()? as usize;
    let d_node = cur.u32()? as usize;
    let d_edge = cur.u32()? as usize;
    if d_node != PROTEIN_NODE_DIM || d_edge != EDGE_DIM || n_lig > n {
        return Err(CoreError::Graph("inconsistent graph dimensions".into()));
    }
    let mut pocket_center = [0.0; 3];
    for c in pocket_center.iter_mut() {
        *c = cur.f64()?;
    }
    let mut read_mat = |cur: &mut Cursor, rows: usize, cols: usize| -> Result<Mat<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(cur.f64()?);
        }
        Ok(Mat::from_vec(rows, cols, data))
    };
    let node_feats = read_mat(&mut cur, n, d_node)?;
    let edge_feats = read_mat(&mut cur, n * n, d_edge)?;
    let coords = read_mat(&mut cur, n, 3)?;
    let mut roles = Vec::with_capacity(n);
    for &b in cur.take(n)? {
        roles.push(match b {
            0 => NodeRole::Ligand,
            1 => NodeRole::ProteinCore,
            2 => NodeRole::ProteinContext,
            other => {
                return Err(CoreError::Graph(format!("bad role byte {other}")));
            }
        });
    }
    let mut rigid_part = Vec::with_capacity(n);
    for _ in 0..n {
        rigid_part.push(cur.u32()? as usize);
    }
    Ok(ComplexGraph {
        n_lig,
        node_feats,
        edge_feats,
        coords,
        roles,
        rigid_part,
        pocket_center,
    })
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n_lig: usize,
    pocket_center: [f64; 3],
    roles: Vec<NodeRole>,
    rigid_part: Vec<usize>,
    node_feats: Vec<Vec<f64>>,
    edge_feats: Vec<Vec<f64>>,
    coords: Vec<Vec<f64>>,
}

/// Human-inspectable JSON debug form.
pub fn graph_to_json(graph: &ComplexGraph) -> String {
    let as_rows = |m: &Mat<f64>| -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    };
    serde_json::to_string_pretty(&GraphJson {
        n_lig: graph.n_lig,
        pocket_center: graph.pocket_center,
        roles: graph.roles.clone(),
        rigid_part: graph.rigid_part.clone(),
        node_feats: as_rows(&graph.node_feats),
        edge_feats: as_rows(&graph.edge_feats),
        coords: as_rows(&graph.coords),
    })
    .expect("graph JSON serialization cannot fail")
}
