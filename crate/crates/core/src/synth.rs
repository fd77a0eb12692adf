//! Deterministic synthetic complexes: small pockets with hand-built residue
//! geometry and toy ligands posed inside them. Used by the bundled training
//! set, the test suites and the CLI walkthrough.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::chemio::{
    BondOrder, LigandAtom, LigandMol, ProteinAtom, ProteinChain, Residue,
};

/// A synthetic labeled complex: protein chain, ligand in its native pose and
/// an affinity on the negative-log scale.
#[derive(Clone, Debug)]
pub struct SynthComplex {
    pub id: String,
    pub protein: ProteinChain,
    pub ligand: LigandMol,
    pub affinity: f64,
}

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(v: Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn unit(v: Vec3) -> Vec3 {
    scale(v, 1.0 / norm(v))
}

/// `base + len * unit(dir)`.
fn extend(base: Vec3, dir: Vec3, len: f64) -> Vec3 {
    add(base, scale(unit(dir), len))
}

pub fn rotate(v: Vec3, r: &[[f64; 3]; 3]) -> Vec3 {
    [
        r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
        r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
        r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
    ]
}

/// Uniform random rotation from a quaternion.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = {
        let mut q = [0.0; 4];
        loop {
            for x in q.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let n = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if n > 1e-3 && n <= 1.0 {
                for x in q.iter_mut() {
                    *x /= n;
                }
                break;
            }
        }
        q
    };
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

// ---- residue templates ----

fn backbone() -> Vec<(&'static str, &'static str, Vec3)> {
    let n = [0.0, 0.0, 0.0];
    let ca = [1.46, 0.0, 0.0];
    let c = [2.00, 1.40, 0.0];
    let o = extend(c, [-0.45, 0.85, 0.25], 1.23);
    vec![("N", "N", n), ("CA", "C", ca), ("C", "C", c), ("O", "O", o)]
}

fn with_cb(mut atoms: Vec<(&'static str, &'static str, Vec3)>) -> Vec<(&'static str, &'static str, Vec3)> {
    let ca = atoms[1].2;
    atoms.push(("CB", "C", extend(ca, [0.4, -0.9, 0.7], 1.53)));
    atoms
}

fn cb_of(atoms: &[(&str, &str, Vec3)]) -> Vec3 {
    atoms.iter().find(|a| a.0 == "CB").expect("CB present").2
}

/// Hand-built heavy-atom geometry for a small set of residues; bond lengths
/// follow standard values so the distance-based bond detection recovers the
/// intended topology.
fn residue_template(name: &str) -> Vec<(&'static str, &'static str, Vec3)> {
    match name {
        "GLY" => backbone(),
        "ALA" => with_cb(backbone()),
        "SER" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            a.push(("OG", "O", extend(cb, [0.5, -0.9, 0.2], 1.42)));
            a
        }
        "THR" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            a.push(("OG1", "O", extend(cb, [0.9, -0.5, 0.3], 1.42)));
            a.push(("CG2", "C", extend(cb, [-0.4, -0.9, 1.0], 1.53)));
            a
        }
        "VAL" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            a.push(("CG1", "C", extend(cb, [0.9, -0.5, 0.3], 1.53)));
            a.push(("CG2", "C", extend(cb, [-0.4, -0.9, 1.0], 1.53)));
            a
        }
        "LEU" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            let cg = extend(cb, [0.5, -1.0, 0.6], 1.53);
            a.push(("CG", "C", cg));
            a.push(("CD1", "C", extend(cg, [1.0, -0.3, 0.0], 1.53)));
            a.push(("CD2", "C", extend(cg, [-0.2, -0.9, 1.1], 1.53)));
            a
        }
        "ASP" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            let cg = extend(cb, [0.5, -1.0, 0.6], 1.52);
            a.push(("CG", "C", cg));
            a.push(("OD1", "O", extend(cg, [1.0, -0.2, -0.4], 1.25)));
            a.push(("OD2", "O", extend(cg, [-0.3, -1.0, 1.2], 1.25)));
            a
        }
        "ASN" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            let cg = extend(cb, [0.5, -1.0, 0.6], 1.52);
            a.push(("CG", "C", cg));
            a.push(("OD1", "O", extend(cg, [1.0, -0.2, -0.4], 1.23)));
            a.push(("ND2", "N", extend(cg, [-0.3, -1.0, 1.2], 1.33)));
            a
        }
        "LYS" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            let cg = extend(cb, [0.5, -1.0, 0.6], 1.52);
            let cd = extend(cg, [1.0, -0.4, -0.2], 1.52);
            let ce = extend(cd, [0.3, -1.0, 0.7], 1.52);
            let nz = extend(ce, [1.0, -0.3, -0.2], 1.47);
            a.push(("CG", "C", cg));
            a.push(("CD", "C", cd));
            a.push(("CE", "C", ce));
            a.push(("NZ", "N", nz));
            a
        }
        "PHE" => {
            let mut a = with_cb(backbone());
            let cb = cb_of(&a);
            let cg = extend(cb, [0.5, -1.0, 0.6], 1.50);
            // Regular hexagon in the plane spanned by u (outward) and v.
            let u = unit([0.5, -1.0, 0.6]);
            let w = unit([1.0, 0.5, 0.0]);
            let v = unit([
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ]);
            let center = add(cg, scale(u, 1.39));
            let names = ["CD1", "CE1", "CZ", "CE2", "CD2"];
            a.push(("CG", "C", cg));
            for (k, nm) in names.iter().enumerate() {
                let theta = std::f64::consts::PI * (1.0 + (k as f64 + 1.0) / 3.0);
                let p = add(
                    center,
                    add(scale(u, 1.39 * theta.cos()), scale(v, 1.39 * theta.sin())),
                );
                a.push((nm, "C", p));
            }
            a
        }
        other => panic!("no template for residue {other}"),
    }
}

pub const FULL_RESIDUE_PALETTE: [&str; 10] =
    ["GLY", "ALA", "SER", "THR", "VAL", "ASP", "ASN", "LEU", "LYS", "PHE"];

/// Residues of at most eight heavy atoms, for tightly budgeted pockets.
pub const COMPACT_RESIDUE_PALETTE: [&str; 8] =
    ["GLY", "ALA", "SER", "THR", "VAL", "ASP", "ASN", "LEU"];

/// Builds a pocket of `n_res` residues whose CA atoms sit on a shell of
/// radius `radius` around the origin, each residue randomly oriented.
pub fn toy_pocket(seed: u64, n_res: usize, radius: f64) -> ProteinChain {
    toy_pocket_with(seed, n_res, radius, &FULL_RESIDUE_PALETTE)
}

pub fn toy_pocket_with(seed: u64, n_res: usize, radius: f64, names: &[&str]) -> ProteinChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x706f636b);
    let mut residues = Vec::with_capacity(n_res);
    for k in 0..n_res {
        let name = names[rng.gen_range(0..names.len())];
        let template = residue_template(name);
        let rot = random_rotation(&mut rng);
        // Spread directions over the sphere deterministically, with jitter.
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let t = (k as f64 + 0.5) / n_res as f64;
        let phi = golden * k as f64 + rng.gen_range(-0.2..0.2);
        let cos_theta = 1.0 - 2.0 * t;
        let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
        let dir = [sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta];
        let r = radius + rng.gen_range(-0.8..0.8);
        let ca_target = scale(dir, r);
        let ca_local = template[1].2;
        let atoms = template
            .iter()
            .map(|(nm, el, pos)| {
                let rel = [
                    pos[0] - ca_local[0],
                    pos[1] - ca_local[1],
                    pos[2] - ca_local[2],
                ];
                ProteinAtom {
                    name: (*nm).into(),
                    element: (*el).into(),
                    coords: add(ca_target, rotate(rel, &rot)),
                }
            })
            .collect();
        residues.push(Residue {
            name: name.into(),
            // Spaced sequence ids: no peptide links between pocket members.
            seq: (k as i32 + 1) * 2,
            insertion: ' ',
            atoms,
        });
    }
    ProteinChain {
        chain_id: 'A',
        residues,
    }
}

// ---- ligand builders ----

fn lig_atom(element: &str, charge: i32, coords: Vec3) -> LigandAtom {
    LigandAtom {
        element: element.into(),
        charge,
        coords,
        aromatic: false,
        explicit_h: 0,
        ring_bits: 0,
    }
}

/// Zigzag chain with standard bond lengths.
fn chain_mol(name: &str, spec: &[(&str, i32)], orders: &[BondOrder]) -> LigandMol {
    assert_eq!(spec.len(), orders.len() + 1);
    let mut atoms = Vec::new();
    let mut pos = [0.0, 0.0, 0.0];
    for (k, &(el, chg)) in spec.iter().enumerate() {
        if k > 0 {
            let dir = if k % 2 == 1 { [1.0, 0.6, 0.1] } else { [1.0, -0.6, -0.1] };
            let len = bond_length(spec[k - 1].0, el, orders[k - 1]);
            pos = extend(pos, dir, len);
        }
        atoms.push(lig_atom(el, chg, pos));
    }
    let bonds = orders
        .iter()
        .enumerate()
        .map(|(k, &o)| (k, k + 1, o))
        .collect();
    LigandMol::build(name.into(), atoms, bonds).expect("valid chain molecule")
}

fn bond_length(a: &str, b: &str, order: BondOrder) -> f64 {
    let single = match (a, b) {
        ("C", "C") | ("C", "c") => 1.52,
        ("C", "O") | ("O", "C") => 1.43,
        ("C", "N") | ("N", "C") => 1.47,
        ("C", "S") | ("S", "C") => 1.81,
        ("C", "F") | ("F", "C") => 1.35,
        ("C", "Cl") | ("Cl", "C") => 1.77,
        ("C", "Br") | ("Br", "C") => 1.94,
        _ => 1.5,
    };
    match order {
        BondOrder::Single => single,
        BondOrder::Double => single - 0.2,
        BondOrder::Triple => single - 0.32,
        BondOrder::Aromatic => 1.39,
    }
}

fn regular_ring(n: usize, side: f64) -> Vec<Vec3> {
    let radius = side / (2.0 * (std::f64::consts::PI / n as f64).sin());
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [radius * t.cos(), radius * t.sin(), 0.0]
        })
        .collect()
}

/// Bare aromatic six-ring.
pub fn benzene() -> LigandMol {
    let atoms = regular_ring(6, 1.39)
        .into_iter()
        .map(|p| lig_atom("C", 0, p))
        .collect();
    let bonds = (0..6).map(|i| (i, (i + 1) % 6, BondOrder::Aromatic)).collect();
    LigandMol::build("benzene".into(), atoms, bonds).expect("benzene")
}

/// Aromatic six-ring with a hydroxyl substituent (two equivalent indexings).
pub fn phenol() -> LigandMol {
    let ring = regular_ring(6, 1.39);
    let mut atoms: Vec<LigandAtom> = ring.iter().map(|&p| lig_atom("C", 0, p)).collect();
    let o = extend(ring[0], ring[0], 1.36);
    atoms.push(lig_atom("O", 0, o));
    let mut bonds: Vec<(usize, usize, BondOrder)> =
        (0..6).map(|i| (i, (i + 1) % 6, BondOrder::Aromatic)).collect();
    bonds.push((0, 6, BondOrder::Single));
    LigandMol::build("phenol".into(), atoms, bonds).expect("phenol")
}

/// The eight toy ligands used by the bundled training set.
pub fn toy_ligand(kind: usize) -> LigandMol {
    match kind % 8 {
        0 => chain_mol(
            "diethyl-ether",
            &[("C", 0), ("C", 0), ("O", 0), ("C", 0), ("C", 0)],
            &[BondOrder::Single; 4],
        ),
        1 => benzene(),
        2 => phenol(),
        3 => {
            // Protonated trimethylamine: three equivalent methyls.
            let n = lig_atom("N", 1, [0.0, 0.0, 0.0]);
            let dirs = [[1.0, 0.2, 0.0], [-0.5, 0.9, 0.0], [-0.4, -0.8, 0.5]];
            let mut atoms = vec![n];
            for d in dirs {
                atoms.push(lig_atom("C", 0, extend([0.0; 3], d, 1.49)));
            }
            LigandMol::build(
                "trimethylammonium".into(),
                atoms,
                (1..4).map(|k| (0, k, BondOrder::Single)).collect(),
            )
            .expect("amine")
        }
        4 => chain_mol(
            "n-methylacetamide",
            &[("C", 0), ("C", 0), ("O", 0), ("N", 0), ("C", 0)],
            &[
                BondOrder::Single,
                BondOrder::Double,
                BondOrder::Single,
                BondOrder::Single,
            ],
        )
        .reconnect_amide(),
        5 => {
            // Cyclopentane with a hydroxymethyl tail: two rigid parts.
            let ring = regular_ring(5, 1.53);
            let mut atoms: Vec<LigandAtom> = ring.iter().map(|&p| lig_atom("C", 0, p)).collect();
            let c_tail = extend(ring[0], ring[0], 1.52);
            let o_tail = extend(c_tail, [1.0, 0.5, 0.3], 1.43);
            atoms.push(lig_atom("C", 0, c_tail));
            atoms.push(lig_atom("O", 0, o_tail));
            let mut bonds: Vec<(usize, usize, BondOrder)> =
                (0..5).map(|i| (i, (i + 1) % 5, BondOrder::Single)).collect();
            bonds.push((0, 5, BondOrder::Single));
            bonds.push((5, 6, BondOrder::Single));
            LigandMol::build("cyclopentyl-methanol".into(), atoms, bonds).expect("ring-tail")
        }
        6 => {
            // Halogenated propane: F and Cl on the middle carbon.
            let c1 = lig_atom("C", 0, [0.0, 0.0, 0.0]);
            let c2 = lig_atom("C", 0, [1.52, 0.3, 0.0]);
            let c3 = lig_atom("C", 0, extend([1.52, 0.3, 0.0], [1.0, -0.7, 0.2], 1.52));
            let f = lig_atom("F", 0, extend([1.52, 0.3, 0.0], [0.0, 1.0, 0.6], 1.35));
            let cl = lig_atom("Cl", 0, extend([1.52, 0.3, 0.0], [-0.2, 0.4, -1.0], 1.77));
            LigandMol::build(
                "halopropane".into(),
                vec![c1, c2, c3, f, cl],
                vec![
                    (0, 1, BondOrder::Single),
                    (1, 2, BondOrder::Single),
                    (1, 3, BondOrder::Single),
                    (1, 4, BondOrder::Single),
                ],
            )
            .expect("halopropane")
        }
        _ => {
            // Methylthio-acetate with a carboxylate charge.
            let c1 = lig_atom("C", 0, [0.0, 0.0, 0.0]);
            let s = lig_atom("S", 0, extend([0.0; 3], [1.0, 0.4, 0.0], 1.81));
            let c2 = lig_atom("C", 0, extend([1.67, 0.67, 0.0], [1.0, -0.5, 0.2], 1.81));
            let c3 = lig_atom("C", 0, extend(c2_pos(), [1.0, 0.6, -0.1], 1.52));
            let o1 = lig_atom("O", 0, extend(c3_pos(), [0.8, 0.8, 0.4], 1.25));
            let o2 = lig_atom("O", -1, extend(c3_pos(), [0.6, -0.9, -0.4], 1.25));
            fn c2_pos() -> Vec3 {
                extend([1.67, 0.67, 0.0], [1.0, -0.5, 0.2], 1.81)
            }
            fn c3_pos() -> Vec3 {
                extend(c2_pos(), [1.0, 0.6, -0.1], 1.52)
            }
            LigandMol::build(
                "methylthio-acetate".into(),
                vec![c1, s, c2, c3, o1, o2],
                vec![
                    (0, 1, BondOrder::Single),
                    (1, 2, BondOrder::Single),
                    (2, 3, BondOrder::Single),
                    (3, 4, BondOrder::Double),
                    (3, 5, BondOrder::Single),
                ],
            )
            .expect("thioacetate")
        }
    }
}

trait AmideFix {
    fn reconnect_amide(self) -> LigandMol;
}

impl AmideFix for LigandMol {
    /// The amide chain builder strings atoms linearly; rewire C(=O)-N so the
    /// carbonyl oxygen hangs off the carbon instead of bridging.
    fn reconnect_amide(self) -> LigandMol {
        let mut atoms = self.atoms.clone();
        // Place O off to the side of its carbon.
        atoms[2].coords = extend(atoms[1].coords, [0.1, 1.0, 0.4], 1.23);
        let bonds = vec![
            (0, 1, BondOrder::Single),
            (1, 2, BondOrder::Double),
            (1, 3, BondOrder::Single),
            (3, 4, BondOrder::Single),
        ];
        LigandMol::build(self.name, atoms, bonds).expect("amide")
    }
}

/// Translates and rotates a ligand so its centroid lands at `target`.
pub fn pose_ligand(mol: &LigandMol, target: Vec3, rng: &mut ChaCha8Rng) -> LigandMol {
    let rot = random_rotation(rng);
    let n = mol.n_atoms() as f64;
    let mut centroid = [0.0; 3];
    for a in &mol.atoms {
        centroid = add(centroid, a.coords);
    }
    centroid = scale(centroid, 1.0 / n);
    let mut out = mol.clone();
    for a in &mut out.atoms {
        let rel = [
            a.coords[0] - centroid[0],
            a.coords[1] - centroid[1],
            a.coords[2] - centroid[2],
        ];
        a.coords = add(target, rotate(rel, &rot));
    }
    out
}

/// One synthetic complex: pocket shell around the origin, ligand posed near
/// the center.
pub fn toy_complex(seed: u64, n_res: usize, ligand_kind: usize, affinity: f64) -> SynthComplex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protein = toy_pocket_with(seed, n_res, 8.0, &COMPACT_RESIDUE_PALETTE);
    let offset = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let ligand = pose_ligand(&toy_ligand(ligand_kind), offset, &mut rng);
    SynthComplex {
        id: format!("toy{:03}", seed),
        protein,
        ligand,
        affinity,
    }
}

/// The bundled eight-complex training set (ligands of at most 12 heavy
/// atoms, pockets of at most 40 protein atoms).
pub fn toy_training_set() -> Vec<SynthComplex> {
    let affinities = [4.2, 5.1, 5.8, 6.4, 7.0, 7.6, 8.2, 8.8];
    (0..8)
        .map(|k| toy_complex(100 + k as u64, 4 + (k % 2), k, affinities[k]))
        .collect()
}

/// Random connected small molecule (3..=max_atoms heavy atoms) for the
/// symmetry oracles: random spanning tree, optional ring-closing edge.
pub fn random_small_molecule(seed: u64, max_atoms: usize) -> LigandMol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_atoms);
    let elements = ["C", "C", "C", "N", "O"];
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let el = elements[rng.gen_range(0..elements.len())];
        atoms.push(lig_atom(
            el,
            0,
            [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ],
        ));
    }
    let mut bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    for k in 1..n {
        let parent = rng.gen_range(0..k);
        let order = if rng.gen_bool(0.2) {
            BondOrder::Double
        } else {
            BondOrder::Single
        };
        bonds.push((parent, k, order));
    }
    if n >= 4 && rng.gen_bool(0.4) {
        // Close one ring with a not-yet-bonded pair.
        for _ in 0..10 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b
                && !bonds
                    .iter()
                    .any(|&(i, j, _)| (i, j) == (a.min(b), a.max(b)) || (j, i) == (a.min(b), a.max(b)))
            {
                bonds.push((a.min(b), a.max(b), BondOrder::Single));
                break;
            }
        }
    }
    LigandMol::build(format!("rand{seed}"), atoms, bonds).expect("random molecule is connected")
}

/// Writes a complex as `<id>_protein.pdb` and `<id>_ligand.sdf` under `dir`.
pub fn write_complex_files(complex: &SynthComplex, dir: &std::path::Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(format!("{}_protein.pdb", complex.id)),
        crate::chemio::emit_pdb(&complex.protein),
    )?;
    std::fs::write(
        dir.join(format!("{}_ligand.sdf", complex.id)),
        crate::chemio::emit_sdf(&complex.ligand),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_templates_have_clean_bond_separation() {
        // Distance-based bond detection must see exactly the intended
        // topology: bonded pairs close, everything else beyond threshold.
        for name in ["GLY", "ALA", "SER", "THR", "VAL", "LEU", "ASP", "ASN", "LYS", "PHE"] {
            let template = residue_template(name);
            for (a, (na, ea, pa)) in template.iter().enumerate() {
                for (nb, eb, pb) in template.iter().skip(a + 1) {
                    let d = norm([pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]]);
                    let thr = crate::chemio::vocab::covalent_radius(ea)
                        + crate::chemio::vocab::covalent_radius(eb)
                        + 0.4;
                    if d <= thr {
                        assert!(
                            d > 1.1,
                            "{name}: {na}-{nb} suspiciously short at {d:.2}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn toy_training_set_respects_size_budget() {
        let set = toy_training_set();
        assert_eq!(set.len(), 8);
        for c in &set {
            assert!(c.ligand.n_atoms() <= 12, "{} ligand too big", c.id);
            assert!(c.protein.n_atoms() <= 40, "{} pocket too big", c.id);
            // Ligand must sit inside the pocket shell.
            for a in &c.ligand.atoms {
                assert!(norm(a.coords) < 6.0, "{} ligand atom outside pocket", c.id);
            }
        }
    }

    #[test]
    fn toy_set_is_deterministic() {
        let a = toy_training_set();
        let b = toy_training_set();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.ligand, y.ligand);
            assert_eq!(x.protein, y.protein);
        }
    }

    #[test]
    fn random_molecules_are_buildable() {
        for seed in 0..50 {
            let mol = random_small_molecule(seed, 8);
            assert!(mol.n_atoms() >= 3 && mol.n_atoms() <= 8);
        }
    }

    #[test]
    fn synthetic_complexes_featurize() {
        for c in toy_training_set() {
            let pocket = crate::chemio::Pocket::external(c.protein.residues.clone()).unwrap();
            let graph = crate::graph::featurize(&pocket, &c.ligand).unwrap();
            assert_eq!(graph.n_total(), c.ligand.n_atoms() + c.protein.n_atoms());
        }
    }
}
