//! Minimal molecular file I/O: an SDF (MOL V2000) subset for ligands, a PDB
//! ATOM-record subset for proteins, and ligand-proximity pocket selection.

pub mod pdb;
pub mod pocket;
pub mod sdf;
pub mod vocab;

pub use pdb::{emit_pdb, parse_pdb, ProteinAtom, ProteinChain, Residue};
pub use pocket::{select_pocket, Pocket, PocketRule};
pub use sdf::{emit_sdf, parse_sdf};

use crate::error::{CoreError, Result};

/// Covalent bond order as stored in V2000 files (type 4 = aromatic).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn from_v2000(code: u32) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }

    pub fn to_v2000(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to an atom's valence; aromatic counts 1.5.
    pub fn valence_weight(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }
}

/// Heavy atom of a parsed ligand. Explicit hydrogens from the input are
/// folded into `explicit_h` and removed.
#[derive(Clone, Debug, PartialEq)]
pub struct LigandAtom {
    pub element: String,
    pub charge: i32,
    pub coords: [f64; 3],
    pub aromatic: bool,
    pub explicit_h: u32,
    /// Bit `s - 3` set when the atom lies on a simple cycle of length `s`
    /// (sizes 3..=8).
    pub ring_bits: u8,
}

impl LigandAtom {
    pub fn in_ring_of_size(&self, size: u8) -> bool {
        (3..=8).contains(&size) && self.ring_bits & (1 << (size - 3)) != 0
    }

    pub fn in_ring(&self) -> bool {
        self.ring_bits != 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LigandBond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
    pub in_ring: bool,
}

/// Connected heavy-atom molecular graph of a ligand.
#[derive(Clone, Debug, PartialEq)]
pub struct LigandMol {
    pub name: String,
    pub atoms: Vec<LigandAtom>,
    pub bonds: Vec<LigandBond>,
}

impl LigandMol {
    /// Validates and finalizes a raw atom/bond list: checks bond endpoints,
    /// duplicates and connectivity, then computes ring membership.
    pub fn build(name: String, atoms: Vec<LigandAtom>, bonds: Vec<(usize, usize, BondOrder)>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(CoreError::SdfParse("molecule has no heavy atoms".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j, _) in &bonds {
            if i >= n || j >= n {
                return Err(CoreError::SdfParse(format!(
                    "bond endpoint out of range: {}-{} of {} atoms",
                    i + 1,
                    j + 1,
                    n
                )));
            }
            if i == j {
                return Err(CoreError::SdfParse(format!("self bond on atom {}", i + 1)));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(CoreError::SdfParse(format!(
                    "duplicate bond {}-{}",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }

        let adjacency = adjacency_list(n, &bonds);
        if !is_connected(n, &adjacency) {
            return Err(CoreError::SdfParse(
                "multi-fragment molecule (heavy-atom graph is disconnected)".into(),
            ));
        }

        let ring_bits = ring_membership_bits(n, &adjacency);
        let mut atoms = atoms;
        for (a, bits) in atoms.iter_mut().zip(&ring_bits) {
            a.ring_bits = *bits;
        }
        // Aromaticity comes from the input file's bond flags.
        for &(i, j, order) in &bonds {
            if order == BondOrder::Aromatic {
                atoms[i].aromatic = true;
                atoms[j].aromatic = true;
            }
        }

        let mut full_bonds = Vec::with_capacity(bonds.len());
        for &(i, j, order) in &bonds {
            let in_ring = bond_in_ring(n, &bonds, i, j);
            full_bonds.push(LigandBond { i, j, order, in_ring });
        }

        Ok(LigandMol {
            name,
            atoms,
            bonds: full_bonds,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, BondOrder)> + '_ {
        self.bonds.iter().filter_map(move |b| {
            if b.i == i {
                Some((b.j, b.order))
            } else if b.j == i {
                Some((b.i, b.order))
            } else {
                None
            }
        })
    }

    /// Heavy-atom degree.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    fn heavy_valence_sum(&self, i: usize) -> u32 {
        let s: f64 = self.neighbors(i).map(|(_, o)| o.valence_weight()).sum();
        s.round() as u32
    }

    /// Hydrogens the atom would carry implicitly after stripping, from the
    /// typical-valence rule.
    pub fn implicit_valence(&self, i: usize) -> u32 {
        let atom = &self.atoms[i];
        let Some(dv) = vocab::default_valence(&atom.element) else {
            return 0;
        };
        let dv = dv as i64 + charge_valence_shift(&atom.element, atom.charge);
        (dv - self.heavy_valence_sum(i) as i64).max(0) as u32
    }

    /// Total hydrogen count: explicit hydrogens folded at parse time plus
    /// valence completion beyond them.
    pub fn hydrogen_count(&self, i: usize) -> u32 {
        self.atoms[i].explicit_h.max(self.implicit_valence(i))
    }

    /// Acyclic single bond between two non-terminal heavy atoms.
    pub fn is_rotatable(&self, bond: &LigandBond) -> bool {
        bond.order == BondOrder::Single
            && !bond.in_ring
            && self.degree(bond.i) >= 2
            && self.degree(bond.j) >= 2
    }

    /// Rigid-part id per atom: connected components after cutting all
    /// rotatable bonds.
    pub fn rigid_parts(&self) -> Vec<usize> {
        let n = self.n_atoms();
        let kept: Vec<(usize, usize, BondOrder)> = self
            .bonds
            .iter()
            .filter(|b| !self.is_rotatable(b))
            .map(|b| (b.i, b.j, b.order))
            .collect();
        let adjacency = adjacency_list(n, &kept);
        components(n, &adjacency)
    }

    /// Hybridization class: SP, SP2, SP3, SP3D, SP3D2, other.
    pub fn hybridization_class(&self, i: usize) -> usize {
        let triples = self.neighbors(i).filter(|&(_, o)| o == BondOrder::Triple).count();
        let doubles = self.neighbors(i).filter(|&(_, o)| o == BondOrder::Double).count();
        let aromatic = self.atoms[i].aromatic;
        let degree = self.degree(i) + self.hydrogen_count(i) as usize;
        if vocab::default_valence(&self.atoms[i].element).is_none() {
            5 // other
        } else if triples > 0 || doubles >= 2 {
            0 // SP
        } else if doubles == 1 || aromatic {
            1 // SP2
        } else if degree >= 6 {
            4 // SP3D2
        } else if degree == 5 {
            3 // SP3D
        } else {
            2 // SP3
        }
    }
}

fn charge_valence_shift(element: &str, charge: i32) -> i64 {
    // N+ gains a bond, O-/S- lose one; beyond the common cases the typical
    // valence is used unchanged.
    match (element, charge.signum()) {
        ("N", 1) => 1,
        ("O" | "S", -1) => -1,
        _ => 0,
    }
}

pub(crate) fn adjacency_list(n: usize, bonds: &[(usize, usize, BondOrder)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j, _) in bonds {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    adjacency
}

fn is_connected(n: usize, adjacency: &[Vec<usize>]) -> bool {
    components(n, adjacency).iter().all(|&c| c == 0)
}

fn components(n: usize, adjacency: &[Vec<usize>]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(u) = stack.pop() {
            for &w in &adjacency[u] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Marks, for every atom, the lengths (3..=8) of simple cycles through it.
fn ring_membership_bits(n: usize, adjacency: &[Vec<usize>]) -> Vec<u8> {
    const MAX_RING: usize = 8;
    let mut bits = vec![0u8; n];
    let mut path: Vec<usize> = Vec::with_capacity(MAX_RING);
    let mut on_path = vec![false; n];

    fn dfs(
        u: usize,
        start: usize,
        adjacency: &[Vec<usize>],
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        bits: &mut [u8],
    ) {
        for &w in &adjacency[u] {
            if w == start && path.len() >= 3 {
                let len = path.len();
                for &a in path.iter() {
                    bits[a] |= 1 << (len - 3);
                }
            } else if w > start && !on_path[w] && path.len() < MAX_RING {
                path.push(w);
                on_path[w] = true;
                dfs(w, start, adjacency, path, on_path, bits);
                on_path[w] = false;
                path.pop();
            }
        }
    }

    for start in 0..n {
        path.push(start);
        on_path[start] = true;
        dfs(start, start, adjacency, &mut path, &mut on_path, &mut bits);
        on_path[start] = false;
        path.pop();
    }
    bits
}

/// A bond lies on a ring iff its endpoints stay connected without it.
fn bond_in_ring(n: usize, bonds: &[(usize, usize, BondOrder)], bi: usize, bj: usize) -> bool {
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j, _) in bonds {
        if (i == bi && j == bj) || (i == bj && j == bi) {
            continue;
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut visited = vec![false; n];
    let mut stack = vec![bi];
    visited[bi] = true;
    while let Some(u) = stack.pop() {
        if u == bj {
            return true;
        }
        for &w in &adjacency[u] {
            if !visited[w] {
                visited[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring6() -> LigandMol {
        let atoms = (0..6)
            .map(|i| LigandAtom {
                element: "C".into(),
                charge: 0,
                coords: [i as f64, 0.0, 0.0],
                aromatic: false,
                explicit_h: 0,
                ring_bits: 0,
            })
            .collect();
        let bonds = (0..6)
            .map(|i| (i, (i + 1) % 6, BondOrder::Aromatic))
            .collect();
        LigandMol::build("benzene".into(), atoms, bonds).unwrap()
    }

    #[test]
    fn benzene_ring_membership_and_aromaticity() {
        let mol = ring6();
        for (i, atom) in mol.atoms.iter().enumerate() {
            assert!(atom.aromatic);
            assert!(atom.in_ring_of_size(6), "atom {i} should be in a 6-ring");
            assert!(!atom.in_ring_of_size(5));
            assert_eq!(mol.hydrogen_count(i), 1);
        }
        for bond in &mol.bonds {
            assert!(bond.in_ring);
            assert!(!mol.is_rotatable(bond));
        }
        assert!(mol.rigid_parts().iter().all(|&p| p == 0));
    }

    #[test]
    fn rotatable_bond_splits_rigid_parts() {
        // ethylbenzene-like: ring + CH2-CH3 tail
        let mut atoms: Vec<LigandAtom> = (0..8)
            .map(|i| LigandAtom {
                element: "C".into(),
                charge: 0,
                coords: [i as f64, 0.0, 0.0],
                aromatic: false,
                explicit_h: 0,
                ring_bits: 0,
            })
            .collect();
        atoms.truncate(8);
        let mut bonds: Vec<(usize, usize, BondOrder)> =
            (0..6).map(|i| (i, (i + 1) % 6, BondOrder::Aromatic)).collect();
        bonds.push((0, 6, BondOrder::Single)); // ring-CH2: rotatable
        bonds.push((6, 7, BondOrder::Single)); // CH2-CH3: terminal, not rotatable
        let mol = LigandMol::build("ethylbenzene".into(), atoms, bonds).unwrap();
        let rotatable: Vec<bool> = mol.bonds.iter().map(|b| mol.is_rotatable(b)).collect();
        assert_eq!(rotatable.iter().filter(|&&r| r).count(), 1);
        let parts = mol.rigid_parts();
        assert_eq!(parts[0], parts[5]);
        assert_eq!(parts[6], parts[7]);
        assert_ne!(parts[0], parts[6]);
    }

    #[test]
    fn disconnected_molecule_rejected() {
        let atoms = (0..4)
            .map(|_| LigandAtom {
                element: "C".into(),
                charge: 0,
                coords: [0.0; 3],
                aromatic: false,
                explicit_h: 0,
                ring_bits: 0,
            })
            .collect();
        let err = LigandMol::build("x".into(), atoms, vec![(0, 1, BondOrder::Single)]).unwrap_err();
        assert!(err.to_string().contains("multi-fragment"));
    }

    #[test]
    fn charged_nitrogen_gains_a_hydrogen() {
        let atoms = vec![
            LigandAtom {
                element: "N".into(),
                charge: 1,
                coords: [0.0; 3],
                aromatic: false,
                explicit_h: 0,
                ring_bits: 0,
            },
            LigandAtom {
                element: "C".into(),
                charge: 0,
                coords: [1.5, 0.0, 0.0],
                aromatic: false,
                explicit_h: 0,
                ring_bits: 0,
            },
        ];
        let mol = LigandMol::build("methylammonium".into(), atoms, vec![(0, 1, BondOrder::Single)])
            .unwrap();
        assert_eq!(mol.hydrogen_count(0), 3);
        assert_eq!(mol.hydrogen_count(1), 3);
    }
}
