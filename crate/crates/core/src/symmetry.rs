//! Equivalent atom indexings of a ligand: automorphisms of the colored
//! molecular graph. Chemically identical poses differ only by one of these
//! permutations, so losses and RMSD minimize over the whole set.

use std::collections::{BTreeMap, HashMap};

use crate::chemio::{BondOrder, LigandMol};

/// Default cap on the number of enumerated permutations. Highly symmetric
/// molecules explode combinatorially; the set is truncated (flagged) and
/// losses minimize over the enumerated subset.
pub const DEFAULT_PERMUTATION_CAP: usize = 1000;

/// The enumerated automorphism permutations. Each permutation maps a
/// predicted-order atom index to the native-order index it may stand for.
#[derive(Clone, Debug)]
pub struct EquivalentIndexSet {
    pub perms: Vec<Vec<usize>>,
    pub truncated: bool,
}

impl EquivalentIndexSet {
    pub fn identity(n: usize) -> Self {
        EquivalentIndexSet {
            perms: vec![(0..n).collect()],
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }
}

type EdgeKey = (usize, usize);

fn edge_map(mol: &LigandMol) -> HashMap<EdgeKey, BondOrder> {
    let mut map = HashMap::new();
    for b in &mol.bonds {
        map.insert((b.i, b.j), b.order);
        map.insert((b.j, b.i), b.order);
    }
    map
}

/// Initial vertex colors: element, formal charge, aromaticity and ring
/// membership distinguish atoms; degree is added as a free refinement since
/// automorphisms preserve it.
fn initial_colors(mol: &LigandMol) -> Vec<u64> {
    let mut keys: Vec<(String, i32, bool, u8, usize)> = Vec::with_capacity(mol.n_atoms());
    for (i, a) in mol.atoms.iter().enumerate() {
        keys.push((a.element.clone(), a.charge, a.aromatic, a.ring_bits, mol.degree(i)));
    }
    let mut ids: BTreeMap<&(String, i32, bool, u8, usize), u64> = BTreeMap::new();
    for k in &keys {
        let next = ids.len() as u64;
        ids.entry(k).or_insert(next);
    }
    keys.iter().map(|k| ids[k]).collect()
}

fn order_code(o: BondOrder) -> u64 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Weisfeiler-Leman style refinement: a vertex color absorbs the multiset of
/// (bond order, neighbor color) pairs until the partition stabilizes.
fn refine_colors(mol: &LigandMol, mut colors: Vec<u64>) -> Vec<u64> {
    loop {
        let mut signatures: Vec<(u64, Vec<(u64, u64)>)> = Vec::with_capacity(colors.len());
        for (i, &color) in colors.iter().enumerate() {
            let mut neigh: Vec<(u64, u64)> = mol
                .neighbors(i)
                .map(|(j, o)| (order_code(o), colors[j]))
                .collect();
            neigh.sort_unstable();
            signatures.push((color, neigh));
        }
        let mut ids: BTreeMap<&(u64, Vec<(u64, u64)>), u64> = BTreeMap::new();
        for s in &signatures {
            let next = ids.len() as u64;
            ids.entry(s).or_insert(next);
        }
        let new_colors: Vec<u64> = signatures.iter().map(|s| ids[s]).collect();
        let stable = distinct(&new_colors) == distinct(&colors);
        colors = new_colors;
        if stable {
            return colors;
        }
    }
}

fn distinct(colors: &[u64]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

struct Search<'a> {
    n: usize,
    cap: usize,
    colors: &'a [u64],
    edges: &'a HashMap<EdgeKey, BondOrder>,
    image: Vec<usize>,
    used: Vec<bool>,
    perms: Vec<Vec<usize>>,
    truncated: bool,
}

impl Search<'_> {
    fn backtrack(&mut self, v: usize) {
        if self.perms.len() >= self.cap {
            self.truncated = true;
            return;
        }
        if v == self.n {
            self.perms.push(self.image.clone());
            return;
        }
        for w in 0..self.n {
            if self.used[w] || self.colors[w] != self.colors[v] {
                continue;
            }
            if !self.consistent(v, w) {
                continue;
            }
            self.image[v] = w;
            self.used[w] = true;
            self.backtrack(v + 1);
            self.image[v] = usize::MAX;
            self.used[w] = false;
            if self.truncated {
                return;
            }
        }
    }

    /// Bonds between `v` and already-assigned atoms must map to bonds of the
    /// same order, and non-bonds to non-bonds.
    fn consistent(&self, v: usize, w: usize) -> bool {
        for u in 0..v {
            let forward = self.edges.get(&(u, v));
            let mapped = self.edges.get(&(self.image[u], w));
            if forward != mapped {
                return false;
            }
        }
        true
    }
}

/// Enumerates all automorphisms of the colored molecular graph by
/// backtracking over refined color classes, emitted in lexicographic order
/// of the permutation image. Truncated at `cap` with a flag; the identity is
/// always present (it is the lexicographically first automorphism).
pub fn enumerate_equivalent_indexes(mol: &LigandMol, cap: usize) -> EquivalentIndexSet {
    assert!(cap >= 1, "permutation cap must be at least 1");
    let n = mol.n_atoms();
    let colors = refine_colors(mol, initial_colors(mol));
    let edges = edge_map(mol);

    let mut search = Search {
        n,
        cap,
        colors: &colors,
        edges: &edges,
        image: vec![usize::MAX; n],
        used: vec![false; n],
        perms: Vec::new(),
        truncated: false,
    };
    search.backtrack(0);

    debug_assert!(!search.perms.is_empty(), "identity must always be found");
    EquivalentIndexSet {
        perms: search.perms,
        truncated: search.truncated,
    }
}

/// Reference filter over all `n!` permutations; usable for molecules of up
/// to ~8 heavy atoms. Kept public for the oracle test suites.
pub fn brute_force_equivalent_indexes(mol: &LigandMol) -> Vec<Vec<usize>> {
    let n = mol.n_atoms();
    let colors = initial_colors(mol);
    let edges = edge_map(mol);
    let mut result = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p: &[usize]| {
        let color_ok = (0..n).all(|i| colors[i] == colors[p[i]]);
        let edges_ok = (0..n).all(|i| {
            (i + 1..n).all(|j| edges.get(&(i, j)) == edges.get(&(p[i], p[j])))
        });
        if color_ok && edges_ok {
            result.push(p.to_vec());
        }
    });
    result.sort();
    result
}

fn permute(values: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == values.len() {
        visit(values);
        return;
    }
    for i in k..values.len() {
        values.swap(k, i);
        permute(values, k + 1, visit);
        values.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::LigandAtom;

    fn atom(element: &str) -> LigandAtom {
        LigandAtom {
            element: element.into(),
            charge: 0,
            coords: [0.0; 3],
            aromatic: false,
            explicit_h: 0,
            ring_bits: 0,
        }
    }

    fn benzene() -> LigandMol {
        LigandMol::build(
            "benzene".into(),
            (0..6).map(|_| atom("C")).collect(),
            (0..6).map(|i| (i, (i + 1) % 6, BondOrder::Aromatic)).collect(),
        )
        .unwrap()
    }

    fn phenol() -> LigandMol {
        let mut atoms: Vec<LigandAtom> = (0..6).map(|_| atom("C")).collect();
        atoms.push(atom("O"));
        let mut bonds: Vec<(usize, usize, BondOrder)> =
            (0..6).map(|i| (i, (i + 1) % 6, BondOrder::Aromatic)).collect();
        bonds.push((0, 6, BondOrder::Single));
        LigandMol::build("phenol".into(), atoms, bonds).unwrap()
    }

    fn chain_cno() -> LigandMol {
        LigandMol::build(
            "cno".into(),
            vec![atom("C"), atom("N"), atom("O")],
            vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Single)],
        )
        .unwrap()
    }

    #[test]
    fn phenol_has_two_equivalent_indexes() {
        let set = enumerate_equivalent_indexes(&phenol(), DEFAULT_PERMUTATION_CAP);
        assert_eq!(set.len(), 2);
        assert!(!set.truncated);
        assert!(set.perms.contains(&(0..7).collect::<Vec<_>>()));
    }

    #[test]
    fn linear_heteroatom_chain_has_identity_only() {
        let set = enumerate_equivalent_indexes(&chain_cno(), DEFAULT_PERMUTATION_CAP);
        assert_eq!(set.len(), 1);
        assert_eq!(set.perms[0], vec![0, 1, 2]);
    }

    #[test]
    fn benzene_automorphisms_form_the_hexagon_dihedral_group() {
        let mol = benzene();
        let set = enumerate_equivalent_indexes(&mol, DEFAULT_PERMUTATION_CAP);
        assert_eq!(set.len(), 12);
        let mut enumerated = set.perms.clone();
        enumerated.sort();
        assert_eq!(enumerated, brute_force_equivalent_indexes(&mol));
    }

    #[test]
    fn enumeration_is_lexicographic_and_starts_with_identity() {
        let set = enumerate_equivalent_indexes(&benzene(), DEFAULT_PERMUTATION_CAP);
        assert_eq!(set.perms[0], (0..6).collect::<Vec<_>>());
        for pair in set.perms.windows(2) {
            assert!(pair[0] < pair[1], "permutations must come out in lexicographic order");
        }
    }

    #[test]
    fn group_closure_and_bond_preservation() {
        let mol = phenol();
        let set = enumerate_equivalent_indexes(&mol, DEFAULT_PERMUTATION_CAP);
        for a in &set.perms {
            for b in &set.perms {
                let composed: Vec<usize> = (0..a.len()).map(|i| b[a[i]]).collect();
                assert!(set.perms.contains(&composed), "composition must stay in the set");
            }
        }
        let edges = edge_map(&mol);
        for p in &set.perms {
            for bond in &mol.bonds {
                assert_eq!(edges.get(&(p[bond.i], p[bond.j])), Some(&bond.order));
            }
        }
    }

    #[test]
    fn cap_truncates_with_flag() {
        let set = enumerate_equivalent_indexes(&benzene(), 5);
        assert_eq!(set.len(), 5);
        assert!(set.truncated);
        assert_eq!(set.perms[0], (0..6).collect::<Vec<_>>());
    }
}
