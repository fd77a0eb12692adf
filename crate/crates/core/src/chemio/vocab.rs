//! Fixed vocabularies for protein and ligand featurization.

/// The 20 canonical amino acid residue names.
pub const RESIDUE_NAMES: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

/// Heavy-atom PDB names across the 20 canonical residues. The full canonical
/// set has exactly 37 entries (backbone N/CA/C/O/OXT plus every side-chain
/// heavy-atom name).
pub const ATOM_NAMES: [&str; 37] = [
    "N", "CA", "C", "O", "OXT", "CB", "CG", "CG1", "CG2", "CD", "CD1", "CD2", "CE", "CE1", "CE2",
    "CE3", "CH2", "CZ", "CZ2", "CZ3", "ND1", "ND2", "NE", "NE1", "NE2", "NH1", "NH2", "NZ", "OD1",
    "OD2", "OE1", "OE2", "OG", "OG1", "OH", "SD", "SG",
];

/// Elements that occur in canonical residues.
pub const PROTEIN_ELEMENTS: [&str; 4] = ["C", "N", "O", "S"];

/// Ligand element classes; anything else maps to the trailing `other` bin.
pub const LIGAND_ELEMENTS: [&str; 9] = ["C", "N", "O", "S", "P", "F", "Cl", "Br", "I"];

pub fn residue_index(name: &str) -> Option<usize> {
    RESIDUE_NAMES.iter().position(|&r| r == name)
}

pub fn atom_name_index(name: &str) -> Option<usize> {
    ATOM_NAMES.iter().position(|&a| a == name)
}

pub fn protein_element_index(symbol: &str) -> Option<usize> {
    PROTEIN_ELEMENTS.iter().position(|&e| e == symbol)
}

/// Ligand element class, `LIGAND_ELEMENTS.len()` = the `other` bin.
pub fn ligand_element_class(symbol: &str) -> usize {
    LIGAND_ELEMENTS
        .iter()
        .position(|&e| e == symbol)
        .unwrap_or(LIGAND_ELEMENTS.len())
}

/// Typical valence used to infer hydrogen counts for heavy atoms.
pub fn default_valence(symbol: &str) -> Option<u32> {
    match symbol {
        "C" => Some(4),
        "N" => Some(3),
        "O" | "S" => Some(2),
        "P" => Some(3),
        "F" | "Cl" | "Br" | "I" => Some(1),
        _ => None,
    }
}

/// Single-bond covalent radius in Angstroms, for distance-based bond
/// detection between protein heavy atoms.
pub fn covalent_radius(symbol: &str) -> f64 {
    match symbol {
        "C" => 0.77,
        "N" => 0.75,
        "O" => 0.73,
        "S" => 1.02,
        _ => 0.9,
    }
}

/// Protein atom hybridization bins: SP, SP2, SP3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProteinHybridization {
    Sp,
    Sp2,
    Sp3,
}

/// Assigns hybridization from the residue/atom-name context: amide backbone
/// (N, C, O), side-chain amide/carboxylate/guanidinium groups and aromatic
/// rings are SP2, everything else SP3.
pub fn protein_hybridization(res_name: &str, atom_name: &str) -> ProteinHybridization {
    use ProteinHybridization::{Sp2, Sp3};
    if matches!(atom_name, "N" | "C" | "O" | "OXT") {
        return Sp2;
    }
    let sp2: &[&str] = match res_name {
        "ARG" => &["NE", "CZ", "NH1", "NH2"],
        "ASN" => &["CG", "OD1", "ND2"],
        "ASP" => &["CG", "OD1", "OD2"],
        "GLN" => &["CD", "OE1", "NE2"],
        "GLU" => &["CD", "OE1", "OE2"],
        "HIS" => &["CG", "ND1", "CD2", "CE1", "NE2"],
        "PHE" => &["CG", "CD1", "CD2", "CE1", "CE2", "CZ"],
        "TRP" => &["CG", "CD1", "CD2", "NE1", "CE2", "CE3", "CZ2", "CZ3", "CH2"],
        "TYR" => &["CG", "CD1", "CD2", "CE1", "CE2", "CZ"],
        _ => &[],
    };
    if sp2.contains(&atom_name) {
        Sp2
    } else {
        Sp3
    }
}

/// Maps chemically equivalent side-chain atom names onto one canonical name,
/// used when atom names become classification targets (predicting `CG1` vs
/// `CG2` of a valine is ambiguous, so one class is kept per pair).
pub fn collapse_symmetric_atom_name<'a>(res_name: &str, atom_name: &'a str) -> &'a str {
    let pairs: &[(&str, &str)] = match res_name {
        "VAL" => &[("CG2", "CG1")],
        "LEU" => &[("CD2", "CD1")],
        "PHE" | "TYR" => &[("CD2", "CD1"), ("CE2", "CE1")],
        "ASP" => &[("OD2", "OD1")],
        "GLU" => &[("OE2", "OE1")],
        "ARG" => &[("NH2", "NH1")],
        _ => &[],
    };
    for &(from, to) in pairs {
        if atom_name == from {
            return to;
        }
    }
    atom_name
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_name_vocabulary_has_37_entries() {
        assert_eq!(ATOM_NAMES.len(), 37);
        let unique: std::collections::HashSet<_> = ATOM_NAMES.iter().collect();
        assert_eq!(unique.len(), 37);
    }

    #[test]
    fn symmetric_collapse_is_residue_scoped() {
        // ILE CG1/CG2 are chemically distinct and must not collapse.
        assert_eq!(collapse_symmetric_atom_name("ILE", "CG2"), "CG2");
        assert_eq!(collapse_symmetric_atom_name("VAL", "CG2"), "CG1");
        assert_eq!(collapse_symmetric_atom_name("PHE", "CE2"), "CE1");
        assert_eq!(collapse_symmetric_atom_name("TRP", "CZ2"), "CZ2");
    }
}
