//! Binding pocket selection by ligand proximity.

use crate::error::{CoreError, Result};

use super::{LigandMol, ProteinChain, Residue};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PocketRule {
    /// CA within `cutoff` of the nearest ligand heavy atom.
    LigandProximity,
    /// Residue list supplied externally (pre-extracted pocket).
    External,
}

/// The residues forming a binding pocket, with selection provenance.
#[derive(Clone, Debug)]
pub struct Pocket {
    pub residues: Vec<Residue>,
    pub rule: PocketRule,
    pub cutoff: f64,
}

impl Pocket {
    pub fn n_atoms(&self) -> usize {
        self.residues.iter().map(|r| r.atoms.len()).sum()
    }

    /// Wraps externally supplied residues without a distance test.
    pub fn external(residues: Vec<Residue>) -> Result<Self> {
        if residues.is_empty() {
            return Err(CoreError::Pocket("empty pocket".into()));
        }
        Ok(Pocket {
            residues,
            rule: PocketRule::External,
            cutoff: f64::NAN,
        })
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Selects residues whose CA lies within `cutoff` (in Angstroms, boundary
/// included) of any ligand heavy atom.
pub fn select_pocket(protein: &ProteinChain, ligand: &LigandMol, cutoff: f64) -> Result<Pocket> {
    if protein.residues.is_empty() {
        return Err(CoreError::Pocket("protein chain has no residues".into()));
    }
    if ligand.n_atoms() == 0 {
        return Err(CoreError::Pocket("ligand has no atoms".into()));
    }
    let cutoff2 = cutoff * cutoff;
    let residues: Vec<Residue> = protein
        .residues
        .iter()
        .filter(|res| {
            let ca = res.ca().coords;
            ligand.atoms.iter().any(|a| dist2(ca, a.coords) <= cutoff2)
        })
        .cloned()
        .collect();
    if residues.is_empty() {
        return Err(CoreError::Pocket(format!(
            "empty pocket: no residue CA within {cutoff} A of the ligand"
        )));
    }
    Ok(Pocket {
        residues,
        rule: PocketRule::LigandProximity,
        cutoff,
    })
}
