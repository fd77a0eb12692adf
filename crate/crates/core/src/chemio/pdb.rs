//! PDB ATOM-record subset reader and writer (fixed columns, heavy atoms,
//! canonical residues, single chain).

use crate::error::{CoreError, Result};

use super::vocab;

#[derive(Clone, Debug, PartialEq)]
pub struct ProteinAtom {
    /// PDB atom name, e.g. `CA`, `OD1`.
    pub name: String,
    pub element: String,
    pub coords: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residue {
    pub name: String,
    pub seq: i32,
    pub insertion: char,
    pub atoms: Vec<ProteinAtom>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&ProteinAtom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    pub fn ca(&self) -> &ProteinAtom {
        self.atom("CA").expect("validated at parse time")
    }
}

/// One chain of canonical residues, heavy atoms only.
#[derive(Clone, Debug, PartialEq)]
pub struct ProteinChain {
    pub chain_id: char,
    pub residues: Vec<Residue>,
}

impl ProteinChain {
    pub fn n_atoms(&self) -> usize {
        self.residues.iter().map(|r| r.atoms.len()).sum()
    }
}

fn col(line: &str, from: usize, to: usize) -> &str {
    let bytes = line.as_bytes();
    let to = to.min(bytes.len());
    if from >= to {
        return "";
    }
    std::str::from_utf8(&bytes[from..to]).unwrap_or("").trim()
}

fn element_from_columns(line: &str, atom_name: &str) -> String {
    let explicit = col(line, 76, 78);
    if !explicit.is_empty() {
        let mut c = explicit.chars();
        let first = c.next().unwrap_or('X').to_ascii_uppercase();
        let rest: String = c.map(|ch| ch.to_ascii_lowercase()).collect();
        return format!("{first}{rest}");
    }
    // Infer from the atom name: first alphabetic character; canonical
    // residue names never need two-letter elements.
    atom_name
        .chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_else(|| "X".into())
}

/// Parses ATOM records of one chain (the first chain encountered unless
/// `chain` is given). HETATM records and hydrogens are skipped; waters are
/// not considered; any other non-canonical residue name is an error.
pub fn parse_pdb(text: &str, chain: Option<char>) -> Result<ProteinChain> {
    let mut selected_chain: Option<char> = chain;
    let mut residues: Vec<Residue> = Vec::new();
    let mut keys: Vec<(i32, char)> = Vec::new();

    for (ln, line) in text.lines().enumerate() {
        if !line.starts_with("ATOM  ") && !line.starts_with("ATOM\t") {
            continue;
        }
        let res_name = col(line, 17, 20).to_string();
        if matches!(res_name.as_str(), "HOH" | "WAT" | "DOD") {
            continue;
        }
        let alt_loc = line.as_bytes().get(16).copied().unwrap_or(b' ') as char;
        if alt_loc != ' ' && alt_loc != 'A' {
            continue;
        }
        let chain_id = line.as_bytes().get(21).copied().unwrap_or(b' ') as char;
        match selected_chain {
            None => selected_chain = Some(chain_id),
            Some(c) if c != chain_id => continue,
            _ => {}
        }
        if vocab::residue_index(&res_name).is_none() {
            return Err(CoreError::PdbParse(format!(
                "non-canonical residue {res_name:?} at line {}",
                ln + 1
            )));
        }
        let atom_name = col(line, 12, 16).to_string();
        let element = element_from_columns(line, &atom_name);
        if element == "H" || element == "D" {
            continue;
        }
        let parse_coord = |from: usize, to: usize, axis: &str| -> Result<f64> {
            col(line, from, to).parse::<f64>().map_err(|_| {
                CoreError::PdbParse(format!(
                    "unparseable {axis} coordinate at line {}",
                    ln + 1
                ))
            })
        };
        let x = parse_coord(30, 38, "x")?;
        let y = parse_coord(38, 46, "y")?;
        let z = parse_coord(46, 54, "z")?;
        let seq: i32 = col(line, 22, 26).parse().map_err(|_| {
            CoreError::PdbParse(format!("unparseable residue number at line {}", ln + 1))
        })?;
        let insertion = line.as_bytes().get(26).copied().unwrap_or(b' ') as char;

        let key = (seq, insertion);
        let residue = match keys.iter().position(|&k| k == key) {
            Some(pos) => &mut residues[pos],
            None => {
                keys.push(key);
                residues.push(Residue {
                    name: res_name.clone(),
                    seq,
                    insertion,
                    atoms: Vec::new(),
                });
                residues.last_mut().expect("just pushed")
            }
        };
        if residue.atom(&atom_name).is_some() {
            return Err(CoreError::PdbParse(format!(
                "duplicate atom {atom_name:?} in residue {res_name} {seq}"
            )));
        }
        residue.atoms.push(ProteinAtom {
            name: atom_name,
            element,
            coords: [x, y, z],
        });
    }

    if residues.is_empty() {
        return Err(CoreError::PdbParse(
            "no ATOM records / empty chain".into(),
        ));
    }
    for r in &residues {
        if r.atom("CA").is_none() {
            return Err(CoreError::PdbParse(format!(
                "residue {} {} is missing its CA atom",
                r.name, r.seq
            )));
        }
    }

    Ok(ProteinChain {
        chain_id: selected_chain.unwrap_or(' '),
        residues,
    })
}

/// Writes a chain as fixed-column ATOM records.
pub fn emit_pdb(chain: &ProteinChain) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for res in &chain.residues {
        for atom in &res.atoms {
            // Standard convention: 1-3 letter names start in column 14.
            let name_field = if atom.name.len() >= 4 {
                atom.name.clone()
            } else {
                format!(" {:<3}", atom.name)
            };
            out.push_str(&format!(
                "ATOM  {serial:5} {name_field:<4} {:<3} {}{:4}{}   {:8.3}{:8.3}{:8.3}  1.00  0.00          {:>2}\n",
                res.name,
                chain.chain_id,
                res.seq,
                res.insertion,
                atom.coords[0],
                atom.coords[1],
                atom.coords[2],
                atom.element
            ));
            serial += 1;
        }
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ala_gly() -> String {
        let chain = ProteinChain {
            chain_id: 'A',
            residues: vec![
                Residue {
                    name: "ALA".into(),
                    seq: 1,
                    insertion: ' ',
                    atoms: vec![
                        ProteinAtom { name: "N".into(), element: "N".into(), coords: [0.0, 0.0, 0.0] },
                        ProteinAtom { name: "CA".into(), element: "C".into(), coords: [1.46, 0.0, 0.0] },
                        ProteinAtom { name: "C".into(), element: "C".into(), coords: [2.0, 1.4, 0.0] },
                        ProteinAtom { name: "O".into(), element: "O".into(), coords: [1.4, 2.4, 0.3] },
                        ProteinAtom { name: "CB".into(), element: "C".into(), coords: [2.0, -0.8, -1.2] },
                    ],
                },
                Residue {
                    name: "GLY".into(),
                    seq: 2,
                    insertion: ' ',
                    atoms: vec![
                        ProteinAtom { name: "N".into(), element: "N".into(), coords: [3.3, 1.5, -0.2] },
                        ProteinAtom { name: "CA".into(), element: "C".into(), coords: [4.0, 2.8, -0.2] },
                        ProteinAtom { name: "C".into(), element: "C".into(), coords: [5.5, 2.6, -0.1] },
                        ProteinAtom { name: "O".into(), element: "O".into(), coords: [6.1, 1.6, -0.5] },
                        ProteinAtom { name: "OXT".into(), element: "O".into(), coords: [6.2, 3.6, 0.4] },
                    ],
                },
            ],
        };
        emit_pdb(&chain)
    }

    #[test]
    fn two_residue_fragment_parses() {
        let text = ala_gly();
        let chain = parse_pdb(&text, None).unwrap();
        assert_eq!(chain.residues.len(), 2);
        assert_eq!(chain.residues[0].name, "ALA");
        assert_eq!(chain.residues[1].name, "GLY");
        for r in &chain.residues {
            assert!(r.atom("CA").is_some());
        }
        assert_eq!(chain.n_atoms(), 10);
    }

    #[test]
    fn emit_parse_roundtrip() {
        let text = ala_gly();
        let a = parse_pdb(&text, None).unwrap();
        let b = parse_pdb(&emit_pdb(&a), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_residue_is_rejected() {
        let text = ala_gly().replace("ALA", "UNK");
        let err = parse_pdb(&text, None).unwrap_err();
        assert!(err.to_string().contains("non-canonical residue"), "{err}");
    }

    #[test]
    fn hetatm_only_input_is_empty() {
        let text = ala_gly().replace("ATOM  ", "HETATM");
        let err = parse_pdb(&text, None).unwrap_err();
        assert!(err.to_string().contains("no ATOM records"), "{err}");
    }

    #[test]
    fn missing_ca_is_rejected() {
        let text: String = ala_gly()
            .lines()
            .filter(|l| !(l.contains(" CA ") && l.contains("GLY")))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_pdb(&text, None).unwrap_err();
        assert!(err.to_string().contains("missing its CA"), "{err}");
    }

    #[test]
    fn chain_filter_selects_chain() {
        let a = ala_gly();
        let b = a.replace("ALA A", "ALA B").replace("GLY A", "GLY B");
        let both = format!("{a}{b}");
        let chain = parse_pdb(&both, None).unwrap();
        assert_eq!(chain.chain_id, 'A');
        assert_eq!(chain.residues.len(), 2);
        let chain_b = parse_pdb(&both, Some('B')).unwrap();
        assert_eq!(chain_b.chain_id, 'B');
        assert_eq!(chain_b.residues.len(), 2);
    }
}
