//! SDF / MOL V2000 subset reader and writer.
//!
//! Supported: the counts line, fixed-width atom and bond blocks, old-style
//! charge codes, `M  CHG` property lines, `M  END`. Explicit hydrogens are
//! folded into per-atom counts and removed.

use crate::error::{CoreError, Result};

use super::{BondOrder, LigandAtom, LigandMol};

fn field(line: &str, from: usize, to: usize) -> &str {
    let bytes = line.as_bytes();
    let to = to.min(bytes.len());
    if from >= to {
        return "";
    }
    std::str::from_utf8(&bytes[from..to]).unwrap_or("").trim()
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| CoreError::SdfParse(format!("malformed {what}: {s:?}")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| CoreError::SdfParse(format!("malformed {what}: {s:?}")))
}

/// Old-style atom-block charge codes (column 4 of the atom line).
fn decode_charge_code(code: u32) -> i32 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

/// Parses a single-record V2000 MOL/SDF block into a heavy-atom molecule.
pub fn parse_sdf(text: &str) -> Result<LigandMol> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 4 {
        return Err(CoreError::SdfParse("too few lines for a V2000 block".into()));
    }
    let name = lines[0].trim().to_string();
    let counts = lines[3];
    if field(counts, 33, 39) == "V3000" {
        return Err(CoreError::SdfParse("V3000 blocks are not supported".into()));
    }
    let n_atoms = parse_usize(field(counts, 0, 3), "counts line (atom count)")?;
    let n_bonds = parse_usize(field(counts, 3, 6), "counts line (bond count)")?;
    if n_atoms == 0 {
        return Err(CoreError::SdfParse("counts line declares zero atoms".into()));
    }

    let atom_end = 4 + n_atoms;
    let bond_end = atom_end + n_bonds;
    if lines.len() < bond_end {
        return Err(CoreError::SdfParse(format!(
            "atom/bond count mismatch: {} atoms + {} bonds declared but only {} lines",
            n_atoms,
            n_bonds,
            lines.len().saturating_sub(4)
        )));
    }

    struct RawAtom {
        element: String,
        charge: i32,
        coords: [f64; 3],
    }

    let mut raw_atoms = Vec::with_capacity(n_atoms);
    for line in &lines[4..atom_end] {
        let x = parse_f64(field(line, 0, 10), "atom x coordinate")?;
        let y = parse_f64(field(line, 10, 20), "atom y coordinate")?;
        let z = parse_f64(field(line, 20, 30), "atom z coordinate")?;
        let symbol = field(line, 31, 34);
        if symbol.is_empty() {
            return Err(CoreError::SdfParse("missing element symbol".into()));
        }
        let charge_code = field(line, 36, 39).parse::<u32>().unwrap_or(0);
        raw_atoms.push(RawAtom {
            element: normalize_symbol(symbol),
            charge: decode_charge_code(charge_code),
            coords: [x, y, z],
        });
    }

    let mut raw_bonds = Vec::with_capacity(n_bonds);
    for line in &lines[atom_end..bond_end] {
        let i = parse_usize(field(line, 0, 3), "bond atom index")?;
        let j = parse_usize(field(line, 3, 6), "bond atom index")?;
        let code = parse_usize(field(line, 6, 9), "bond type")? as u32;
        let order = BondOrder::from_v2000(code).ok_or_else(|| {
            CoreError::SdfParse(format!("unsupported bond type code {code}"))
        })?;
        if i == 0 || j == 0 || i > n_atoms || j > n_atoms {
            return Err(CoreError::SdfParse(format!(
                "bond endpoint out of range: {i}-{j} of {n_atoms} atoms"
            )));
        }
        raw_bonds.push((i - 1, j - 1, order));
    }

    // Property block: honor M CHG, stop at M END.
    let mut saw_end = false;
    let mut chg_assignments: Vec<(usize, i32)> = Vec::new();
    for line in &lines[bond_end..] {
        if line.starts_with("M  END") {
            saw_end = true;
            break;
        }
        if line.starts_with("M  CHG") {
            let count = parse_usize(field(line, 6, 9), "M CHG count")?;
            for k in 0..count {
                let base = 9 + k * 8;
                let atom = parse_usize(field(line, base, base + 4), "M CHG atom index")?;
                let value = field(line, base + 4, base + 8)
                    .parse::<i32>()
                    .map_err(|_| CoreError::SdfParse("malformed M CHG value".into()))?;
                if atom == 0 || atom > n_atoms {
                    return Err(CoreError::SdfParse(format!(
                        "M CHG atom index out of range: {atom}"
                    )));
                }
                chg_assignments.push((atom - 1, value));
            }
        }
    }
    if !saw_end {
        return Err(CoreError::SdfParse("missing M  END terminator".into()));
    }
    if !chg_assignments.is_empty() {
        // M CHG supersedes all old-style charge codes.
        for a in &mut raw_atoms {
            a.charge = 0;
        }
        for (idx, value) in chg_assignments {
            raw_atoms[idx].charge = value;
        }
    }

    // Fold explicit hydrogens into their heavy neighbor and drop them.
    let is_h: Vec<bool> = raw_atoms.iter().map(|a| a.element == "H").collect();
    let mut explicit_h = vec![0u32; n_atoms];
    let mut heavy_bonds = Vec::new();
    for &(i, j, order) in &raw_bonds {
        match (is_h[i], is_h[j]) {
            (false, false) => heavy_bonds.push((i, j, order)),
            (true, false) => explicit_h[j] += 1,
            (false, true) => explicit_h[i] += 1,
            (true, true) => {
                return Err(CoreError::SdfParse("hydrogen-hydrogen bond".into()));
            }
        }
    }

    let mut remap = vec![usize::MAX; n_atoms];
    let mut atoms = Vec::new();
    for (idx, raw) in raw_atoms.into_iter().enumerate() {
        if is_h[idx] {
            continue;
        }
        remap[idx] = atoms.len();
        atoms.push(LigandAtom {
            element: raw.element,
            charge: raw.charge,
            coords: raw.coords,
            aromatic: false,
            explicit_h: explicit_h[idx],
            ring_bits: 0,
        });
    }
    let bonds: Vec<(usize, usize, BondOrder)> = heavy_bonds
        .into_iter()
        .map(|(i, j, o)| (remap[i], remap[j], o))
        .collect();

    LigandMol::build(name, atoms, bonds)
}

fn normalize_symbol(symbol: &str) -> String {
    let mut out = String::with_capacity(2);
    for (k, ch) in symbol.chars().enumerate() {
        if k == 0 {
            out.extend(ch.to_uppercase());
        } else {
            out.extend(ch.to_lowercase());
        }
    }
    out
}

/// Writes a molecule as a single V2000 record. Coordinates are quantized to
/// 1e-4 A by the format; files produced by [`parse_sdf`] round-trip exactly.
pub fn emit_sdf(mol: &LigandMol) -> String {
    let mut out = String::new();
    out.push_str(&mol.name);
    out.push('\n');
    out.push_str("  ligpose\n\n");
    out.push_str(&format!(
        "{:3}{:3}  0  0  0  0  0  0  0  0999 V2000\n",
        mol.n_atoms(),
        mol.bonds.len()
    ));
    for atom in &mol.atoms {
        out.push_str(&format!(
            "{:10.4}{:10.4}{:10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n",
            atom.coords[0], atom.coords[1], atom.coords[2], atom.element
        ));
    }
    for bond in &mol.bonds {
        out.push_str(&format!(
            "{:3}{:3}{:3}  0\n",
            bond.i + 1,
            bond.j + 1,
            bond.order.to_v2000()
        ));
    }
    let charged: Vec<(usize, i32)> = mol
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.charge != 0)
        .map(|(i, a)| (i + 1, a.charge))
        .collect();
    for chunk in charged.chunks(8) {
        out.push_str(&format!("M  CHG{:3}", chunk.len()));
        for &(idx, chg) in chunk {
            out.push_str(&format!("{idx:4}{chg:4}"));
        }
        out.push('\n');
    }
    out.push_str("M  END\n$$$$\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BENZENE: &str = "benzene
  test

  6  6  0  0  0  0  0  0  0  0999 V2000
    0.0000    1.4000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2124    0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2124   -0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000   -1.4000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2124   -0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2124    0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  4  0
  2  3  4  0
  3  4  4  0
  4  5  4  0
  5  6  4  0
  6  1  4  0
M  END
$$$$
";

    // Phenol with one explicit hydrogen on the oxygen.
    const PHENOL_EXPLICIT_H: &str = "phenol
  test

  8  8  0  0  0  0  0  0  0  0999 V2000
    0.0000    1.4000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2124    0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2124   -0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000   -1.4000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2124   -0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -1.2124    0.7000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000    2.8000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
    0.9000    3.3000    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  4  0
  2  3  4  0
  3  4  4  0
  4  5  4  0
  5  6  4  0
  6  1  4  0
  1  7  1  0
  7  8  1  0
M  END
$$$$
";

    #[test]
    fn benzene_parses_to_six_aromatic_carbons() {
        let mol = parse_sdf(BENZENE).unwrap();
        assert_eq!(mol.n_atoms(), 6);
        for (i, atom) in mol.atoms.iter().enumerate() {
            assert_eq!(atom.element, "C");
            assert!(atom.aromatic);
            assert!(atom.in_ring_of_size(6), "atom {i}");
        }
    }

    #[test]
    fn phenol_folds_explicit_hydrogen() {
        let mol = parse_sdf(PHENOL_EXPLICIT_H).unwrap();
        assert_eq!(mol.n_atoms(), 7);
        let oxygen = mol.atoms.iter().position(|a| a.element == "O").unwrap();
        assert_eq!(mol.atoms[oxygen].explicit_h, 1);
        assert_eq!(mol.hydrogen_count(oxygen), 1);
    }

    #[test]
    fn bond_out_of_range_is_rejected() {
        let text = "bad\n\n\n  7  1  0  0  0  0  0  0  0  0999 V2000\n".to_string()
            + &"    0.0000    0.0000    0.0000 C   0\n".repeat(7)
            + "  1 99  1  0\nM  END\n";
        let err = parse_sdf(&text).unwrap_err();
        assert!(err.to_string().contains("bond endpoint out of range"), "{err}");
    }

    #[test]
    fn unsupported_bond_type_is_rejected() {
        let text = "bad\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n".to_string()
            + "    0.0000    0.0000    0.0000 C   0\n"
            + "    1.5000    0.0000    0.0000 C   0\n"
            + "  1  2  8  0\nM  END\n";
        let err = parse_sdf(&text).unwrap_err();
        assert!(err.to_string().contains("unsupported bond type"), "{err}");
    }

    #[test]
    fn malformed_counts_line_is_rejected() {
        let err = parse_sdf("x\n\n\n  a  b\nM  END\n").unwrap_err();
        assert!(err.to_string().contains("counts line"), "{err}");
    }

    #[test]
    fn m_chg_overrides_old_style_charges() {
        let text = "chg\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n".to_string()
            + "    0.0000    0.0000    0.0000 N   0  3\n"
            + "    1.5000    0.0000    0.0000 O   0  0\n"
            + "  1  2  1  0\n"
            + "M  CHG  1   2  -1\n"
            + "M  END\n";
        let mol = parse_sdf(&text).unwrap();
        // M CHG resets the old-style +1 on atom 1 and sets -1 on atom 2.
        assert_eq!(mol.atoms[0].charge, 0);
        assert_eq!(mol.atoms[1].charge, -1);
    }

    #[test]
    fn emit_parse_roundtrip_is_exact() {
        // Explicit hydrogens are folded at parse time and not re-emitted, so
        // the comparison checks the semantic content: elements, charges,
        // coordinates, rings, bonds and total hydrogen counts.
        for text in [BENZENE, PHENOL_EXPLICIT_H] {
            let a = parse_sdf(text).unwrap();
            let b = parse_sdf(&emit_sdf(&a)).unwrap();
            assert_eq!(a.bonds, b.bonds);
            assert_eq!(a.n_atoms(), b.n_atoms());
            for (i, (x, y)) in a.atoms.iter().zip(&b.atoms).enumerate() {
                assert_eq!(x.element, y.element);
                assert_eq!(x.charge, y.charge);
                assert_eq!(x.coords, y.coords, "atom {i} coords must be bit-identical");
                assert_eq!(x.aromatic, y.aromatic);
                assert_eq!(x.ring_bits, y.ring_bits);
                assert_eq!(a.hydrogen_count(i), b.hydrogen_count(i));
            }
        }
    }
}
