//! Structure I/O on the fixed-column ATOM record format.
//!
//! Parsing keeps heavy atoms of the first model only: hydrogens (and
//! deuterium), waters, and duplicate altLoc atoms are dropped at the door so
//! every downstream distance is over heavy atoms. Residues are renumbered
//! 1..n per chain in file order, which collapses insertion codes and
//! author numbering gaps into plain ordinals; contact files and restraints
//! always speak in these ordinals.

use crate::geometry::{centroid, Vec3};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdbError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed {what}")]
    Malformed { line: usize, what: String },
    #[error("chain {0} not found")]
    ChainNotFound(char),
    #[error("no residues parsed")]
    EmptyStructure,
    #[error("residue {residue} has neither CB nor CA")]
    MissingCbAndCa { residue: usize },
    #[error("residue {residue} has no {atom} atom")]
    MissingAtom { residue: usize, atom: String },
    #[error("coordinate {0} does not fit the 8.3 column format")]
    CoordinateOverflow(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub name: String,
    pub element: String,
    pub coord: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    /// 1-based position in the chain after renumbering.
    pub ordinal: usize,
    pub name: String,
    pub atoms: Vec<Atom>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    /// CB coordinate, falling back to CA (glycine has no CB).
    pub fn cb_or_ca(&self) -> Result<Vec3, PdbError> {
        self.atom("CB")
            .or_else(|| self.atom("CA"))
            .map(|a| a.coord)
            .ok_or(PdbError::MissingCbAndCa { residue: self.ordinal })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub chain_id: char,
    pub residues: Vec<Residue>,
}

impl Structure {
    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn ca_coords(&self) -> Result<Vec<Vec3>, PdbError> {
        self.residues
            .iter()
            .map(|r| {
                r.atom("CA").map(|a| a.coord).ok_or_else(|| PdbError::MissingAtom {
                    residue: r.ordinal,
                    atom: "CA".into(),
                })
            })
            .collect()
    }

    pub fn cb_coords(&self) -> Result<Vec<Vec3>, PdbError> {
        self.residues.iter().map(|r| r.cb_or_ca()).collect()
    }

    /// Backbone atoms (N, CA, C, O) in residue order; missing atoms are
    /// skipped rather than erroring so partial residues stay usable.
    pub fn backbone_coords(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        for r in &self.residues {
            for name in ["N", "CA", "C", "O"] {
                if let Some(a) = r.atom(name) {
                    out.push(a.coord);
                }
            }
        }
        out
    }

    pub fn heavy_coords(&self) -> Vec<Vec3> {
        self.residues
            .iter()
            .flat_map(|r| r.atoms.iter().map(|a| a.coord))
            .collect()
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.heavy_coords())
    }

    /// Residue name sequence, used to detect homodimers.
    pub fn residue_names(&self) -> Vec<&str> {
        self.residues.iter().map(|r| r.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Keep HETATM records (waters are still dropped).
    pub include_hetatm: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { include_hetatm: false }
    }
}

fn element_of(name: &str, field: &str) -> String {
    let field = field.trim();
    if !field.is_empty() {
        return field.to_uppercase();
    }
    // Fall back to the first alphabetic character of the atom name.
    name.chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_default()
}

fn slice(line: &str, lo: usize, hi: usize) -> &str {
    let hi = hi.min(line.len());
    if lo >= hi {
        ""
    } else {
        &line[lo..hi]
    }
}

/// Parse ATOM records from a reader. `chain` narrows the result to one chain;
/// `None` returns every chain in order of first appearance. Only the first
/// model of multi-model files is read.
pub fn parse_pdb<R: Read>(
    source: R,
    chain: Option<char>,
    options: ParseOptions,
) -> Result<Vec<Structure>, PdbError> {
    let reader = BufReader::new(source);
    let mut chains: Vec<Structure> = Vec::new();
    // Per chain: key of the residue currently being filled.
    let mut open_residue: Vec<Option<(i64, char)>> = Vec::new();
    let mut in_model = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let record = slice(&line, 0, 6).trim_end();
        match record {
            "MODEL" => {
                in_model += 1;
                if in_model > 1 {
                    break;
                }
            }
            "ENDMDL" => break,
            "ATOM" | "HETATM" => {
                if record == "HETATM" && !options.include_hetatm {
                    continue;
                }
                if line.len() < 54 {
                    return Err(PdbError::Malformed {
                        line: lineno,
                        what: "record shorter than the coordinate columns".into(),
                    });
                }
                let res_name = slice(&line, 17, 20).trim().to_string();
                if res_name == "HOH" {
                    continue;
                }
                let atom_name = slice(&line, 12, 16).trim().to_string();
                let element = element_of(&atom_name, slice(&line, 76, 78));
                if element == "H" || element == "D" {
                    continue;
                }
                let chain_id = line.as_bytes()[21] as char;
                let res_seq: i64 = slice(&line, 22, 26).trim().parse().map_err(|_| {
                    PdbError::Malformed { line: lineno, what: "residue number".into() }
                })?;
                let icode = line.as_bytes().get(26).map(|b| *b as char).unwrap_or(' ');
                let mut coords = [0.0f64; 3];
                for (k, c) in coords.iter_mut().enumerate() {
                    let lo = 30 + 8 * k;
                    *c = slice(&line, lo, lo + 8).trim().parse().map_err(|_| {
                        PdbError::Malformed { line: lineno, what: "coordinate".into() }
                    })?;
                }

                let ci = match chains.iter().position(|s| s.chain_id == chain_id) {
                    Some(ci) => ci,
                    None => {
                        chains.push(Structure { chain_id, residues: Vec::new() });
                        open_residue.push(None);
                        chains.len() - 1
                    }
                };
                let key = (res_seq, icode);
                if open_residue[ci] != Some(key) {
                    chains[ci].residues.push(Residue {
                        ordinal: 0,
                        name: res_name,
                        atoms: Vec::new(),
                    });
                    open_residue[ci] = Some(key);
                }
                let residue = chains[ci].residues.last_mut().unwrap();
                // altLoc duplicates: first occurrence wins.
                if residue.atom(&atom_name).is_none() {
                    residue.atoms.push(Atom {
                        name: atom_name,
                        element,
                        coord: Vec3::new(coords[0], coords[1], coords[2]),
                    });
                }
            }
            _ => {}
        }
    }

    for s in &mut chains {
        s.residues.retain(|r| !r.atoms.is_empty());
        for (i, r) in s.residues.iter_mut().enumerate() {
            r.ordinal = i + 1;
        }
    }
    chains.retain(|s| !s.residues.is_empty());

    if let Some(c) = chain {
        match chains.into_iter().find(|s| s.chain_id == c) {
            Some(s) => Ok(vec![s]),
            None => Err(PdbError::ChainNotFound(c)),
        }
    } else if chains.is_empty() {
        Err(PdbError::EmptyStructure)
    } else {
        Ok(chains)
    }
}

/// Read structures from a file; names ending in `.gz` are decompressed.
pub fn read_structures(
    path: &Path,
    chain: Option<char>,
    options: ParseOptions,
) -> Result<Vec<Structure>, PdbError> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_pdb(flate2::read::GzDecoder::new(file), chain, options)
    } else {
        parse_pdb(file, chain, options)
    }
}

fn fmt_coord(v: f64) -> Result<String, PdbError> {
    let s = format!("{v:8.3}");
    if s.len() > 8 {
        return Err(PdbError::CoordinateOverflow(v));
    }
    Ok(s)
}

fn write_atom_line<W: Write>(
    w: &mut W,
    serial: usize,
    atom: &Atom,
    coord: Vec3,
    res: &Residue,
    chain_id: char,
) -> Result<(), PdbError> {
    // Single-letter elements start in column 14, leaving column 13 blank.
    let name = if atom.name.len() >= 4 {
        atom.name[..4].to_string()
    } else {
        format!(" {:<3}", atom.name)
    };
    writeln!(
        w,
        "ATOM  {serial:>5} {name} {res_name:>3} {chain_id}{res_seq:>4}    {x}{y}{z}{occ:6.2}{b:6.2}          {element:>2}",
        res_name = res.name,
        res_seq = res.ordinal,
        x = fmt_coord(coord.x)?,
        y = fmt_coord(coord.y)?,
        z = fmt_coord(coord.z)?,
        occ = 1.0,
        b = 0.0,
        element = atom.element,
    )?;
    Ok(())
}

fn write_chain<W: Write>(
    w: &mut W,
    s: &Structure,
    chain_id: char,
    transform: Option<&crate::geometry::Pose>,
    serial: &mut usize,
) -> Result<(), PdbError> {
    for res in &s.residues {
        for atom in &res.atoms {
            let coord = match transform {
                Some(p) => p.apply(atom.coord),
                None => atom.coord,
            };
            write_atom_line(w, *serial, atom, coord, res, chain_id)?;
            *serial += 1;
        }
    }
    let last = s.residues.last().expect("chains are never empty");
    writeln!(
        w,
        "TER   {serial:>5}      {res_name:>3} {chain_id}{res_seq:>4}",
        res_name = last.name,
        res_seq = last.ordinal,
    )?;
    *serial += 1;
    Ok(())
}

/// Write a posed complex: the receptor as stored, the ligand with `pose`
/// applied. Occupancy and B-factor columns are fixed at 1.00 / 0.00 so the
/// output is byte-stable across runs. If the two chains share an id, the
/// ligand is relabeled with the next free letter.
pub fn write_complex<W: Write>(
    w: &mut W,
    receptor: &Structure,
    ligand: &Structure,
    pose: &crate::geometry::Pose,
    ligand_chain_id: Option<char>,
) -> Result<(), PdbError> {
    if receptor.is_empty() || ligand.is_empty() {
        return Err(PdbError::EmptyStructure);
    }
    let lig_id = ligand_chain_id.unwrap_or_else(|| {
        if ligand.chain_id != receptor.chain_id {
            ligand.chain_id
        } else {
            ('A'..='Z')
                .find(|c| *c != receptor.chain_id)
                .unwrap_or('B')
        }
    });
    let mut serial = 1;
    write_chain(w, receptor, receptor.chain_id, None, &mut serial)?;
    write_chain(w, ligand, lig_id, Some(pose), &mut serial)?;
    writeln!(w, "END")?;
    Ok(())
}
