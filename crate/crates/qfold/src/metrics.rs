//! Docking quality metrics for reconstructed dimers.
//!
//! All metrics compare a model complex against the native complex under the
//! identity residue alignment (ordinal i to ordinal i per chain). For
//! homodimers the two chain assignments are ambiguous, so every metric is
//! computed under both and the better value reported.

use crate::geometry::{kabsch_superpose, raw_rmsd, GeometryError, Vec3};
use crate::pdb::Structure;
use crate::restraints::{extract_true_contacts, min_heavy_atom_distance, RestraintError};
use thiserror::Error;

pub const DEFAULT_FNAT_THRESHOLD: f64 = 6.0;
pub const DEFAULT_INTERFACE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{which} chain length mismatch: model {model} vs native {native}")]
    ChainMismatch { which: &'static str, model: usize, native: usize },
    #[error("superposition failed: {0}")]
    Geometry(#[from] GeometryError),
    #[error("restraint error: {0}")]
    Restraint(#[from] RestraintError),
    #[error("structure error: {0}")]
    Pdb(#[from] crate::pdb::PdbError),
    #[error("native complex has no inter-chain contacts")]
    NoNativeContacts,
    #[error("native complex has an empty interface at {0} angstrom")]
    EmptyInterface(f64),
    #[error("atom sets differ between model and native ({model} vs {native} atoms)")]
    AtomMismatch { model: usize, native: usize },
}

/// A receptor/ligand pair with coordinates already in their final frame.
#[derive(Debug, Clone)]
pub struct Dimer {
    pub receptor: Structure,
    pub ligand: Structure,
}

impl Dimer {
    pub fn new(receptor: Structure, ligand: Structure) -> Dimer {
        Dimer { receptor, ligand }
    }

    fn swapped(&self) -> Dimer {
        Dimer { receptor: self.ligand.clone(), ligand: self.receptor.clone() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsOptions {
    pub fnat_threshold: f64,
    pub interface_threshold: f64,
    /// RMSD over every heavy atom instead of CA only.
    pub all_heavy_rmsd: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            fnat_threshold: DEFAULT_FNAT_THRESHOLD,
            interface_threshold: DEFAULT_INTERFACE_THRESHOLD,
            all_heavy_rmsd: false,
        }
    }
}

/// The five standard scores for one reconstructed complex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub tm_score: f64,
    pub rmsd: f64,
    pub fnat: f64,
    pub i_rmsd: f64,
    pub l_rmsd: f64,
}

pub const CSV_HEADER: &str = "target,scenario,method,tm_score,rmsd,fnat,i_rmsd,l_rmsd";

pub fn csv_row(target: &str, scenario: &str, method: &str, q: &QualityReport) -> String {
    format!(
        "{target},{scenario},{method},{},{},{},{},{}",
        q.tm_score, q.rmsd, q.fnat, q.i_rmsd, q.l_rmsd
    )
}

fn check_counts(model: &Dimer, native: &Dimer) -> Result<(), MetricsError> {
    if model.receptor.len() != native.receptor.len() {
        return Err(MetricsError::ChainMismatch {
            which: "receptor",
            model: model.receptor.len(),
            native: native.receptor.len(),
        });
    }
    if model.ligand.len() != native.ligand.len() {
        return Err(MetricsError::ChainMismatch {
            which: "ligand",
            model: model.ligand.len(),
            native: native.ligand.len(),
        });
    }
    Ok(())
}

/// RMSD over the whole complex after one optimal superposition, CA atoms by
/// default.
pub fn complex_rmsd(
    model: &Dimer,
    native: &Dimer,
    options: &MetricsOptions,
) -> Result<f64, MetricsError> {
    check_counts(model, native)?;
    let (mut m, mut n): (Vec<Vec3>, Vec<Vec3>) = if options.all_heavy_rmsd {
        (model.receptor.heavy_coords(), native.receptor.heavy_coords())
    } else {
        (model.receptor.ca_coords()?, native.receptor.ca_coords()?)
    };
    let (ml, nl): (Vec<Vec3>, Vec<Vec3>) = if options.all_heavy_rmsd {
        (model.ligand.heavy_coords(), native.ligand.heavy_coords())
    } else {
        (model.ligand.ca_coords()?, native.ligand.ca_coords()?)
    };
    m.extend(ml);
    n.extend(nl);
    if m.len() != n.len() {
        return Err(MetricsError::AtomMismatch { model: m.len(), native: n.len() });
    }
    Ok(kabsch_superpose(&m, &n)?.rmsd)
}

/// Length-normalized distance scale of the TM score.
pub fn tm_d0(total_residues: usize) -> f64 {
    let l = total_residues as f64;
    (1.24 * (l - 15.0).cbrt() - 1.8).max(0.5)
}

/// TM score of the complex under the identity alignment, normalized by the
/// native length. Superposition is iterated on the residues currently within
/// d0 and the best score over iterations is kept.
pub fn tm_score(model: &Dimer, native: &Dimer) -> Result<f64, MetricsError> {
    check_counts(model, native)?;
    let mut m = model.receptor.ca_coords()?;
    m.extend(model.ligand.ca_coords()?);
    let mut n = native.receptor.ca_coords()?;
    n.extend(native.ligand.ca_coords()?);
    let l = n.len();
    let d0 = tm_d0(l);

    let score_for = |subset: &[usize]| -> Result<(f64, Vec<usize>), MetricsError> {
        let ms: Vec<Vec3> = subset.iter().map(|i| m[*i]).collect();
        let ns: Vec<Vec3> = subset.iter().map(|i| n[*i]).collect();
        let sup = kabsch_superpose(&ms, &ns)?;
        let mut score = 0.0;
        let mut close = Vec::new();
        for i in 0..l {
            let d = sup.transform.apply(m[i]).dist(n[i]);
            score += 1.0 / (1.0 + (d / d0).powi(2));
            if d < d0 {
                close.push(i);
            }
        }
        Ok((score / l as f64, close))
    };

    let mut subset: Vec<usize> = (0..l).collect();
    let mut best = 0.0f64;
    for _ in 0..50 {
        let (score, close) = score_for(&subset)?;
        if score > best {
            best = score;
        }
        if close.len() < 3 || close == subset {
            break;
        }
        subset = close;
    }
    Ok(best)
}

/// Fraction of native inter-chain contacts (minimum heavy-atom distance at or
/// below the threshold) preserved in the model.
pub fn fnat(model: &Dimer, native: &Dimer, threshold: f64) -> Result<f64, MetricsError> {
    check_counts(model, native)?;
    let native_contacts = extract_true_contacts(&native.receptor, &native.ligand, threshold)?;
    if native_contacts.is_empty() {
        return Err(MetricsError::NoNativeContacts);
    }
    let mut kept = 0usize;
    for (i, j) in native_contacts.pairs() {
        let li = &model.ligand.residues[i - 1];
        let rj = &model.receptor.residues[j - 1];
        if min_heavy_atom_distance(li, rj) <= threshold {
            kept += 1;
        }
    }
    Ok(kept as f64 / native_contacts.len() as f64)
}

fn interface_ordinals(native: &Dimer, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let lig_atoms = native.ligand.heavy_coords();
    let rec_atoms = native.receptor.heavy_coords();
    let near = |res: &crate::pdb::Residue, other: &[Vec3]| {
        res.atoms
            .iter()
            .any(|a| other.iter().any(|o| a.coord.dist(*o) <= threshold))
    };
    let rec: Vec<usize> = native
        .receptor
        .residues
        .iter()
        .filter(|r| near(r, &lig_atoms))
        .map(|r| r.ordinal)
        .collect();
    let lig: Vec<usize> = native
        .ligand
        .residues
        .iter()
        .filter(|r| near(r, &rec_atoms))
        .map(|r| r.ordinal)
        .collect();
    (rec, lig)
}

fn backbone_of(s: &Structure, ordinals: &[usize]) -> Vec<Vec3> {
    let mut out = Vec::new();
    for o in ordinals {
        let r = &s.residues[o - 1];
        for name in ["N", "CA", "C", "O"] {
            if let Some(a) = r.atom(name) {
                out.push(a.coord);
            }
        }
    }
    out
}

/// Backbone RMSD over the native interface (residues of either chain with a
/// heavy atom within the threshold of the other chain), after superposing the
/// model interface backbone onto the native one.
pub fn interface_rmsd(
    model: &Dimer,
    native: &Dimer,
    threshold: f64,
) -> Result<f64, MetricsError> {
    check_counts(model, native)?;
    let (rec_ord, lig_ord) = interface_ordinals(native, threshold);
    if rec_ord.is_empty() && lig_ord.is_empty() {
        return Err(MetricsError::EmptyInterface(threshold));
    }
    let mut m = backbone_of(&model.receptor, &rec_ord);
    m.extend(backbone_of(&model.ligand, &lig_ord));
    let mut n = backbone_of(&native.receptor, &rec_ord);
    n.extend(backbone_of(&native.ligand, &lig_ord));
    if m.len() != n.len() {
        return Err(MetricsError::AtomMismatch { model: m.len(), native: n.len() });
    }
    Ok(kabsch_superpose(&m, &n)?.rmsd)
}

/// Ligand backbone RMSD in the receptor frame: superpose the model onto the
/// native by receptor backbone only, then measure the ligand deviation with
/// no further fitting.
pub fn ligand_rmsd(model: &Dimer, native: &Dimer) -> Result<f64, MetricsError> {
    check_counts(model, native)?;
    let m_rec = model.receptor.backbone_coords();
    let n_rec = native.receptor.backbone_coords();
    if m_rec.len() != n_rec.len() {
        return Err(MetricsError::AtomMismatch { model: m_rec.len(), native: n_rec.len() });
    }
    let sup = kabsch_superpose(&m_rec, &n_rec)?;
    let m_lig: Vec<Vec3> = model
        .ligand
        .backbone_coords()
        .into_iter()
        .map(|p| sup.transform.apply(p))
        .collect();
    let n_lig = native.ligand.backbone_coords();
    if m_lig.len() != n_lig.len() {
        return Err(MetricsError::AtomMismatch { model: m_lig.len(), native: n_lig.len() });
    }
    Ok(raw_rmsd(&m_lig, &n_lig))
}

fn evaluate_assignment(
    model: &Dimer,
    native: &Dimer,
    options: &MetricsOptions,
) -> Result<QualityReport, MetricsError> {
    Ok(QualityReport {
        tm_score: tm_score(model, native)?,
        rmsd: complex_rmsd(model, native, options)?,
        fnat: fnat(model, native, options.fnat_threshold)?,
        i_rmsd: interface_rmsd(model, native, options.interface_threshold)?,
        l_rmsd: ligand_rmsd(model, native)?,
    })
}

fn is_homodimer(native: &Dimer) -> bool {
    native.receptor.len() == native.ligand.len()
        && native.receptor.residue_names() == native.ligand.residue_names()
}

/// All five metrics for a model against its native complex. Homodimers are
/// scored under both chain assignments and the better value kept per metric.
pub fn evaluate_complex(
    model: &Dimer,
    native: &Dimer,
    options: &MetricsOptions,
) -> Result<QualityReport, MetricsError> {
    let direct = evaluate_assignment(model, native, options)?;
    if !is_homodimer(native) {
        return Ok(direct);
    }
    let swapped = evaluate_assignment(&model.swapped(), native, options)?;
    Ok(QualityReport {
        tm_score: direct.tm_score.max(swapped.tm_score),
        rmsd: direct.rmsd.min(swapped.rmsd),
        fnat: direct.fnat.max(swapped.fnat),
        i_rmsd: direct.i_rmsd.min(swapped.i_rmsd),
        l_rmsd: direct.l_rmsd.min(swapped.l_rmsd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Axis, Mat3, RigidTransform};
    use crate::pdb::{Atom, Residue};

    fn residue(ordinal: usize, name: &str, ca: Vec3, cb_offset: Vec3) -> Residue {
        let mk = |n: &str, c: Vec3| Atom {
            name: n.to_string(),
            element: n.chars().next().unwrap().to_string(),
            coord: c,
        };
        Residue {
            ordinal,
            name: name.to_string(),
            atoms: vec![
                mk("N", ca + Vec3::new(-1.2, 0.3, 0.0)),
                mk("CA", ca),
                mk("C", ca + Vec3::new(1.2, 0.4, 0.0)),
                mk("O", ca + Vec3::new(1.5, 1.5, 0.2)),
                mk("CB", ca + cb_offset),
            ],
        }
    }

    fn chain_along(
        id: char,
        n: usize,
        origin: Vec3,
        step: Vec3,
        cb_offset: Vec3,
    ) -> Structure {
        Structure {
            chain_id: id,
            residues: (0..n)
                .map(|i| {
                    let ca = origin + step * i as f64 + Vec3::new(0.0, 0.0, 0.4 * ((i % 3) as f64));
                    residue(i + 1, "ALA", ca, cb_offset)
                })
                .collect(),
        }
    }

    fn native_pair() -> Dimer {
        let receptor = chain_along(
            'A',
            6,
            Vec3::ZERO,
            Vec3::new(3.8, 0.0, 0.0),
            Vec3::new(0.0, 1.5, 0.0),
        );
        let ligand = chain_along(
            'B',
            5,
            Vec3::new(1.0, 5.0, 0.5),
            Vec3::new(3.8, 0.0, 0.0),
            Vec3::new(0.0, -1.5, 0.0),
        );
        Dimer::new(receptor, ligand)
    }

    fn moved_ligand(native: &Dimer, motion: &RigidTransform) -> Dimer {
        let mut model = native.clone();
        for r in &mut model.ligand.residues {
            for a in &mut r.atoms {
                a.coord = motion.apply(a.coord);
            }
        }
        model
    }

    fn move_whole(d: &Dimer, motion: &RigidTransform) -> Dimer {
        let mut out = d.clone();
        for s in [&mut out.receptor, &mut out.ligand] {
            for r in &mut s.residues {
                for a in &mut r.atoms {
                    a.coord = motion.apply(a.coord);
                }
            }
        }
        out
    }

    #[test]
    fn native_scores_perfectly() {
        let native = native_pair();
        let q = evaluate_complex(&native, &native, &MetricsOptions::default()).unwrap();
        assert_eq!(q.tm_score, 1.0);
        assert!(q.rmsd <= 1e-9);
        assert_eq!(q.fnat, 1.0);
        assert!(q.i_rmsd <= 1e-9);
        assert!(q.l_rmsd <= 1e-9);
    }

    #[test]
    fn rigid_motion_of_the_model_changes_nothing() {
        let native = native_pair();
        let model = moved_ligand(
            &native,
            &RigidTransform::translation(Vec3::new(1.0, 0.4, -0.6)),
        );
        let motion = RigidTransform {
            rotation: Mat3::rotation_about(Axis::Y, 1.1).mul(&Mat3::rotation_about(Axis::X, -0.4)),
            translation: Vec3::new(25.0, -12.0, 7.0),
        };
        let spun = move_whole(&model, &motion);
        let opts = MetricsOptions::default();
        let a = evaluate_complex(&model, &native, &opts).unwrap();
        let b = evaluate_complex(&spun, &native, &opts).unwrap();
        assert!((a.tm_score - b.tm_score).abs() <= 1e-9);
        assert!((a.rmsd - b.rmsd).abs() <= 1e-9);
        assert!((a.fnat - b.fnat).abs() <= 1e-9);
        assert!((a.i_rmsd - b.i_rmsd).abs() <= 1e-9);
        assert!((a.l_rmsd - b.l_rmsd).abs() <= 1e-9);
    }

    #[test]
    fn pure_ligand_translation_reads_back_exactly() {
        let native = native_pair();
        let model = moved_ligand(&native, &RigidTransform::translation(Vec3::new(0.0, 5.0, 0.0)));
        let l = ligand_rmsd(&model, &native).unwrap();
        assert!((l - 5.0).abs() <= 1e-9, "l_rmsd {l}");
        // The one-superposition complex RMSD distributes the error instead.
        let c = complex_rmsd(&model, &native, &MetricsOptions::default()).unwrap();
        assert!(c > 0.0 && c < 5.0);
    }

    #[test]
    fn fnat_counts_preserved_contacts_exactly() {
        // Ten isolated single-atom contact pairs at varying native
        // separation; a +1.2 shift keeps exactly the seven tightest within 6.
        let mk_chain = |id: char, ys: &[f64]| Structure {
            chain_id: id,
            residues: ys
                .iter()
                .enumerate()
                .map(|(i, y)| Residue {
                    ordinal: i + 1,
                    name: "GLY".into(),
                    atoms: vec![Atom {
                        name: "CA".into(),
                        element: "C".into(),
                        coord: Vec3::new(12.0 * i as f64, *y, 0.0),
                    }],
                })
                .collect(),
        };
        let receptor = mk_chain('A', &[0.0; 10]);
        let lig_y: Vec<f64> = (0..10).map(|i| if i < 7 { 4.0 } else { 5.5 }).collect();
        let ligand = mk_chain('B', &lig_y);
        let native = Dimer::new(receptor, ligand);
        let model = moved_ligand(&native, &RigidTransform::translation(Vec3::new(0.0, 1.2, 0.0)));
        let f = fnat(&model, &native, 6.0).unwrap();
        assert_eq!(f, 0.7);
    }

    #[test]
    fn d0_follows_the_length_formula() {
        let oracle = |l: f64| (1.24 * (l - 15.0).cbrt() - 1.8).max(0.5);
        assert!((tm_d0(120) - oracle(120.0)).abs() <= 1e-12);
        assert!((tm_d0(120) - 4.05).abs() < 5e-3);
        assert_eq!(tm_d0(15), 0.5);
        assert_eq!(tm_d0(8), 0.5);
        assert!((tm_d0(200) - oracle(200.0)).abs() <= 1e-12);
    }

    #[test]
    fn tm_score_far_ligand_is_bounded_by_receptor_fraction() {
        let native = native_pair();
        let model = moved_ligand(
            &native,
            &RigidTransform::translation(Vec3::new(500.0, 0.0, 0.0)),
        );
        let t = tm_score(&model, &native).unwrap();
        let l_rec = native.receptor.len() as f64;
        let l = l_rec + native.ligand.len() as f64;
        assert!(t < l_rec / l + 0.01, "tm {t}");
        assert!(t > 0.0);
    }

    #[test]
    fn complex_rmsd_matches_rotation_grid_oracle() {
        let native = native_pair();
        let model = moved_ligand(
            &native,
            &RigidTransform {
                rotation: Mat3::rotation_about(Axis::Z, 0.4),
                translation: Vec3::new(2.0, -1.0, 1.5),
            },
        );
        let mut m = model.receptor.ca_coords().unwrap();
        m.extend(model.ligand.ca_coords().unwrap());
        let mut n = native.receptor.ca_coords().unwrap();
        n.extend(native.ligand.ca_coords().unwrap());
        let grid = crate::geometry::test_oracles::grid_search_rmsd(&m, &n);
        let fast = complex_rmsd(&model, &native, &MetricsOptions::default()).unwrap();
        assert!((fast - grid).abs() <= 1e-3, "{fast} vs {grid}");
    }

    #[test]
    fn interface_rmsd_matches_independent_reimplementation() {
        let native = native_pair();
        let model = moved_ligand(
            &native,
            &RigidTransform {
                rotation: Mat3::rotation_about(Axis::X, 0.15),
                translation: Vec3::new(0.5, 1.0, -0.3),
            },
        );
        let fast = interface_rmsd(&model, &native, 10.0).unwrap();

        // Second implementation, written directly from the definition.
        let mut model_pts = Vec::new();
        let mut native_pts = Vec::new();
        for (ms, ns, other) in [
            (&model.receptor, &native.receptor, &native.ligand),
            (&model.ligand, &native.ligand, &native.receptor),
        ] {
            for (mr, nr) in ms.residues.iter().zip(&ns.residues) {
                let close = nr.atoms.iter().any(|a| {
                    other
                        .residues
                        .iter()
                        .flat_map(|o| o.atoms.iter())
                        .any(|b| a.coord.dist(b.coord) <= 10.0)
                });
                if close {
                    for name in ["N", "CA", "C", "O"] {
                        if let (Some(a), Some(b)) = (mr.atom(name), nr.atom(name)) {
                            model_pts.push(a.coord);
                            native_pts.push(b.coord);
                        }
                    }
                }
            }
        }
        let slow = kabsch_superpose(&model_pts, &native_pts).unwrap().rmsd;
        assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");
    }

    #[test]
    fn homodimer_swap_recovers_perfect_score() {
        let a = chain_along(
            'A',
            6,
            Vec3::ZERO,
            Vec3::new(3.8, 0.0, 0.0),
            Vec3::new(0.0, 1.5, 0.0),
        );
        let mut b = a.clone();
        b.chain_id = 'B';
        let shift = RigidTransform::translation(Vec3::new(0.0, 5.5, 0.0));
        for r in &mut b.residues {
            for at in &mut r.atoms {
                at.coord = shift.apply(at.coord);
            }
        }
        let native = Dimer::new(a.clone(), b.clone());
        // Model presents the same complex with chains exchanged.
        let model = Dimer::new(b, a);
        let q = evaluate_complex(&model, &native, &MetricsOptions::default()).unwrap();
        assert_eq!(q.tm_score, 1.0);
        assert!(q.l_rmsd <= 1e-9);
        assert_eq!(q.fnat, 1.0);
    }

    #[test]
    fn mismatched_chains_error() {
        let native = native_pair();
        let mut short = native.clone();
        short.ligand.residues.pop();
        assert!(matches!(
            evaluate_complex(&short, &native, &MetricsOptions::default()),
            Err(MetricsError::ChainMismatch { which: "ligand", .. })
        ));
    }

    #[test]
    fn csv_row_shape() {
        let q = QualityReport { tm_score: 0.9, rmsd: 1.25, fnat: 1.0, i_rmsd: 0.5, l_rmsd: 2.0 };
        assert_eq!(CSV_HEADER.split(',').count(), 8);
        assert_eq!(csv_row("t1", "optimal", "drl", &q), "t1,optimal,drl,0.9,1.25,1,0.5,2");
    }
}
