//! Inter-chain contact restraints and their energy.
//!
//! A contact between ligand residue `i` and receptor residue `j` is scored
//! with a flat-bottom well: zero inside `[lb, ub]`, quadratic walls of width
//! `sd` on both sides, and a linear tail beyond `ub + sd` that continues the
//! wall continuously (value 1 at the seam, slope `1/sd`). The linear tail
//! keeps the pull toward the receptor informative at any separation instead
//! of exploding quadratically.
//!
//! Restraint ordinals are 1-based and always refer to the renumbered chains
//! produced by [`crate::pdb::parse_pdb`].

use crate::geometry::{Axis, Mat3, Pose, Vec3};
use crate::pdb::{PdbError, Residue, Structure};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Read, Write};
use thiserror::Error;

pub const DEFAULT_CONTACT_THRESHOLD: f64 = 6.0;
pub const DEFAULT_LOWER_BOUND: f64 = 0.0;
pub const DEFAULT_SD: f64 = 0.1;
/// CB distances run longer than the heavy-atom minimum that defines a
/// contact, so the differentiable CB objective loosens the well by default.
pub const DEFAULT_CB_UPPER_BOUND: f64 = 8.0;

#[derive(Debug, Error)]
pub enum RestraintError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("structure error: {0}")]
    Pdb(#[from] PdbError),
    #[error("contact line {line}: {what}")]
    BadLine { line: usize, what: String },
    #[error("duplicate contact pair ({0}, {1})")]
    DuplicatePair(usize, usize),
    #[error("contact pair ({i}, {j}) outside chain lengths {ligand_len} x {receptor_len}")]
    OrdinalOutOfRange { i: usize, j: usize, ligand_len: usize, receptor_len: usize },
    #[error("restraint ({i}, {j}) ill-formed: {what}")]
    BadRestraint { i: usize, j: usize, what: String },
    #[error("contact set is empty")]
    EmptyContactSet,
    #[error("native contact set is empty")]
    NoNativeContacts,
    #[error("precision must be in (0, 1], got {0}")]
    BadPrecision(f64),
}

/// One distance restraint between ligand residue `i` and receptor residue `j`
/// (both 1-based ordinals).
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRestraint {
    pub ligand_res: usize,
    pub receptor_res: usize,
    pub lb: f64,
    pub ub: f64,
    pub sd: f64,
    pub probability: Option<f64>,
}

/// Validated collection of restraints tied to a ligand/receptor chain pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    restraints: Vec<ContactRestraint>,
    ligand_len: usize,
    receptor_len: usize,
}

impl ContactSet {
    pub fn new(
        restraints: Vec<ContactRestraint>,
        ligand_len: usize,
        receptor_len: usize,
    ) -> Result<ContactSet, RestraintError> {
        let mut seen: Vec<(usize, usize)> = Vec::with_capacity(restraints.len());
        for r in &restraints {
            let pair = (r.ligand_res, r.receptor_res);
            if r.ligand_res == 0
                || r.ligand_res > ligand_len
                || r.receptor_res == 0
                || r.receptor_res > receptor_len
            {
                return Err(RestraintError::OrdinalOutOfRange {
                    i: r.ligand_res,
                    j: r.receptor_res,
                    ligand_len,
                    receptor_len,
                });
            }
            if seen.contains(&pair) {
                return Err(RestraintError::DuplicatePair(pair.0, pair.1));
            }
            seen.push(pair);
            if !(r.lb <= r.ub) || !r.sd.is_finite() || r.sd <= 0.0 {
                return Err(RestraintError::BadRestraint {
                    i: r.ligand_res,
                    j: r.receptor_res,
                    what: format!("lb {} ub {} sd {}", r.lb, r.ub, r.sd),
                });
            }
            if let Some(p) = r.probability {
                if !(0.0..=1.0).contains(&p) {
                    return Err(RestraintError::BadRestraint {
                        i: r.ligand_res,
                        j: r.receptor_res,
                        what: format!("probability {p}"),
                    });
                }
            }
        }
        Ok(ContactSet { restraints, ligand_len, receptor_len })
    }

    pub fn restraints(&self) -> &[ContactRestraint] {
        &self.restraints
    }

    pub fn len(&self) -> usize {
        self.restraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.restraints.is_empty()
    }

    pub fn ligand_len(&self) -> usize {
        self.ligand_len
    }

    pub fn receptor_len(&self) -> usize {
        self.receptor_len
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.restraints.iter().map(|r| (r.ligand_res, r.receptor_res))
    }

    /// Same pairs with a different well: used to swap in the loosened CB
    /// upper bound for the differentiable objective.
    pub fn with_bounds(&self, lb: f64, ub: f64, sd: f64) -> ContactSet {
        let restraints = self
            .restraints
            .iter()
            .map(|r| ContactRestraint { lb, ub, sd, ..r.clone() })
            .collect();
        ContactSet { restraints, ligand_len: self.ligand_len, receptor_len: self.receptor_len }
    }
}

/// Flat-bottom well with quadratic walls of width `sd` and a linear tail.
pub fn flat_bottom_energy(x: f64, lb: f64, ub: f64, sd: f64) -> f64 {
    if x < lb {
        ((x - lb) / sd).powi(2)
    } else if x <= ub {
        0.0
    } else if x <= ub + sd {
        ((x - ub) / sd).powi(2)
    } else {
        1.0 + (x - (ub + sd)) / sd
    }
}

/// d/dx of [`flat_bottom_energy`].
pub fn flat_bottom_derivative(x: f64, lb: f64, ub: f64, sd: f64) -> f64 {
    if x < lb {
        2.0 * (x - lb) / (sd * sd)
    } else if x <= ub {
        0.0
    } else if x <= ub + sd {
        2.0 * (x - ub) / (sd * sd)
    } else {
        1.0 / sd
    }
}

pub fn restraint_energy(x: f64, r: &ContactRestraint) -> f64 {
    flat_bottom_energy(x, r.lb, r.ub, r.sd)
}

/// Smallest distance between heavy atoms of two residues.
pub fn min_heavy_atom_distance(a: &Residue, b: &Residue) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.atoms {
        for q in &b.atoms {
            let d = p.coord.dist(q.coord);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// All residue pairs whose minimum heavy-atom distance is at or below
/// `threshold`, as restraints with `lb = 0`, `ub = threshold`, default `sd`,
/// probability 1.
pub fn extract_true_contacts(
    receptor: &Structure,
    ligand: &Structure,
    threshold: f64,
) -> Result<ContactSet, RestraintError> {
    if receptor.is_empty() || ligand.is_empty() {
        return Err(PdbError::EmptyStructure.into());
    }
    let mut restraints = Vec::new();
    for li in &ligand.residues {
        for rj in &receptor.residues {
            if min_heavy_atom_distance(li, rj) <= threshold {
                restraints.push(ContactRestraint {
                    ligand_res: li.ordinal,
                    receptor_res: rj.ordinal,
                    lb: DEFAULT_LOWER_BOUND,
                    ub: threshold,
                    sd: DEFAULT_SD,
                    probability: Some(1.0),
                });
            }
        }
    }
    ContactSet::new(restraints, ligand.len(), receptor.len())
}

/// Which inter-residue distance a restraint is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// CB-CB (CA for glycine): smooth in the pose, used by gradient descent.
    Cb,
    /// Minimum over heavy-atom pairs: matches the contact definition, used
    /// for reporting and for the agent's reward.
    MinHeavy,
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyOptions {
    pub kind: DistanceKind,
    /// Weight each term by its restraint probability (1 when absent).
    pub prob_weight: bool,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions { kind: DistanceKind::MinHeavy, prob_weight: false }
    }
}

/// Energy terms bound to concrete coordinates so per-pose evaluation does no
/// lookups. Ligand coordinates are stored unposed; the pose is applied at
/// evaluation time.
pub struct PreparedEnergy {
    terms: Vec<Term>,
}

struct Term {
    lig_atoms: Vec<Vec3>,
    rec_atoms: Vec<Vec3>,
    lb: f64,
    ub: f64,
    sd: f64,
    weight: f64,
}

impl PreparedEnergy {
    pub fn new(
        receptor: &Structure,
        ligand: &Structure,
        contacts: &ContactSet,
        options: EnergyOptions,
    ) -> Result<PreparedEnergy, RestraintError> {
        if contacts.is_empty() {
            return Err(RestraintError::EmptyContactSet);
        }
        if contacts.ligand_len() != ligand.len() || contacts.receptor_len() != receptor.len() {
            return Err(RestraintError::OrdinalOutOfRange {
                i: contacts.ligand_len(),
                j: contacts.receptor_len(),
                ligand_len: ligand.len(),
                receptor_len: receptor.len(),
            });
        }
        let mut terms = Vec::with_capacity(contacts.len());
        for r in contacts.restraints() {
            let li = &ligand.residues[r.ligand_res - 1];
            let rj = &receptor.residues[r.receptor_res - 1];
            let (lig_atoms, rec_atoms) = match options.kind {
                DistanceKind::Cb => (vec![li.cb_or_ca()?], vec![rj.cb_or_ca()?]),
                DistanceKind::MinHeavy => (
                    li.atoms.iter().map(|a| a.coord).collect(),
                    rj.atoms.iter().map(|a| a.coord).collect(),
                ),
            };
            let weight = if options.prob_weight { r.probability.unwrap_or(1.0) } else { 1.0 };
            terms.push(Term { lig_atoms, rec_atoms, lb: r.lb, ub: r.ub, sd: r.sd, weight });
        }
        Ok(PreparedEnergy { terms })
    }

    fn term_distance(term: &Term, pose: &Pose) -> f64 {
        let mut best = f64::INFINITY;
        for la in &term.lig_atoms {
            let p = pose.apply(*la);
            for ra in &term.rec_atoms {
                let d = p.dist(*ra);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    pub fn energy(&self, pose: &Pose) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * flat_bottom_energy(Self::term_distance(t, pose), t.lb, t.ub, t.sd))
            .sum()
    }

    /// Gradient of the energy with respect to pose parameters
    /// `(tx, ty, tz, rx, ry, rz)` at `params` (see [`Pose::from_params`]).
    /// For the minimum-heavy-atom distance this is the subgradient through
    /// the closest pair.
    pub fn gradient(&self, params: [f64; 6], center: Vec3) -> [f64; 6] {
        let [_, _, _, rx, ry, rz] = params;
        let pose = Pose::from_params(params, center);

        let mx = Mat3::rotation_about(Axis::X, rx);
        let my = Mat3::rotation_about(Axis::Y, ry);
        let mz = Mat3::rotation_about(Axis::Z, rz);
        let dx = rotation_derivative(Axis::X, rx);
        let dy = rotation_derivative(Axis::Y, ry);
        let dz = rotation_derivative(Axis::Z, rz);
        // R = Rz Ry Rx, differentiated one factor at a time.
        let dr = [
            mz.mul(&my).mul(&dx),
            mz.mul(&dy).mul(&mx),
            dz.mul(&my).mul(&mx),
        ];

        let mut grad = [0.0f64; 6];
        for term in &self.terms {
            let mut best = (f64::INFINITY, Vec3::ZERO, Vec3::ZERO);
            for la in &term.lig_atoms {
                let p = pose.apply(*la);
                for ra in &term.rec_atoms {
                    let d = p.dist(*ra);
                    if d < best.0 {
                        best = (d, *la, *ra);
                    }
                }
            }
            let (x, la, ra) = best;
            if x <= 1e-12 {
                continue;
            }
            let df = term.weight * flat_bottom_derivative(x, term.lb, term.ub, term.sd);
            if df == 0.0 {
                continue;
            }
            let posed = pose.apply(la);
            let unit = (posed - ra) * (1.0 / x);
            grad[0] += df * unit.x;
            grad[1] += df * unit.y;
            grad[2] += df * unit.z;
            let local = la - center;
            for (k, d) in dr.iter().enumerate() {
                grad[3 + k] += df * unit.dot(d.mul_vec(local));
            }
        }
        grad
    }
}

fn rotation_derivative(axis: Axis, radians: f64) -> Mat3 {
    let (s, c) = radians.sin_cos();
    match axis {
        Axis::X => Mat3([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]]),
        Axis::Y => Mat3([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]]),
        Axis::Z => Mat3([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]]),
    }
}

/// Total restraint energy of the posed ligand against the fixed receptor.
pub fn contact_energy(
    pose: &Pose,
    receptor: &Structure,
    ligand: &Structure,
    contacts: &ContactSet,
    kind: DistanceKind,
) -> Result<f64, RestraintError> {
    let prepared =
        PreparedEnergy::new(receptor, ligand, contacts, EnergyOptions { kind, prob_weight: false })?;
    Ok(prepared.energy(pose))
}

/// Gradient of [`contact_energy`] with respect to the 6 pose parameters.
pub fn contact_energy_gradient(
    params: [f64; 6],
    center: Vec3,
    receptor: &Structure,
    ligand: &Structure,
    contacts: &ContactSet,
    kind: DistanceKind,
) -> Result<[f64; 6], RestraintError> {
    let prepared =
        PreparedEnergy::new(receptor, ligand, contacts, EnergyOptions { kind, prob_weight: false })?;
    Ok(prepared.gradient(params, center))
}

/// Parse a contact file: whitespace-separated `i j lb ub p` per line with the
/// probability optional, `#` starting a comment. Ordinals are validated
/// against the given chain lengths; `sd` is not stored in the file and takes
/// the default.
pub fn read_contact_file<R: Read>(
    source: R,
    ligand_len: usize,
    receptor_len: usize,
) -> Result<ContactSet, RestraintError> {
    let reader = BufReader::new(source);
    let mut restraints = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(RestraintError::BadLine {
                line: lineno,
                what: format!("expected 4 or 5 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, RestraintError> {
            s.parse().map_err(|_| RestraintError::BadLine {
                line: lineno,
                what: format!("bad {what} {s:?}"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<usize, RestraintError> {
            s.parse().map_err(|_| RestraintError::BadLine {
                line: lineno,
                what: format!("bad {what} {s:?}"),
            })
        };
        restraints.push(ContactRestraint {
            ligand_res: parse_u(fields[0], "ligand ordinal")?,
            receptor_res: parse_u(fields[1], "receptor ordinal")?,
            lb: parse_f(fields[2], "lower bound")?,
            ub: parse_f(fields[3], "upper bound")?,
            sd: DEFAULT_SD,
            probability: fields.get(4).map(|s| parse_f(s, "probability")).transpose()?,
        });
    }
    ContactSet::new(restraints, ligand_len, receptor_len)
}

pub fn write_contact_file<W: Write>(w: &mut W, contacts: &ContactSet) -> std::io::Result<()> {
    for r in contacts.restraints() {
        match r.probability {
            Some(p) => writeln!(w, "{} {} {} {} {}", r.ligand_res, r.receptor_res, r.lb, r.ub, p)?,
            None => writeln!(w, "{} {} {} {}", r.ligand_res, r.receptor_res, r.lb, r.ub)?,
        }
    }
    Ok(())
}

/// Dilute a true contact set down to a target precision by adding uniformly
/// sampled non-contact pairs (recall stays 1). Deterministic for a given
/// seed.
pub fn inject_false_contacts(
    contacts: &ContactSet,
    precision: f64,
    seed: u64,
) -> Result<ContactSet, RestraintError> {
    if !(precision > 0.0 && precision <= 1.0) {
        return Err(RestraintError::BadPrecision(precision));
    }
    if contacts.is_empty() {
        return Err(RestraintError::EmptyContactSet);
    }
    let n_true = contacts.len();
    let n_false = ((n_true as f64) * (1.0 - precision) / precision).round() as usize;
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for i in 1..=contacts.ligand_len() {
        for j in 1..=contacts.receptor_len() {
            if !contacts.pairs().any(|p| p == (i, j)) {
                candidates.push((i, j));
            }
        }
    }
    let n_false = n_false.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let template = &contacts.restraints()[0];
    let mut restraints = contacts.restraints().to_vec();
    for (i, j) in candidates.into_iter().take(n_false) {
        restraints.push(ContactRestraint {
            ligand_res: i,
            receptor_res: j,
            lb: template.lb,
            ub: template.ub,
            sd: template.sd,
            probability: None,
        });
    }
    ContactSet::new(restraints, contacts.ligand_len(), contacts.receptor_len())
}

/// Precision, recall, and F1 of a predicted contact set against the native
/// pairs.
pub fn contact_prf(
    predicted: &ContactSet,
    native: &ContactSet,
) -> Result<(f64, f64, f64), RestraintError> {
    if native.is_empty() {
        return Err(RestraintError::NoNativeContacts);
    }
    if predicted.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let native_pairs: Vec<(usize, usize)> = native.pairs().collect();
    let hits = predicted.pairs().filter(|p| native_pairs.contains(p)).count() as f64;
    let precision = hits / predicted.len() as f64;
    let recall = hits / native.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdb::Atom;
    use proptest::prelude::*;
    use rand::Rng;

    fn residue(ordinal: usize, atoms: &[(&str, f64, f64, f64)]) -> Residue {
        Residue {
            ordinal,
            name: "ALA".into(),
            atoms: atoms
                .iter()
                .map(|(n, x, y, z)| Atom {
                    name: n.to_string(),
                    element: n.chars().next().unwrap().to_string(),
                    coord: Vec3::new(*x, *y, *z),
                })
                .collect(),
        }
    }

    fn chain(id: char, residues: Vec<Residue>) -> Structure {
        Structure { chain_id: id, residues }
    }

    #[test]
    fn well_values_at_pinned_points() {
        // lb 0, ub 6, sd 0.1
        assert!((flat_bottom_energy(5.0, 0.0, 6.0, 0.1) - 0.0).abs() <= 1e-12);
        assert!((flat_bottom_energy(6.05, 0.0, 6.0, 0.1) - 0.25).abs() <= 1e-12);
        assert!((flat_bottom_energy(6.2, 0.0, 6.0, 0.1) - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn well_is_continuous_at_breakpoints() {
        let (lb, ub, sd) = (2.0, 6.0, 0.1);
        let eps = 1e-9;
        for bp in [lb, ub, ub + sd] {
            let below = flat_bottom_energy(bp - eps, lb, ub, sd);
            let above = flat_bottom_energy(bp + eps, lb, ub, sd);
            assert!(
                (below - above).abs() <= 1e-6,
                "jump at {bp}: {below} vs {above}"
            );
        }
    }

    #[test]
    fn lower_wall_is_quadratic() {
        assert!((flat_bottom_energy(1.9, 2.0, 6.0, 0.1) - 1.0).abs() <= 1e-12);
    }

    proptest! {
        #[test]
        fn prop_well_nonnegative_and_flat_inside(x in 0.0f64..20.0) {
            let e = flat_bottom_energy(x, 2.0, 6.0, 0.1);
            prop_assert!(e >= 0.0);
            if (2.0..=6.0).contains(&x) {
                prop_assert!(e == 0.0);
            }
        }
    }

    fn two_chain_fixture() -> (Structure, Structure) {
        // Receptor at origin, ligand nearby: residue pairs (1,1) and (2,2)
        // are within 6, the cross pairs are not all.
        let receptor = chain(
            'A',
            vec![
                residue(1, &[("CA", 0.0, 0.0, 0.0), ("CB", 1.0, 0.0, 0.0)]),
                residue(2, &[("CA", 0.0, 4.0, 0.0), ("CB", 1.0, 4.0, 0.0)]),
            ],
        );
        let ligand = chain(
            'B',
            vec![
                residue(1, &[("CA", 5.0, 0.0, 0.0), ("CB", 4.5, 0.0, 0.0)]),
                residue(2, &[("CA", 5.0, 9.0, 0.0), ("CB", 4.5, 9.0, 0.0)]),
            ],
        );
        (receptor, ligand)
    }

    #[test]
    fn extracts_expected_pairs() {
        let (receptor, ligand) = two_chain_fixture();
        let set = extract_true_contacts(&receptor, &ligand, 6.0).unwrap();
        // Hand check: min-heavy distances are
        // (1,1): |4.5-1.0| = 3.5   contact
        // (1,2): CB/CB sqrt(3.5^2+4^2) = 5.315  contact
        // (2,1): sqrt(3.5^2 + 81) > 6
        // (2,2): sqrt(3.5^2 + 25) = 6.103 > 6
        let pairs: Vec<_> = set.pairs().collect();
        assert_eq!(pairs, vec![(1, 1), (1, 2)]);
        assert!(set.restraints().iter().all(|r| r.ub == 6.0 && r.lb == 0.0));
    }

    #[test]
    fn energy_zero_at_native_positive_when_pulled_apart() {
        let (receptor, ligand) = two_chain_fixture();
        let set = extract_true_contacts(&receptor, &ligand, 6.0).unwrap();
        let center = ligand.centroid();
        let native = Pose::identity(center);
        let e0 = contact_energy(&native, &receptor, &ligand, &set, DistanceKind::MinHeavy).unwrap();
        assert_eq!(e0, 0.0);
        let far = Pose::from_params([30.0, 0.0, 0.0, 0.0, 0.0, 0.0], center);
        let ef = contact_energy(&far, &receptor, &ligand, &set, DistanceKind::MinHeavy).unwrap();
        assert!(ef > 100.0);
    }

    #[test]
    fn empty_contact_set_is_constructible_but_not_evaluable() {
        let (receptor, ligand) = two_chain_fixture();
        let set = ContactSet::new(vec![], 2, 2).unwrap();
        assert!(set.is_empty());
        let pose = Pose::identity(Vec3::ZERO);
        assert!(matches!(
            contact_energy(&pose, &receptor, &ligand, &set, DistanceKind::MinHeavy),
            Err(RestraintError::EmptyContactSet)
        ));
    }

    #[test]
    fn constructor_rejects_bad_sets() {
        let r = |i, j| ContactRestraint {
            ligand_res: i,
            receptor_res: j,
            lb: 0.0,
            ub: 6.0,
            sd: 0.1,
            probability: None,
        };
        assert!(matches!(
            ContactSet::new(vec![r(1, 1), r(1, 1)], 2, 2),
            Err(RestraintError::DuplicatePair(1, 1))
        ));
        assert!(matches!(
            ContactSet::new(vec![r(3, 1)], 2, 2),
            Err(RestraintError::OrdinalOutOfRange { .. })
        ));
        let mut bad = r(1, 1);
        bad.sd = 0.0;
        assert!(matches!(
            ContactSet::new(vec![bad], 2, 2),
            Err(RestraintError::BadRestraint { .. })
        ));
    }

    #[test]
    fn contact_file_round_trip() {
        let input = "\
# predicted contacts
1 1 0 6 0.92
1 2 0 6 0.77
2 2 0 6
";
        let set = read_contact_file(input.as_bytes(), 2, 2).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.restraints()[0].probability, Some(0.92));
        assert_eq!(set.restraints()[2].probability, None);
        let mut out = Vec::new();
        write_contact_file(&mut out, &set).unwrap();
        let reread = read_contact_file(out.as_slice(), 2, 2).unwrap();
        assert_eq!(set, reread);
        let mut out2 = Vec::new();
        write_contact_file(&mut out2, &reread).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn contact_file_bad_lines_report_position() {
        match read_contact_file("1 1 0\n".as_bytes(), 2, 2) {
            Err(RestraintError::BadLine { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match read_contact_file("# ok\n1 x 0 6 1\n".as_bytes(), 2, 2) {
            Err(RestraintError::BadLine { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prf_on_hand_case() {
        let mk = |pairs: &[(usize, usize)]| {
            ContactSet::new(
                pairs
                    .iter()
                    .map(|(i, j)| ContactRestraint {
                        ligand_res: *i,
                        receptor_res: *j,
                        lb: 0.0,
                        ub: 6.0,
                        sd: 0.1,
                        probability: None,
                    })
                    .collect(),
                3,
                3,
            )
            .unwrap()
        };
        let predicted = mk(&[(1, 1), (1, 2)]);
        let native = mk(&[(1, 1), (2, 2)]);
        let (p, r, f1) = contact_prf(&predicted, &native).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn injection_hits_requested_precision() {
        let mut restraints = Vec::new();
        for i in 1..=4 {
            for j in 1..=2 {
                restraints.push(ContactRestraint {
                    ligand_res: i,
                    receptor_res: j,
                    lb: 0.0,
                    ub: 6.0,
                    sd: 0.1,
                    probability: Some(1.0),
                });
            }
        }
        let truth = ContactSet::new(restraints, 10, 10).unwrap();
        let diluted = inject_false_contacts(&truth, 0.4, 7).unwrap();
        // 8 true pairs at precision 0.4 -> 12 injected.
        assert_eq!(diluted.len(), 20);
        let (p, r, _) = contact_prf(&diluted, &truth).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
        let again = inject_false_contacts(&truth, 0.4, 7).unwrap();
        assert_eq!(diluted, again);
        let other_seed = inject_false_contacts(&truth, 0.4, 8).unwrap();
        assert_ne!(diluted, other_seed);
    }

    /// Central finite differences around random poses, skipping samples whose
    /// restraint distances sit near a breakpoint of the well.
    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 100 {
            let nl = rng.random_range(2..5usize);
            let nr = rng.random_range(2..5usize);
            let mut coord = |span: f64| {
                Vec3::new(
                    rng.random_range(-span..span),
                    rng.random_range(-span..span),
                    rng.random_range(-span..span),
                )
            };
            let ligand = chain(
                'B',
                (1..=nl)
                    .map(|i| {
                        let c = coord(4.0) + Vec3::new(6.0, 0.0, 0.0);
                        residue(i, &[("CB", c.x, c.y, c.z)])
                    })
                    .collect(),
            );
            let receptor = chain(
                'A',
                (1..=nr)
                    .map(|i| {
                        let c = coord(4.0);
                        residue(i, &[("CB", c.x, c.y, c.z)])
                    })
                    .collect(),
            );
            let mut restraints = Vec::new();
            for i in 1..=nl {
                for j in 1..=nr {
                    if rng.random_range(0.0..1.0) < 0.6 {
                        restraints.push(ContactRestraint {
                            ligand_res: i,
                            receptor_res: j,
                            lb: 2.0,
                            ub: 6.0,
                            sd: 0.1,
                            probability: None,
                        });
                    }
                }
            }
            if restraints.is_empty() {
                continue;
            }
            let set = ContactSet::new(restraints, nl, nr).unwrap();
            let center = ligand.centroid();
            let params = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            ];

            // Reject samples near well breakpoints where the derivative jumps.
            let prepared = PreparedEnergy::new(
                &receptor,
                &ligand,
                &set,
                EnergyOptions { kind: DistanceKind::Cb, prob_weight: false },
            )
            .unwrap();
            let pose = Pose::from_params(params, center);
            let near_breakpoint = set.restraints().iter().any(|r| {
                let li = &ligand.residues[r.ligand_res - 1];
                let rj = &receptor.residues[r.receptor_res - 1];
                let x = pose.apply(li.atoms[0].coord).dist(rj.atoms[0].coord);
                [r.lb, r.ub, r.ub + r.sd].iter().any(|bp| (x - bp).abs() < 1e-3)
            });
            if near_breakpoint {
                continue;
            }

            let analytic = prepared.gradient(params, center);
            let h = 1e-5;
            for k in 0..6 {
                let mut hi = params;
                let mut lo = params;
                hi[k] += h;
                lo[k] -= h;
                let ehi = prepared.energy(&Pose::from_params(hi, center));
                let elo = prepared.energy(&Pose::from_params(lo, center));
                let fd = (ehi - elo) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs()).max(1.0);
                assert!(
                    (analytic[k] - fd).abs() / denom <= 1e-4,
                    "param {k}: analytic {} vs fd {}",
                    analytic[k],
                    fd
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn prepared_energy_equals_free_function() {
        let (receptor, ligand) = two_chain_fixture();
        let set = extract_true_contacts(&receptor, &ligand, 6.0).unwrap();
        let prepared = PreparedEnergy::new(
            &receptor,
            &ligand,
            &set,
            EnergyOptions::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let params = [
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            let pose = Pose::from_params(params, ligand.centroid());
            let via_fn =
                contact_energy(&pose, &receptor, &ligand, &set, DistanceKind::MinHeavy).unwrap();
            assert!((prepared.energy(&pose) - via_fn).abs() <= 1e-12);
        }
    }
}
