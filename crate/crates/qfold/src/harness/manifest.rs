//! Benchmark manifests: a versioned plain-text list of targets, one
//! `[target NAME]` section per dimer with `key = value` lines. Paths are
//! resolved relative to the manifest file so suites stay relocatable.

use crate::harness::config::{Method, Scenario};
use crate::harness::HarnessError;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

pub const MANIFEST_HEADER: &str = "qfold-manifest v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContactSource {
    /// Extract true contacts from the native complex at the run threshold.
    ExtractTrue,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub name: String,
    pub scenario: Scenario,
    /// Monomer structure files; None falls back to the named chain of the
    /// native complex (the bound form).
    pub receptor: Option<PathBuf>,
    pub ligand: Option<PathBuf>,
    pub receptor_chain: char,
    pub ligand_chain: char,
    /// Native complex, needed for metrics and for true-contact extraction.
    pub native: Option<PathBuf>,
    pub contacts: ContactSource,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub targets: Vec<TargetSpec>,
}

struct PartialTarget {
    name: String,
    line: usize,
    scenario: Option<Scenario>,
    receptor: Option<PathBuf>,
    ligand: Option<PathBuf>,
    receptor_chain: char,
    ligand_chain: char,
    native: Option<PathBuf>,
    contacts: Option<ContactSource>,
    methods: Vec<Method>,
    seeds: Vec<u64>,
}

impl PartialTarget {
    fn new(name: String, line: usize) -> PartialTarget {
        PartialTarget {
            name,
            line,
            scenario: None,
            receptor: None,
            ligand: None,
            receptor_chain: 'A',
            ligand_chain: 'B',
            native: None,
            contacts: None,
            methods: Vec::new(),
            seeds: Vec::new(),
        }
    }

    fn finish(self) -> Result<TargetSpec, HarnessError> {
        let fail = |what: String| {
            Err(HarnessError::Parse(format!(
                "manifest target {:?} (line {}): {what}",
                self.name, self.line
            )))
        };
        let Some(scenario) = self.scenario else {
            return fail("missing scenario".into());
        };
        let contacts = self.contacts.unwrap_or(ContactSource::ExtractTrue);
        if scenario == Scenario::Optimal && self.native.is_none() {
            return fail("the optimal scenario needs a native complex".into());
        }
        if contacts == ContactSource::ExtractTrue && self.native.is_none() {
            return fail("extracting true contacts needs a native complex".into());
        }
        if self.native.is_none() && (self.receptor.is_none() || self.ligand.is_none()) {
            return fail("without a native complex, receptor and ligand files are required".into());
        }
        if self.receptor_chain == self.ligand_chain {
            return fail(format!("receptor and ligand chains are both {:?}", self.ligand_chain));
        }
        let mut seeds = self.seeds;
        if seeds.is_empty() {
            seeds.push(0);
        }
        let mut methods = self.methods;
        if methods.is_empty() {
            methods.push(Method::Drl);
        }
        Ok(TargetSpec {
            name: self.name,
            scenario,
            receptor: self.receptor,
            ligand: self.ligand,
            receptor_chain: self.receptor_chain,
            ligand_chain: self.ligand_chain,
            native: self.native,
            contacts,
            methods,
            seeds,
        })
    }
}

fn parse_chain(value: &str) -> Result<char, String> {
    let mut chars = value.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphanumeric() => Ok(c),
        _ => Err(format!("bad chain id {value:?} (expected one character)")),
    }
}

/// Parse a manifest; `dir` anchors relative paths (usually the manifest's
/// parent directory).
pub fn parse_manifest<R: Read>(source: R, dir: &Path) -> Result<Manifest, HarnessError> {
    let resolve = |raw: &str| -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            dir.join(p)
        }
    };
    let reader = BufReader::new(source);
    let mut saw_header = false;
    let mut open: Option<PartialTarget> = None;
    let mut targets: Vec<TargetSpec> = Vec::new();
    let mut names: Vec<String> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let bad = |what: String| HarnessError::Parse(format!("manifest line {lineno}: {what}"));
        let line = line.map_err(|e| bad(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_header {
            if content != MANIFEST_HEADER {
                return Err(bad(format!("expected header {MANIFEST_HEADER:?}, got {content:?}")));
            }
            saw_header = true;
            continue;
        }
        if let Some(section) = content.strip_prefix('[') {
            let section = section
                .strip_suffix(']')
                .ok_or_else(|| bad("unterminated section header".into()))?;
            let name = section
                .strip_prefix("target ")
                .ok_or_else(|| bad(format!("expected [target NAME], got [{section}]")))?
                .trim();
            if name.is_empty() {
                return Err(bad("empty target name".into()));
            }
            // Names become file stems for models and logs.
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
                return Err(bad(format!(
                    "target name {name:?} may only use letters, digits, '.', '_' and '-'"
                )));
            }
            if names.iter().any(|n| n == name) {
                return Err(bad(format!("duplicate target name {name:?}")));
            }
            names.push(name.to_string());
            if let Some(done) = open.take() {
                targets.push(done.finish()?);
            }
            open = Some(PartialTarget::new(name.to_string(), lineno));
            continue;
        }
        let Some(target) = open.as_mut() else {
            return Err(bad(format!("{content:?} appears before any [target] section")));
        };
        let (key, value) =
            content.split_once('=').ok_or_else(|| bad("expected key = value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let result: Result<(), String> = match key {
            "scenario" => Scenario::parse(value).map(|s| target.scenario = Some(s)),
            "receptor" => {
                target.receptor = Some(resolve(value));
                Ok(())
            }
            "ligand" => {
                target.ligand = Some(resolve(value));
                Ok(())
            }
            "native" => {
                target.native = Some(resolve(value));
                Ok(())
            }
            "receptor_chain" => parse_chain(value).map(|c| target.receptor_chain = c),
            "ligand_chain" => parse_chain(value).map(|c| target.ligand_chain = c),
            "contacts" => {
                target.contacts = Some(if value == "extract-true" {
                    ContactSource::ExtractTrue
                } else {
                    ContactSource::File(resolve(value))
                });
                Ok(())
            }
            "methods" => value
                .split(',')
                .map(|m| Method::parse(m.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map(|ms| target.methods = ms),
            "seeds" => value
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed {s:?}")))
                .collect::<Result<Vec<_>, _>>()
                .map(|ss| target.seeds = ss),
            other => Err(format!("unknown target key {other:?}")),
        };
        result.map_err(|e| bad(e))?;
    }

    if !saw_header {
        return Err(HarnessError::Parse(format!(
            "manifest is empty (want {MANIFEST_HEADER:?})"
        )));
    }
    if let Some(done) = open.take() {
        targets.push(done.finish()?);
    }
    if targets.is_empty() {
        return Err(HarnessError::Parse("manifest lists no targets".into()));
    }
    Ok(Manifest { targets })
}

/// Read and parse a manifest file, resolving paths against its directory.
pub fn read_manifest(path: &Path) -> Result<Manifest, HarnessError> {
    let file = std::fs::File::open(path)
        .map_err(|e| HarnessError::Parse(format!("cannot open manifest {path:?}: {e}")))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_manifest(file, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
qfold-manifest v1
# two tiny targets
[target alpha]
scenario = optimal
native = pdb/alpha.pdb
methods = drl, gd
seeds = 1, 2, 3

[target beta]
scenario = realistic
receptor = pdb/beta_r.pdb
ligand = pdb/beta_l.pdb
native = pdb/beta.pdb
contacts = contacts/beta.txt
receptor_chain = X
ligand_chain = Y
";

    #[test]
    fn parses_sections_defaults_and_paths() {
        let m = parse_manifest(GOOD.as_bytes(), Path::new("/suite")).unwrap();
        assert_eq!(m.targets.len(), 2);
        let a = &m.targets[0];
        assert_eq!(a.name, "alpha");
        assert_eq!(a.scenario, Scenario::Optimal);
        assert_eq!(a.native.as_deref(), Some(Path::new("/suite/pdb/alpha.pdb")));
        assert_eq!(a.contacts, ContactSource::ExtractTrue);
        assert_eq!(a.methods, vec![Method::Drl, Method::Gd]);
        assert_eq!(a.seeds, vec![1, 2, 3]);
        assert_eq!((a.receptor_chain, a.ligand_chain), ('A', 'B'));

        let b = &m.targets[1];
        assert_eq!(b.contacts, ContactSource::File("/suite/contacts/beta.txt".into()));
        assert_eq!(b.methods, vec![Method::Drl]);
        assert_eq!(b.seeds, vec![0]);
        assert_eq!((b.receptor_chain, b.ligand_chain), ('X', 'Y'));
    }

    #[test]
    fn optimal_without_native_is_rejected() {
        let text = "qfold-manifest v1\n[target x]\nscenario = optimal\nreceptor = r.pdb\nligand = l.pdb\n";
        let err = parse_manifest(text.as_bytes(), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("native"), "{err}");
    }

    #[test]
    fn structural_mistakes_are_reported_with_lines() {
        for (text, needle) in [
            ("qfold-manifest v2\n", "header"),
            ("qfold-manifest v1\nscenario = optimal\n", "before any"),
            ("qfold-manifest v1\n[target a]\nscenario = optimal\nnative = n\n[target a]\nscenario = optimal\nnative = n\n", "duplicate"),
            ("qfold-manifest v1\n[target a]\nnative = n\n", "scenario"),
            ("qfold-manifest v1\n[target a]\nscenario = optimal\nnative = n\nwobble = 3\n", "unknown"),
            ("qfold-manifest v1\n", "no targets"),
            ("qfold-manifest v1\n[target a]\nscenario = optimal\nnative = n\nligand_chain = A\n", "chains"),
        ] {
            let err = parse_manifest(text.as_bytes(), Path::new(".")).unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?} -> {err}");
        }
    }
}
