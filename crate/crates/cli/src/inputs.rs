//! Input discovery for `analyze` and `plot`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    TickLog,
    Series,
    Questionnaire,
}

#[derive(Clone, Debug)]
pub struct Input {
    pub path: PathBuf,
    /// Unique short name used for output files.
    pub name: String,
    pub kind: Kind,
}

fn classify(path: &Path) -> Result<Option<Kind>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = rdr.headers().with_context(|| format!("reading {}", path.display()))?;
    let has = |name: &str| header.iter().any(|h| h == name);
    let kind = if has("participant") && has("trial") {
        Some(Kind::Questionnaire)
    } else if has("time") && header.iter().any(|h| h.ends_with("_deflection")) {
        Some(Kind::Series)
    } else if has("time") && header.iter().any(|h| h.ends_with("_lambda")) {
        Some(Kind::TickLog)
    } else {
        None
    };
    Ok(kind)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Expands directories (recursively, sorted) and classifies every CSV by
/// its header. Unrecognized files found inside a directory are skipped;
/// unrecognized files named explicitly are an error.
pub fn collect(paths: &[PathBuf]) -> Result<Vec<Input>> {
    let mut found = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files = Vec::new();
            walk(p, &mut files)?;
            for f in files {
                if let Some(kind) = classify(&f)? {
                    found.push((f, kind));
                }
            }
        } else {
            match classify(p)? {
                Some(kind) => found.push((p.clone(), kind)),
                None => bail!("{}: not a tick log, series or questionnaire CSV", p.display()),
            }
        }
    }
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (p, _) in &found {
        *counts.entry(stem(p)).or_default() += 1;
    }
    Ok(found
        .into_iter()
        .map(|(path, kind)| {
            let s = stem(&path);
            let name = match path.parent().and_then(|d| d.file_name()) {
                Some(parent) if counts[&s] > 1 => format!("{}-{s}", parent.to_string_lossy()),
                _ => s,
            };
            Input { path, name, kind }
        })
        .collect())
}
