//! Human-readable, checksummed sidecar files for scaler parameters and
//! split manifests. The trailing checksum line covers every byte above
//! it; any edit to a stored artifact is caught on read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ScalerFeature, ScalerParams, SplitClass, SplitManifest};
use crate::table::hex;
use crate::{Error, Result};

fn checksum_line(body: &str) -> String {
    let mut h = Sha256::new();
    h.update(body.as_bytes());
    format!("checksum = sha256:{}\n", hex(&h.finalize()))
}

fn write_checksummed(path: &Path, body: String) -> Result<()> {
    let line = checksum_line(&body);
    fs::write(path, body + &line)?;
    Ok(())
}

fn read_checksummed(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let at = text
        .rfind("checksum = sha256:")
        .ok_or_else(|| Error::Consistency(format!("{}: missing checksum line", path.display())))?;
    let (body, line) = text.split_at(at);
    if line != checksum_line(body) {
        return Err(Error::Consistency(format!(
            "{}: checksum mismatch, the file was modified after it was written",
            path.display()
        )));
    }
    Ok(body.to_string())
}

fn field<'a>(line: Option<&'a str>, key: &str, path: &Path) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key)?.strip_prefix(" = "))
        .ok_or_else(|| Error::Parse(format!("{}: expected `{key} = ...` line", path.display())))
}

fn parse<T: std::str::FromStr>(value: &str, what: &str, path: &Path) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("{}: bad {what} {value:?}", path.display())))
}

pub fn write_scaler(path: impl AsRef<Path>, params: &ScalerParams) -> Result<()> {
    let mut body = String::from("# min-max scaler parameters\n");
    let _ = writeln!(body, "version = 1");
    let _ = writeln!(body, "dataset_hash = {}", params.dataset_hash);
    let _ = writeln!(body, "seed = {}", params.seed);
    let _ = writeln!(body, "features = {}", params.features.len());
    for f in &params.features {
        // f64 Display round-trips exactly through parse
        let _ = writeln!(body, "{}\t{}\t{}", f.name, f.min, f.max);
    }
    write_checksummed(path.as_ref(), body)
}

pub fn read_scaler(path: impl AsRef<Path>) -> Result<ScalerParams> {
    let path = path.as_ref();
    let body = read_checksummed(path)?;
    let mut lines = body.lines().filter(|l| !l.starts_with('#'));
    let version: u32 = parse(field(lines.next(), "version", path)?, "version", path)?;
    if version != 1 {
        return Err(Error::Parse(format!("{}: unsupported version {version}", path.display())));
    }
    let dataset_hash = field(lines.next(), "dataset_hash", path)?.to_string();
    let seed = parse(field(lines.next(), "seed", path)?, "seed", path)?;
    let count: usize = parse(field(lines.next(), "features", path)?, "feature count", path)?;
    let mut features = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| {
            Error::Parse(format!("{}: fewer feature lines than declared", path.display()))
        })?;
        let mut cells = line.split('\t');
        let (Some(name), Some(min), Some(max), None) =
            (cells.next(), cells.next(), cells.next(), cells.next())
        else {
            return Err(Error::Parse(format!(
                "{}: feature line must be name<TAB>min<TAB>max, got {line:?}",
                path.display()
            )));
        };
        features.push(ScalerFeature {
            name: name.to_string(),
            min: parse(min, "feature min", path)?,
            max: parse(max, "feature max", path)?,
        });
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!(
            "{}: more feature lines than declared",
            path.display()
        )));
    }
    Ok(ScalerParams { dataset_hash, seed, features })
}

pub fn write_split_manifest(path: impl AsRef<Path>, manifest: &SplitManifest) -> Result<()> {
    let (train, validation, test) = manifest.counts();
    let mut body = String::from("# dataset split manifest\n");
    let _ = writeln!(body, "version = 1");
    let _ = writeln!(body, "seed = {}", manifest.seed);
    let _ = writeln!(body, "with_validation = {}", manifest.with_validation);
    let _ = writeln!(body, "rows = {}", manifest.assignments.len());
    let _ = writeln!(body, "train = {train}");
    let _ = writeln!(body, "validation = {validation}");
    let _ = writeln!(body, "test = {test}");
    let codes: String = manifest.assignments.iter().map(|a| a.code()).collect();
    let _ = writeln!(body, "assignments = {codes}");
    write_checksummed(path.as_ref(), body)
}

pub fn read_split_manifest(path: impl AsRef<Path>) -> Result<SplitManifest> {
    let path = path.as_ref();
    let body = read_checksummed(path)?;
    let mut lines = body.lines().filter(|l| !l.starts_with('#'));
    let version: u32 = parse(field(lines.next(), "version", path)?, "version", path)?;
    if version != 1 {
        return Err(Error::Parse(format!("{}: unsupported version {version}", path.display())));
    }
    let seed = parse(field(lines.next(), "seed", path)?, "seed", path)?;
    let with_validation = parse(
        field(lines.next(), "with_validation", path)?,
        "with_validation flag",
        path,
    )?;
    let rows: usize = parse(field(lines.next(), "rows", path)?, "row count", path)?;
    let train: usize = parse(field(lines.next(), "train", path)?, "train count", path)?;
    let validation: usize =
        parse(field(lines.next(), "validation", path)?, "validation count", path)?;
    let test: usize = parse(field(lines.next(), "test", path)?, "test count", path)?;
    let codes = field(lines.next(), "assignments", path)?;
    let assignments = codes.chars().map(SplitClass::from_code).collect::<Result<Vec<_>>>()?;
    let manifest = SplitManifest { seed, with_validation, assignments };
    if manifest.assignments.len() != rows || manifest.counts() != (train, validation, test) {
        return Err(Error::Consistency(format!(
            "{}: declared counts do not match the assignment string",
            path.display()
        )));
    }
    Ok(manifest)
}
