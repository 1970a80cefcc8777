use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use norbn_core::noisy_or::{read_network, write_network};
use norbn_core::problems::{BinaryMatrix, GroundTruth, LayeredTopology};
use norbn_core::NoisyOrNetwork;
use tempfile::NamedTempFile;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn read_matrix(path: &Path) -> Result<BinaryMatrix> {
    BinaryMatrix::read(open(path)?).with_context(|| format!("reading dataset {}", path.display()))
}

pub fn write_matrix(path: &Path, m: &BinaryMatrix) -> Result<()> {
    write_atomic(path, |w| Ok(m.write(w)?))
}

pub fn read_model(path: &Path) -> Result<NoisyOrNetwork> {
    read_network(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

pub fn write_model(path: &Path, net: &NoisyOrNetwork) -> Result<()> {
    write_atomic(path, |w| Ok(write_network(net, w)?))
}

pub fn read_gt(path: &Path) -> Result<GroundTruth> {
    GroundTruth::read(open(path)?).with_context(|| format!("reading ground truth {}", path.display()))
}

pub fn read_topology(path: &Path) -> Result<LayeredTopology> {
    LayeredTopology::read(open(path)?).with_context(|| format!("reading topology {}", path.display()))
}

/// Text with one `key=value` pair per line.
pub fn write_manifest(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "NORMANIFEST 1")?;
        for (k, v) in entries {
            writeln!(w, "{k}={v}")?;
        }
        Ok(())
    })
}
