//! Coordinate-format dumps of the assembled sparse blocks.

use std::{
    fs,
    io::{self, BufWriter, Write},
    path::{Path, PathBuf},
};

use hho_core::{assembly::GlobalSystem, linalg::CsrMatrix};

/// Writes one `row col value` line per stored entry, 0-based, row-major.
pub fn write_coordinate(mut w: impl Write, m: &CsrMatrix) -> io::Result<()> {
    writeln!(w, "# {} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{i} {j} {v:?}")?;
    }
    Ok(())
}

/// Dumps `A_KK`, `A_KF`, `A_FK`, `A_FF`, `A` and `M_KK` into `dir`, creating
/// it if needed, and returns the written paths.
pub fn dump_system(dir: impl AsRef<Path>, system: &GlobalSystem) -> io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let blocks = [
        ("a_kk", system.a_kk()),
        ("a_kf", system.a_kf()),
        ("a_fk", system.a_fk()),
        ("a_ff", system.a_ff()),
        ("a", system.stiffness().clone()),
        ("m_kk", system.mass().clone()),
    ];
    let mut written = Vec::with_capacity(blocks.len());
    for (name, m) in blocks {
        let path = dir.join(format!("{name}.coo"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        write_coordinate(&mut w, &m)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
