//! Output files: snapshot CSVs, grid matrices and ndjson records.
//!
//! Every number is written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{config_err, Result};
use crate::model::{Domain, Individual};
use crate::pde::DensityGrid;

/// File stem for time `t`, e.g. `t0.5`.
pub fn time_stem(t: f64) -> String {
    format!("t{t}")
}

/// `dir/snapshots/t<t>.csv` with header `t,id,x,u`.
pub fn write_snapshot(dir: &Path, t: f64, individuals: &[Individual]) -> Result<PathBuf> {
    let sub = dir.join("snapshots");
    fs::create_dir_all(&sub)?;
    let path = sub.join(format!("{}.csv", time_stem(t)));
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "t,id,x,u")?;
    for ind in individuals {
        writeln!(w, "{t},{},{},{}", ind.id, ind.x, ind.u)?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads a snapshot CSV back as `(id, x, u)` rows.
pub fn read_snapshot(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        let bad = || config_err(format!("{}:{}: malformed snapshot row", path.display(), n + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        out.push((
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
            f[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(out)
}

/// `dir/grid/t<t>.csv`: the header row holds the trait grid, the first
/// column the position grid.
pub fn write_grid(dir: &Path, g: &DensityGrid) -> Result<PathBuf> {
    let sub = dir.join("grid");
    fs::create_dir_all(&sub)?;
    let path = sub.join(format!("{}.csv", time_stem(g.t)));
    let mut w = BufWriter::new(File::create(&path)?);
    write!(w, "x\\u")?;
    for u in g.u_centers() {
        write!(w, ",{u}")?;
    }
    writeln!(w)?;
    for i in 0..g.nx {
        write!(w, "{}", g.x_center(i))?;
        for k in 0..g.nu {
            write!(w, ",{}", g.at(i, k))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads a grid matrix written by [`write_grid`] on `domain`.
pub fn read_grid(path: &Path, domain: Domain) -> Result<DensityGrid> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let bad = |what: &str| config_err(format!("{}: {what}", path.display()));
    let header = lines.next().ok_or_else(|| bad("empty grid file"))?;
    let nu = header.split(',').count() - 1;
    let mut values = Vec::new();
    let mut nx = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != nu + 1 {
            return Err(bad("ragged grid row"));
        }
        for v in &row[1..] {
            values.push(v.trim().parse::<f64>().map_err(|_| bad("non-numeric grid value"))?);
        }
        nx += 1;
    }
    let mut g = DensityGrid::zeros(domain, nx, nu)?;
    g.values = values;
    g.validate()?;
    Ok(g)
}

/// Appends one JSON object per line.
pub struct Ndjson {
    w: BufWriter<File>,
}

impl Ndjson {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        Ok(Self {
            w: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.w, record).map_err(std::io::Error::from)?;
        writeln!(self.w)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}
