//! Plain-text file formats. Floats are written with `{:e}`, which is the
//! shortest representation that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nich_core::diagnostics::BalanceRecord;
use nich_core::{Field, Grid};

use crate::config::GridSpec;

/// Column order of the balance series.
pub const BALANCE_HEADER: &str =
    "t,dt,mass,energy,entropy,production,min_theta,newton_iters,max_theta,ch_energy,entropy_residual";

/// One row of the balance series: the state's balances plus step data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRow {
    pub record: BalanceRecord,
    /// Length of the step that produced the state; 0 for the initial state.
    pub dt: f64,
    pub newton_iters: usize,
    /// `int (alpha/2)|grad u|^2 + F(u)`.
    pub ch_energy: f64,
    /// Entropy identity residual of the step; 0 for the initial state.
    pub entropy_residual: f64,
}

impl BalanceRow {
    pub fn to_csv(&self) -> String {
        let r = &self.record;
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
            r.t,
            self.dt,
            r.mass,
            r.internal_energy,
            r.total_entropy,
            r.entropy_production_rate,
            r.min_theta,
            self.newton_iters,
            r.max_theta,
            self.ch_energy,
            self.entropy_residual
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 11 {
            return None;
        }
        let f = |i: usize| cols[i].parse::<f64>().ok();
        Some(Self {
            record: BalanceRecord {
                t: f(0)?,
                mass: f(2)?,
                internal_energy: f(3)?,
                total_entropy: f(4)?,
                entropy_production_rate: f(5)?,
                min_theta: f(6)?,
                max_theta: f(8)?,
            },
            dt: f(1)?,
            newton_iters: cols[7].parse().ok()?,
            ch_energy: f(9)?,
            entropy_residual: f(10)?,
        })
    }
}

/// An I/O failure together with the path involved.
#[derive(Debug)]
pub struct IoFailure {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for IoFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for IoFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub type IoResult<T> = Result<T, IoFailure>;

pub fn at<T>(path: &Path, r: io::Result<T>) -> IoResult<T> {
    r.map_err(|source| IoFailure { path: path.to_path_buf(), source })
}

fn invalid(path: &Path, message: String) -> IoFailure {
    IoFailure { path: path.to_path_buf(), source: io::Error::new(io::ErrorKind::InvalidData, message) }
}

pub fn create_dir(path: &Path) -> IoResult<()> {
    at(path, fs::create_dir_all(path))
}

pub fn write_text(path: &Path, text: &str) -> IoResult<()> {
    at(path, fs::write(path, text))
}

pub fn read_text(path: &Path) -> IoResult<String> {
    at(path, fs::read_to_string(path))
}

/// Incrementally written balance series.
pub struct BalanceWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl BalanceWriter {
    pub fn create(path: &Path) -> IoResult<Self> {
        let file = at(path, fs::File::create(path))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.line(BALANCE_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> IoResult<()> {
        at(&self.path, writeln!(self.out, "{text}"))
    }

    pub fn push(&mut self, row: &BalanceRow) -> IoResult<()> {
        self.line(&row.to_csv())
    }

    pub fn finish(mut self) -> IoResult<()> {
        at(&self.path, self.out.flush())
    }
}

pub fn write_balance_csv(path: &Path, rows: &[BalanceRow]) -> IoResult<()> {
    let mut w = BalanceWriter::create(path)?;
    for row in rows {
        w.push(row)?;
    }
    w.finish()
}

pub fn read_balance_csv(path: &Path) -> IoResult<Vec<BalanceRow>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(BALANCE_HEADER) {
        return Err(invalid(path, "missing or unexpected balance header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| BalanceRow::from_csv(l).ok_or_else(|| invalid(path, format!("malformed row {}", i + 2))))
        .collect()
}

/// `key = value` lines in key order.
pub fn write_key_values(path: &Path, values: &BTreeMap<String, f64>) -> IoResult<()> {
    let text: String = values.iter().map(|(k, v)| format!("{k} = {v:e}\n")).collect();
    write_text(path, &text)
}

pub fn read_key_values(path: &Path) -> IoResult<BTreeMap<String, f64>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once('=').and_then(|(k, v)| Some((k.trim().to_string(), v.trim().parse::<f64>().ok()?)));
        let (k, v) = parsed.ok_or_else(|| invalid(path, format!("malformed line {}", i + 1)))?;
        out.insert(k, v);
    }
    Ok(out)
}

/// One field at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: String,
    pub t: f64,
    pub step: usize,
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(name: &str, t: f64, step: usize, field: &Field) -> Self {
        let g = field.grid();
        let n = g.n();
        let l = g.length();
        let grid = if g.dim() == 1 {
            GridSpec { dim: 1, nx: n[0], lx: l[0], ..GridSpec::default() }
        } else {
            GridSpec { dim: 2, nx: n[0], ny: n[1], lx: l[0], ly: l[1] }
        };
        Self { field: name.into(), t, step, grid, values: field.values().to_vec() }
    }

    pub fn to_field(&self) -> Result<Field, String> {
        let grid: Grid = self.grid.build().map_err(|e| e.to_string())?;
        Field::new(grid, self.values.clone()).map_err(|e| e.to_string())
    }

    /// Header block then one value per line, row-major.
    pub fn render(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "# field = {}\n# t = {:e}\n# step = {}\n# dim = {}\n# n = {} {}\n# length = {:e} {:e}\n",
            self.field, self.t, self.step, g.dim, g.nx, g.ny, g.lx, g.ly
        );
        for v in &self.values {
            s.push_str(&format!("{v:e}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut header = BTreeMap::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('=').ok_or(format!("line {}: malformed header", i + 1))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            } else if !line.trim().is_empty() {
                values.push(line.trim().parse::<f64>().map_err(|_| format!("line {}: not a number", i + 1))?);
            }
        }
        let get = |k: &str| header.get(k).ok_or(format!("missing header `{k}`"));
        let pair = |k: &str| -> Result<(String, String), String> {
            let v = get(k)?;
            let mut it = v.split_whitespace();
            match (it.next(), it.next()) {
                (Some(a), Some(b)) => Ok((a.into(), b.into())),
                _ => Err(format!("header `{k}` needs two entries")),
            }
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer `{s}`"));
        let (nx, ny) = pair("n")?;
        let (lx, ly) = pair("length")?;
        let grid = GridSpec { dim: int(get("dim")?)?, nx: int(&nx)?, ny: int(&ny)?, lx: num(&lx)?, ly: num(&ly)? };
        let expected = if grid.dim == 1 { grid.nx } else { grid.nx * grid.ny };
        if values.len() != expected {
            return Err(format!("expected {expected} values, found {}", values.len()));
        }
        Ok(Self { field: get("field")?.clone(), t: num(get("t")?)?, step: int(get("step")?)?, grid, values })
    }

    pub fn file_name(field: &str, step: usize) -> String {
        format!("{field}_{step:06}.txt")
    }

    pub fn write(&self, dir: &Path) -> IoResult<()> {
        write_text(&dir.join(Self::file_name(&self.field, self.step)), &self.render())
    }

    pub fn read(path: &Path) -> IoResult<Self> {
        Self::parse(&read_text(path)?).map_err(|m| invalid(path, m))
    }
}
