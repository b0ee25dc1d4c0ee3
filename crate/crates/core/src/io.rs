//! CSV import and export.
//!
//! Every file starts with `#`-prefixed comment lines, followed by a header
//! row and the data. Floats are written with 17 significant digits so that
//! they round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{Field, Grid1D, InitialData, ModelParams};
use crate::ode::{JumpTime, LimitProfile, PointTrajectory};
use crate::pde::{PhiBoundary, SchemeConfig, Snapshot, SolutionRecord, StepRecord, VariableSet};

/// Lossless decimal form of a float.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{}: '{t}' is not a number", path.display()))),
    }
}

/// Buffered CSV file with comment lines and a header.
pub struct CsvTable {
    out: csv::Writer<BufWriter<File>>,
}

impl CsvTable {
    pub fn create(path: &Path, comments: &[String], header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        for c in comments {
            for line in c.lines() {
                writeln!(file, "# {line}")?;
            }
        }
        let mut out = csv::Writer::from_writer(file);
        out.write_record(header)?;
        Ok(Self { out })
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<()> {
        self.out.write_record(cells.iter().map(|c| c.as_ref()))?;
        Ok(())
    }

    pub fn floats(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.row(&cells)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Header and rows of a CSV file, skipping comment lines.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rd.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Two numeric columns `(x, y)` of a CSV file, sorted by `x`.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let (header, rows) = read_table(path)?;
    if header.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "{} needs two columns, found {}",
            path.display(),
            header.len()
        )));
    }
    let mut pts = rows
        .iter()
        .map(|r| Ok((parse_f64(&r[0], path)?, parse_f64(&r[1], path)?)))
        .collect::<Result<Vec<_>>>()?;
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} has fewer than two rows",
            path.display()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts.into_iter().unzip())
}

/// Piecewise-linear interpolation of `(xs, ys)` at the grid nodes, constant
/// beyond the data.
pub fn sample_onto(grid: Grid1D, xs: &[f64], ys: &[f64]) -> Result<Field> {
    Field::from_fn(grid, |x| {
        if x <= xs[0] {
            return ys[0];
        }
        if x >= xs[xs.len() - 1] {
            return ys[ys.len() - 1];
        }
        let k = xs.partition_point(|p| *p <= x);
        let (x0, x1) = (xs[k - 1], xs[k]);
        let s = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        ys[k - 1] + s * (ys[k] - ys[k - 1])
    })
}

pub fn write_snapshot(path: &Path, snap: &Snapshot, comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(path, comments, &["x", "u", "v", "w", "phi"])?;
    let (u, v, w, phi) = (snap.u.values(), snap.v.values(), snap.w.values(), snap.phi.values());
    for (i, x) in snap.v.grid().nodes().enumerate() {
        t.floats(&[x, u[i], v[i], w[i], phi[i]])?;
    }
    t.finish()
}

pub fn write_step_log(path: &Path, log: &[StepRecord], comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(path, comments, &["t", "dt", "min_v", "max_u", "drift"])?;
    for s in log {
        t.floats(&[s.t, s.dt, s.min_v, s.max_u, s.drift])?;
    }
    t.finish()
}

pub fn write_trajectory(path: &Path, traj: &PointTrajectory, comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(path, comments, &["t", "u", "v", "phi", "invariant_drift"])?;
    let drift = traj.invariant_drift();
    for i in 0..traj.times.len() {
        t.floats(&[
            traj.times[i],
            traj.u_values[i],
            traj.v_values[i],
            traj.phi_values[i],
            drift[i],
        ])?;
    }
    t.finish()
}

pub fn write_limit_profile(path: &Path, profile: &LimitProfile, comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(path, comments, &["x", "tau", "v_lower", "v_upper", "weight"])?;
    for (i, x) in profile.grid.nodes().enumerate() {
        t.row(&[
            fmt_f64(x),
            profile.tau[i].to_string(),
            fmt_f64(profile.v_lower.values()[i]),
            fmt_f64(profile.v_upper.values()[i]),
            fmt_f64(profile.weight.values()[i]),
        ])?;
    }
    t.finish()
}

/// Read back the `tau` column of a limit-profile file.
pub fn read_jump_times(path: &Path) -> Result<Vec<JumpTime>> {
    let (header, rows) = read_table(path)?;
    let col = header
        .iter()
        .position(|h| h == "tau")
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no tau column", path.display())))?;
    rows.iter().map(|r| r[col].parse()).collect()
}

const META_FILE: &str = "meta.csv";
const INIT_FILE: &str = "initial.csv";
const STEP_LOG_FILE: &str = "step_log.csv";

fn snapshot_file(k: usize) -> String {
    format!("snapshot_{k:04}.csv")
}

fn meta_pairs(record: &SolutionRecord) -> Vec<(&'static str, String)> {
    let p = &record.params;
    let s = &record.scheme;
    vec![
        ("eps", fmt_f64(p.eps)),
        ("mu", fmt_f64(p.mu)),
        ("x_min", fmt_f64(p.x_min)),
        ("x_max", fmt_f64(p.x_max)),
        ("n_cells", p.n_cells.to_string()),
        ("t_end", fmt_f64(p.t_end)),
        ("dt_initial", fmt_f64(s.dt_initial)),
        ("cfl_safety", fmt_f64(s.cfl_safety)),
        ("variable_set", s.variable_set.name().into()),
        ("bc_phi", s.bc_phi.name().into()),
        ("adaptive_dt", s.adaptive_dt.to_string()),
        ("reaction_resolution", fmt_f64(s.reaction_resolution)),
        (
            "snapshot_times",
            s.snapshot_times
                .iter()
                .map(|t| fmt_f64(*t))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ("snapshots", record.snapshots.len().to_string()),
    ]
}

/// Write a record and its initial data into `dir`, returning the files
/// written.
pub fn save_record(dir: &Path, record: &SolutionRecord, init: &InitialData) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let path = dir.join(META_FILE);
    let mut t = CsvTable::create(&path, &["solution record metadata".into()], &["key", "value"])?;
    for (k, v) in meta_pairs(record) {
        t.row(&[k, v.as_str()])?;
    }
    t.finish()?;
    files.push(path);

    let path = dir.join(INIT_FILE);
    let mut t = CsvTable::create(&path, &[], &["x", "u0", "v0", "phi0"])?;
    for (i, x) in init.v0.grid().nodes().enumerate() {
        t.floats(&[x, init.u0.values()[i], init.v0.values()[i], init.phi0.values()[i]])?;
    }
    t.finish()?;
    files.push(path);

    for (k, s) in record.snapshots.iter().enumerate() {
        let path = dir.join(snapshot_file(k));
        write_snapshot(&path, s, &[format!("t = {}", fmt_f64(s.t))])?;
        files.push(path);
    }
    let path = dir.join(STEP_LOG_FILE);
    let mut t = CsvTable::create(
        &path,
        &[],
        &[
            "t", "dt", "min_u", "max_u", "min_v", "max_v", "min_phi", "max_phi", "drift",
        ],
    )?;
    for s in &record.step_log {
        t.floats(&[
            s.t, s.dt, s.min_u, s.max_u, s.min_v, s.max_v, s.min_phi, s.max_phi, s.drift,
        ])?;
    }
    t.finish()?;
    files.push(path);
    Ok(files)
}

fn columns(path: &Path, expect: &[&str]) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = read_table(path)?;
    if header != expect {
        return Err(Error::InvalidParameter(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            expect,
            header
        )));
    }
    let mut cols = vec![Vec::with_capacity(rows.len()); expect.len()];
    for r in &rows {
        for (c, cell) in r.iter().enumerate() {
            cols[c].push(parse_f64(cell, path)?);
        }
    }
    Ok(cols)
}

fn snapshot_time(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .find_map(|l| l.strip_prefix("# t = "))
        .ok_or_else(|| Error::InvalidParameter(format!("{} lacks its time stamp", path.display())))
        .and_then(|s| parse_f64(s, path))
}

/// Inverse of [`save_record`].
pub fn load_record(dir: &Path) -> Result<(SolutionRecord, InitialData)> {
    let meta_path = dir.join(META_FILE);
    let (_, rows) = read_table(&meta_path)?;
    let get = |key: &str| -> Result<String> {
        rows.iter()
            .find(|r| r[0] == key)
            .map(|r| r.get(1).cloned().unwrap_or_default())
            .ok_or_else(|| Error::InvalidParameter(format!("{}: missing key {key}", meta_path.display())))
    };
    let num = |key: &str| -> Result<f64> { parse_f64(&get(key)?, &meta_path) };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{}: bad integer for {key}", meta_path.display())))
    };
    let params = ModelParams::new(
        num("eps")?,
        num("mu")?,
        num("x_min")?,
        num("x_max")?,
        int("n_cells")?,
        num("t_end")?,
    )?;
    let snapshot_times = get("snapshot_times")?
        .split_whitespace()
        .map(|s| parse_f64(s, &meta_path))
        .collect::<Result<Vec<_>>>()?;
    let scheme = SchemeConfig {
        dt_initial: num("dt_initial")?,
        cfl_safety: num("cfl_safety")?,
        variable_set: get("variable_set")?.parse::<VariableSet>()?,
        bc_phi: get("bc_phi")?.parse::<PhiBoundary>()?,
        snapshot_times,
        adaptive_dt: get("adaptive_dt")? == "true",
        reaction_resolution: num("reaction_resolution")?,
    };
    let grid = params.grid();

    let init_cols = columns(&dir.join(INIT_FILE), &["x", "u0", "v0", "phi0"])?;
    let init = InitialData::from_log_density(
        &params,
        Field::new(grid, init_cols[3].clone())?,
        Field::new(grid, init_cols[2].clone())?,
    )?;

    let count = int("snapshots")?;
    let mut snapshots = Vec::with_capacity(count);
    for k in 0..count {
        let path = dir.join(snapshot_file(k));
        let c = columns(&path, &["x", "u", "v", "w", "phi"])?;
        snapshots.push(Snapshot {
            t: snapshot_time(&path)?,
            u: Field::new(grid, c[1].clone())?,
            v: Field::new(grid, c[2].clone())?,
            w: Field::new(grid, c[3].clone())?,
            phi: Field::new(grid, c[4].clone())?,
        });
    }
    let log_cols = columns(
        &dir.join(STEP_LOG_FILE),
        &[
            "t", "dt", "min_u", "max_u", "min_v", "max_v", "min_phi", "max_phi", "drift",
        ],
    )?;
    let step_log = (0..log_cols[0].len())
        .map(|i| StepRecord {
            t: log_cols[0][i],
            dt: log_cols[1][i],
            min_u: log_cols[2][i],
            max_u: log_cols[3][i],
            min_v: log_cols[4][i],
            max_v: log_cols[5][i],
            min_phi: log_cols[6][i],
            max_phi: log_cols[7][i],
            drift: log_cols[8][i],
        })
        .collect();
    Ok((
        SolutionRecord {
            params,
            scheme,
            snapshots,
            step_log,
        },
        init,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::simulate;
    use crate::presets::{build_preset, PresetOptions};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn record_round_trip() {
        let p = ModelParams::new(0.1, 1.0, -1.0, 1.0, 41, 0.2).unwrap();
        let init = build_preset("smooth", &p, &PresetOptions::default()).unwrap();
        let rec = simulate(&p, &init, &SchemeConfig::with_uniform_snapshots(0.2, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = save_record(dir.path(), &rec, &init).unwrap();
        assert_eq!(files.len(), 3 + rec.snapshots.len());
        let (back, init_back) = load_record(dir.path()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(init_back.v0, init.v0);
        assert_eq!(init_back.phi0, init.phi0);
    }

    #[test]
    fn sampling_interpolates_and_clamps() {
        let g = Grid1D::new(-1.0, 1.0, 5);
        let f = sample_onto(g, &[-0.5, 0.5], &[1.0, 3.0]).unwrap();
        assert_eq!(f.values(), &[1.0, 1.0, 2.0, 3.0, 3.0]);
    }
}
