//! Frame output: per-group CSV fields, PGM heatmaps and `diagnostics.jsonl`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crowdkin_core::diagnostics::{Diagnostics, EdgeOutflow};
use crowdkin_core::kinetics::moments;
use crowdkin_core::StateField;
use serde::Serialize;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";

/// What to write besides the diagnostics record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOptions {
    /// Density mapped to white in the heatmaps.
    pub rho_display_max: f64,
    /// Append one column per velocity state to the CSV files.
    pub full_state: bool,
}

/// `frame_00042_g1.csv` style name; groups are numbered from 1.
pub fn frame_file_name(frame: usize, group: usize, ext: &str) -> String {
    format!("frame_{frame:05}_g{}.{ext}", group + 1)
}

#[derive(Serialize)]
struct Record<'a> {
    t: f64,
    step: usize,
    mass: Vec<f64>,
    com: Vec<Option<[f64; 2]>>,
    alignment: Vec<Option<f64>>,
    outflow: Vec<EdgeOutflow>,
    rho_max: f64,
    min_f: f64,
    support: Vec<Support<'a>>,
}

#[derive(Serialize)]
struct Support<'a> {
    closed: bool,
    points: &'a [[f64; 2]],
}

/// One line of `diagnostics.jsonl` (without the trailing newline).
pub fn diagnostics_line(d: &Diagnostics) -> String {
    let record = Record {
        t: d.time,
        step: d.step,
        mass: d.groups.iter().map(|g| g.mass).collect(),
        com: d.groups.iter().map(|g| g.center_of_mass).collect(),
        alignment: d.groups.iter().map(|g| g.alignment).collect(),
        outflow: d.groups.iter().map(|g| g.outflow).collect(),
        rho_max: d.rho_max,
        min_f: d.min_f,
        support: d
            .support
            .iter()
            .map(|p| Support {
                closed: p.closed,
                points: &p.points,
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("diagnostics serialise")
}

/// Writes the CSV and PGM files of one frame and appends its diagnostics record.
pub fn write_frame(
    f: &StateField,
    diag: &Diagnostics,
    dir: &Path,
    frame: usize,
    opts: &FrameOptions,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let m = moments(f);
    for g in 0..f.groups() {
        write_csv(
            &dir.join(frame_file_name(frame, g, "csv")),
            f,
            g,
            &m.rho[g],
            &m.qx[g],
            &m.qy[g],
            opts.full_state,
        )?;
        write_pgm(
            &dir.join(frame_file_name(frame, g, "pgm")),
            f,
            &m.rho[g],
            opts.rho_display_max,
        )?;
    }
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(DIAGNOSTICS_FILE))?;
    writeln!(log, "{}", diagnostics_line(diag))
}

fn write_csv(
    path: &Path,
    f: &StateField,
    group: usize,
    rho: &[f64],
    qx: &[f64],
    qy: &[f64],
    full_state: bool,
) -> io::Result<()> {
    let grid = f.grid();
    let v = f.vgrid();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["ix", "iy", "x", "y", "rho", "qx", "qy"]
        .map(String::from)
        .to_vec();
    if full_state {
        for i in 0..v.n() {
            for j in 0..v.m() {
                header.push(format!("f{i}_{j}"));
            }
        }
    }
    w.write_record(&header)?;
    let num = |x: f64| format!("{x:.16e}");
    let mut row = Vec::with_capacity(header.len());
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let cell = grid.index(ix, iy);
            let (x, y) = grid.cell_center(ix, iy).expect("cell in range");
            row.clear();
            row.extend([
                ix.to_string(),
                iy.to_string(),
                num(x),
                num(y),
                num(rho[cell]),
                num(qx[cell]),
                num(qy[cell]),
            ]);
            if full_state {
                for i in 0..v.n() {
                    for j in 0..v.m() {
                        row.push(num(f.component(group, i, j)[cell]));
                    }
                }
            }
            w.write_record(&row)?;
        }
    }
    w.flush()
}

/// Plain PGM (P2), 256 grey levels, top row = largest `y`.
fn write_pgm(path: &Path, f: &StateField, rho: &[f64], display_max: f64) -> io::Result<()> {
    let grid = f.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P2\n{} {}\n255", grid.nx, grid.ny)?;
    for iy in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|ix| grey_level(rho[grid.index(ix, iy)], display_max).to_string())
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()
}

pub fn grey_level(rho: f64, display_max: f64) -> u8 {
    let s = (rho / display_max).clamp(0.0, 1.0);
    (s * 255.0).round() as u8
}

/// Fields of one group read back from a frame's CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameField {
    pub ix: Vec<usize>,
    pub iy: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    /// Full-state columns in file order, if present.
    pub states: Vec<Vec<f64>>,
}

fn bad_data(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_frame(dir: &Path, frame: usize, group: usize) -> io::Result<FrameField> {
    let mut r = csv::Reader::from_path(dir.join(frame_file_name(frame, group, "csv")))?;
    let header = r.headers()?.clone();
    if !header
        .iter()
        .take(7)
        .eq(["ix", "iy", "x", "y", "rho", "qx", "qy"])
    {
        return Err(bad_data(format!("unexpected header {header:?}")));
    }
    let mut out = FrameField {
        states: vec![Vec::new(); header.len() - 7],
        ..FrameField::default()
    };
    for record in r.records() {
        let record = record?;
        let int = |k: usize| {
            record[k]
                .parse::<usize>()
                .map_err(|e| bad_data(e.to_string()))
        };
        let num = |k: usize| {
            record[k]
                .parse::<f64>()
                .map_err(|e| bad_data(e.to_string()))
        };
        out.ix.push(int(0)?);
        out.iy.push(int(1)?);
        out.x.push(num(2)?);
        out.y.push(num(3)?);
        out.rho.push(num(4)?);
        out.qx.push(num(5)?);
        out.qy.push(num(6)?);
        for (k, column) in out.states.iter_mut().enumerate() {
            column.push(num(7 + k)?);
        }
    }
    Ok(out)
}
