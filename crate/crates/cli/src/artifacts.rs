//! CSV artifacts. Every file starts with a `# config-hash:` line and a header row;
//! floats use 17 significant digits and infinities are written `inf` / `-inf`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cellflow::abstraction::{CellVolume, Violation};
use cellflow::levelset::{BoxEntry, BoxMap};
use cellflow::morse::MorseDecomposition;
use cellflow::{CellId, CellSet, DiscreteSystem, OrderedCover, Region};
use sha2::{Digest, Sha256};

/// SHA-256 of the config text followed by the effective root seed.
pub fn config_hash(text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(format!("\nseed={seed}\n").as_bytes());
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

/// Space-separated coordinates.
pub fn fmt_point(p: &[f64]) -> String {
    p.iter().map(|&c| fmt_f64(c)).collect::<Vec<_>>().join(" ")
}

/// Space-separated cell ids.
pub fn fmt_cells(s: &CellSet) -> String {
    s.iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(" ")
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, hash: &str) -> String {
        let mut out = format!("# config-hash: {hash}\n");
        let line = |r: &[String]| r.iter().map(|f| quote(f)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.header));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, name: &str, hash: &str) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        fs::write(&path, self.render(hash))?;
        Ok(path)
    }
}

fn region_params(r: &Region) -> String {
    match r {
        Region::HyperRect(b) => format!(
            "bounds={}",
            b.iter()
                .map(|&(lo, hi)| format!("{} {}", fmt_f64(lo), fmt_f64(hi)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        Region::MetricBall { center, radius, .. } => {
            format!("center={} radius={}", fmt_point(center), fmt_f64(*radius))
        }
        Region::Slab(s) => format!(
            "index={} ranges={}",
            s.index.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
            s.ranges
                .iter()
                .map(|&(lo, hi)| format!("{} {}", fmt_f64(lo), fmt_f64(hi)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        Region::Predicate(p) => format!("test={}", p.name()),
    }
}

/// `id,kind,label,parameters`.
pub fn cells_csv(cover: &OrderedCover, label: &dyn Fn(CellId) -> String) -> Csv {
    let mut t = Csv::new(["id", "kind", "label", "parameters"]);
    for z in cover.cells() {
        let r = cover.region(z);
        t.push(vec![z.0.to_string(), r.kind_name().into(), label(z), region_params(r)]);
    }
    t
}

/// `t,source,targets` for every grid time and cell.
pub fn phi_csv(d: &DiscreteSystem) -> cellflow::Result<Csv> {
    let table = d.tabulate()?;
    let mut t = Csv::new(["t", "source", "targets"]);
    for (row, &time) in table.iter().zip(d.time_grid()) {
        for (z, set) in row.iter().enumerate() {
            t.push(vec![fmt_f64(time), z.to_string(), fmt_cells(set)]);
        }
    }
    Ok(t)
}

/// Reads a `phi.csv` back into a time grid and a table.
pub fn read_phi_csv(text: &str, n_states: usize) -> Result<(Vec<f64>, Vec<Vec<CellSet>>), String> {
    let mut grid: Vec<f64> = Vec::new();
    let mut table: Vec<Vec<CellSet>> = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "t,source,targets" => {}
        _ => return Err("phi table must start with the header t,source,targets".into()),
    }
    for (i, line) in lines {
        let bad = |m: &str| format!("line {}: {m}", i + 1);
        let mut parts = line.splitn(3, ',');
        let t = parts.next().and_then(parse_f64).ok_or_else(|| bad("bad time"))?;
        let z: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("bad source"))?;
        let targets = parts
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|s| s.parse::<usize>().map(CellId))
            .collect::<Result<CellSet, _>>()
            .map_err(|_| bad("bad target list"))?;
        if z >= n_states || targets.iter().any(|c| c.0 >= n_states) {
            return Err(bad("cell id out of range"));
        }
        if grid.last() != Some(&t) {
            if grid.last().is_some_and(|&p| t < p) {
                return Err(bad("times must be nondecreasing"));
            }
            grid.push(t);
            table.push(vec![CellSet::new(); n_states]);
        }
        table.last_mut().expect("row pushed above")[z] = targets;
    }
    Ok((grid, table))
}

/// `z0..,lo0,hi0,..` for every index vector; empty cells have `empty` bounds.
pub fn boxmap_csv(boxes: &BoxMap, l: usize) -> Csv {
    let mut header: Vec<String> = (0..l).map(|i| format!("z{i}")).collect();
    for i in 0..l {
        header.push(format!("lo{i}"));
        header.push(format!("hi{i}"));
    }
    header.push("status".into());
    let mut t = Csv::new(header);
    for (z, entry) in boxes.iter() {
        let mut row: Vec<String> = z.iter().map(|k| k.to_string()).collect();
        match entry {
            BoxEntry::Box(b) => {
                for &(lo, hi) in &b.intervals {
                    row.push(fmt_f64(lo));
                    row.push(fmt_f64(hi));
                }
                row.push("box".into());
            }
            BoxEntry::Empty => {
                row.extend(std::iter::repeat_n(String::new(), 2 * l));
                row.push("empty".into());
            }
        }
        t.push(row);
    }
    t
}

/// `source,sink,source_label,sink_label,representatives`.
pub fn order_csv(decomp: &MorseDecomposition) -> Csv {
    let mut t = Csv::new(["source", "sink", "source_label", "sink_label", "representatives"]);
    for c in &decomp.cells {
        t.push(vec![
            c.source.to_string(),
            c.sink.to_string(),
            decomp.elements[c.source].label.clone(),
            decomp.elements[c.sink].label.clone(),
            c.representatives.len().to_string(),
        ]);
    }
    t
}

/// `check,t,source,cell,point,predicted`.
pub fn violations_csv(reports: &[(&str, &[Violation])]) -> Csv {
    let mut t = Csv::new(["check", "t", "source", "cell", "point", "predicted"]);
    for (name, vs) in reports {
        for v in *vs {
            t.push(vec![
                name.to_string(),
                fmt_f64(v.t),
                v.source.0.to_string(),
                v.cell.0.to_string(),
                fmt_point(&v.point),
                fmt_cells(&v.predicted),
            ]);
        }
    }
    t
}

/// `t,cell,volume,std_error`.
pub fn conservativeness_csv(per_cell: &[CellVolume]) -> Csv {
    let mut t = Csv::new(["t", "cell", "volume", "std_error"]);
    for c in per_cell {
        t.push(vec![
            fmt_f64(c.t),
            c.cell.0.to_string(),
            fmt_f64(c.volume),
            fmt_f64(c.std_error),
        ]);
    }
    t
}

/// `trajectory,t,x0,..` at each grid time.
pub fn trajectories_csv(dim: usize, runs: &[Vec<(f64, Vec<f64>)>]) -> Csv {
    let mut header = vec!["trajectory".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    let mut t = Csv::new(header);
    for (k, run) in runs.iter().enumerate() {
        for (time, x) in run {
            let mut row = vec![k.to_string(), fmt_f64(*time)];
            row.extend(x.iter().map(|&c| fmt_f64(c)));
            t.push(row);
        }
    }
    t
}
