//! Dataset containers for the two study designs, CSV ingestion and export,
//! and per-cell tallies.
//!
//! Treatment cells are addressed by a dense index: `2g + d` for panel data
//! and `4g + 2d + t` for repeated cross-sections, so the all-zero cell is
//! always index 0 and the treated cell is always the last index.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Study design, which fixes the number of treatment cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Panel,
    Rc,
}

impl Design {
    pub fn arity(self) -> usize {
        match self {
            Design::Panel => 4,
            Design::Rc => 8,
        }
    }

    pub fn from_arity(arity: usize) -> Option<Self> {
        match arity {
            4 => Some(Design::Panel),
            8 => Some(Design::Rc),
            _ => None,
        }
    }

    /// Index of the treated cell, (1,1) or (1,1,1).
    pub fn treated_cell(self) -> usize {
        self.arity() - 1
    }

    /// Indicator bits of a cell, in (g, d[, t]) order.
    pub fn bits(self, cell: usize) -> Vec<u8> {
        match self {
            Design::Panel => vec![(cell >> 1) as u8 & 1, cell as u8 & 1],
            Design::Rc => vec![(cell >> 2) as u8 & 1, (cell >> 1) as u8 & 1, cell as u8 & 1],
        }
    }

    pub fn label(self, cell: usize) -> String {
        let bits: Vec<String> = self.bits(cell).iter().map(|b| b.to_string()).collect();
        format!("({})", bits.join(","))
    }
}

#[inline]
pub fn panel_cell(g: u8, d: u8) -> usize {
    (2 * g + d) as usize
}

#[inline]
pub fn rc_cell(g: u8, d: u8, t: u8) -> usize {
    (4 * g + 2 * d + t) as usize
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Two-period panel: every unit is observed before and after treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    x: Matrix,
    covariate_names: Vec<String>,
    g: Vec<u8>,
    d: Vec<u8>,
    y0: Vec<f64>,
    y1: Vec<f64>,
}

impl PanelDataset {
    pub fn new(x: Matrix, g: Vec<u8>, d: Vec<u8>, y0: Vec<f64>, y1: Vec<f64>) -> Result<Self> {
        let names = default_names(x.cols());
        Self::with_names(x, names, g, d, y0, y1)
    }

    pub fn with_names(
        x: Matrix,
        covariate_names: Vec<String>,
        g: Vec<u8>,
        d: Vec<u8>,
        y0: Vec<f64>,
        y1: Vec<f64>,
    ) -> Result<Self> {
        let n = g.len();
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        check_len(n, x.rows())?;
        check_len(n, d.len())?;
        check_len(n, y0.len())?;
        check_len(n, y1.len())?;
        check_len(x.cols(), covariate_names.len())?;
        check_binary("g", &g)?;
        check_binary("d", &d)?;
        check_finite_matrix(&x, &covariate_names)?;
        check_finite("y0", &y0)?;
        check_finite("y1", &y1)?;
        if !g.iter().zip(&d).any(|(&g, &d)| g == 1 && d == 1) {
            return Err(Error::InvalidData(
                "positivity part (i) fails: no unit has g = d = 1".into(),
            ));
        }
        Ok(Self {
            x,
            covariate_names,
            g,
            d,
            y0,
            y1,
        })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn k(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn g(&self) -> &[u8] {
        &self.g
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    /// Outcome change Y1 - Y0 per unit.
    pub fn delta_y(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }

    /// Cell index `2g + d` per unit.
    pub fn cells(&self) -> Vec<usize> {
        self.g
            .iter()
            .zip(&self.d)
            .map(|(&g, &d)| panel_cell(g, d))
            .collect()
    }

    pub fn n_treated(&self) -> usize {
        self.g.iter().zip(&self.d).filter(|(&g, &d)| g == 1 && d == 1).count()
    }

    /// Same units with covariates replaced, e.g. by a distorted copy.
    pub fn with_covariates(&self, x: Matrix) -> Result<Self> {
        let names = default_names(x.cols());
        Self::with_names(
            x,
            names,
            self.g.clone(),
            self.d.clone(),
            self.y0.clone(),
            self.y1.clone(),
        )
    }

    /// Same covariates and groups with new outcomes.
    pub fn with_outcomes(&self, y0: Vec<f64>, y1: Vec<f64>) -> Result<Self> {
        Self::with_names(
            self.x.clone(),
            self.covariate_names.clone(),
            self.g.clone(),
            self.d.clone(),
            y0,
            y1,
        )
    }

    /// Units selected by index (with repetition allowed).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::with_names(
            self.x.select_rows(idx),
            self.covariate_names.clone(),
            idx.iter().map(|&i| self.g[i]).collect(),
            idx.iter().map(|&i| self.d[i]).collect(),
            idx.iter().map(|&i| self.y0[i]).collect(),
            idx.iter().map(|&i| self.y1[i]).collect(),
        )
    }

    /// Pool both periods as two cross-sections of the same units, so the
    /// covariate and group distribution is identical across periods.
    pub fn stack_periods(&self) -> Result<RcDataset> {
        let n = self.n();
        let idx: Vec<usize> = (0..n).chain(0..n).collect();
        let t: Vec<u8> = (0..2 * n).map(|i| u8::from(i >= n)).collect();
        let y: Vec<f64> = self.y0.iter().chain(&self.y1).copied().collect();
        RcDataset::with_names(
            self.x.select_rows(&idx),
            self.covariate_names.clone(),
            idx.iter().map(|&i| self.g[i]).collect(),
            idx.iter().map(|&i| self.d[i]).collect(),
            t,
            y,
        )
    }
}

/// Repeated cross-sections: each unit is sampled in exactly one period.
#[derive(Debug, Clone, PartialEq)]
pub struct RcDataset {
    x: Matrix,
    covariate_names: Vec<String>,
    g: Vec<u8>,
    d: Vec<u8>,
    t: Vec<u8>,
    y: Vec<f64>,
}

impl RcDataset {
    pub fn new(x: Matrix, g: Vec<u8>, d: Vec<u8>, t: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let names = default_names(x.cols());
        Self::with_names(x, names, g, d, t, y)
    }

    pub fn with_names(
        x: Matrix,
        covariate_names: Vec<String>,
        g: Vec<u8>,
        d: Vec<u8>,
        t: Vec<u8>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = g.len();
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        check_len(n, x.rows())?;
        check_len(n, d.len())?;
        check_len(n, t.len())?;
        check_len(n, y.len())?;
        check_len(x.cols(), covariate_names.len())?;
        check_binary("g", &g)?;
        check_binary("d", &d)?;
        check_binary("t", &t)?;
        check_finite_matrix(&x, &covariate_names)?;
        check_finite("y", &y)?;
        if !(0..n).any(|i| g[i] == 1 && d[i] == 1 && t[i] == 1) {
            return Err(Error::InvalidData(
                "positivity part (i) fails: no unit has g = d = t = 1".into(),
            ));
        }
        Ok(Self {
            x,
            covariate_names,
            g,
            d,
            t,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn k(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn g(&self) -> &[u8] {
        &self.g
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Cell index `4g + 2d + t` per unit.
    pub fn cells(&self) -> Vec<usize> {
        (0..self.n())
            .map(|i| rc_cell(self.g[i], self.d[i], self.t[i]))
            .collect()
    }

    /// Cell index `2g + d` per unit, ignoring the period.
    pub fn group_cells(&self) -> Vec<usize> {
        self.g
            .iter()
            .zip(&self.d)
            .map(|(&g, &d)| panel_cell(g, d))
            .collect()
    }

    pub fn n_treated(&self) -> usize {
        (0..self.n())
            .filter(|&i| self.g[i] == 1 && self.d[i] == 1 && self.t[i] == 1)
            .count()
    }

    pub fn time_share(&self) -> f64 {
        self.t.iter().map(|&t| t as f64).sum::<f64>() / self.n() as f64
    }

    pub fn with_covariates(&self, x: Matrix) -> Result<Self> {
        let names = default_names(x.cols());
        Self::with_names(
            x,
            names,
            self.g.clone(),
            self.d.clone(),
            self.t.clone(),
            self.y.clone(),
        )
    }

    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        Self::with_names(
            self.x.clone(),
            self.covariate_names.clone(),
            self.g.clone(),
            self.d.clone(),
            self.t.clone(),
            y,
        )
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::with_names(
            self.x.select_rows(idx),
            self.covariate_names.clone(),
            idx.iter().map(|&i| self.g[i]).collect(),
            idx.iter().map(|&i| self.d[i]).collect(),
            idx.iter().map(|&i| self.t[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }
}

/// Per-cell unit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    design: Design,
    counts: Vec<usize>,
}

impl CellCounts {
    pub fn from_cells(design: Design, cells: &[usize]) -> Self {
        let mut counts = vec![0; design.arity()];
        for &c in cells {
            counts[c] += 1;
        }
        Self { design, counts }
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn get(&self, cell: usize) -> usize {
        self.counts[cell]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn empty_cells(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&c| self.counts[c] == 0).collect()
    }

    pub fn has_empty(&self) -> bool {
        self.counts.contains(&0)
    }
}

impl Serialize for CellCounts {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, usize> = self
            .counts
            .iter()
            .enumerate()
            .map(|(c, &n)| (self.design.label(c), n))
            .collect();
        #[derive(Serialize)]
        struct Repr {
            counts: BTreeMap<String, usize>,
            empty: Vec<String>,
        }
        Repr {
            counts: map,
            empty: self
                .empty_cells()
                .into_iter()
                .map(|c| self.design.label(c))
                .collect(),
        }
        .serialize(s)
    }
}

pub fn cell_counts_panel(data: &PanelDataset) -> CellCounts {
    CellCounts::from_cells(Design::Panel, &data.cells())
}

pub fn cell_counts_rc(data: &RcDataset) -> CellCounts {
    CellCounts::from_cells(Design::Rc, &data.cells())
}

/// Column bindings for a panel CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelColumns {
    pub g: String,
    pub d: String,
    pub y0: String,
    pub y1: String,
    /// Explicit covariate list; `None` takes every unbound column.
    pub covariates: Option<Vec<String>>,
}

/// Column bindings for a repeated cross-section CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcColumns {
    pub g: String,
    pub d: String,
    pub t: String,
    pub y: String,
    pub covariates: Option<Vec<String>>,
}

fn parse_bindings(s: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("bad column binding {part:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn take_binding(map: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    map.remove(key)
        .ok_or_else(|| Error::InvalidConfig(format!("column binding for {key:?} missing")))
}

impl FromStr for PanelColumns {
    type Err = Error;

    /// Parses `g=<col>,d=<col>,y0=<col>,y1=<col>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = parse_bindings(s)?;
        let cols = Self {
            g: take_binding(&mut m, "g")?,
            d: take_binding(&mut m, "d")?,
            y0: take_binding(&mut m, "y0")?,
            y1: take_binding(&mut m, "y1")?,
            covariates: None,
        };
        if let Some(k) = m.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown binding {k:?}")));
        }
        Ok(cols)
    }
}

impl FromStr for RcColumns {
    type Err = Error;

    /// Parses `g=<col>,d=<col>,t=<col>,y=<col>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = parse_bindings(s)?;
        let cols = Self {
            g: take_binding(&mut m, "g")?,
            d: take_binding(&mut m, "d")?,
            t: take_binding(&mut m, "t")?,
            y: take_binding(&mut m, "y")?,
            covariates: None,
        };
        if let Some(k) = m.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown binding {k:?}")));
        }
        Ok(cols)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        if header.iter().all(String::is_empty) || rows.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(Self { header, rows })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn cell<'a>(&'a self, row: usize, col: usize, name: &str) -> Result<&'a str> {
        match self.rows[row].get(col) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::MissingValue {
                column: name.to_string(),
                row: row + 1,
            }),
        }
    }

    fn indicator(&self, name: &str) -> Result<Vec<u8>> {
        let col = self.index(name)?;
        (0..self.rows.len())
            .map(|r| {
                let v = self.cell(r, col, name)?;
                match v.parse::<f64>() {
                    Ok(0.0) => Ok(0),
                    Ok(1.0) => Ok(1),
                    _ => Err(Error::NonBinaryIndicator {
                        column: name.to_string(),
                        row: r + 1,
                        value: v.to_string(),
                    }),
                }
            })
            .collect()
    }

    fn real(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.index(name)?;
        (0..self.rows.len())
            .map(|r| {
                let v = self.cell(r, col, name)?;
                let x: f64 = v.parse().map_err(|_| Error::ParseValue {
                    column: name.to_string(),
                    row: r + 1,
                    value: v.to_string(),
                })?;
                if !x.is_finite() {
                    return Err(Error::NonFiniteValue {
                        column: name.to_string(),
                        row: r + 1,
                    });
                }
                Ok(x)
            })
            .collect()
    }

    fn covariates(&self, explicit: Option<&[String]>, bound: &[&str]) -> Result<(Matrix, Vec<String>)> {
        let names: Vec<String> = match explicit {
            Some(list) => list.to_vec(),
            None => self
                .header
                .iter()
                .filter(|h| !bound.contains(&h.as_str()))
                .cloned()
                .collect(),
        };
        let columns = names
            .iter()
            .map(|name| self.real(name))
            .collect::<Result<Vec<_>>>()?;
        let n = self.rows.len();
        let mut x = Matrix::zeros(n, names.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                x.row_mut(i)[j] = v;
            }
        }
        Ok((x, names))
    }
}

pub fn load_panel_csv(path: impl AsRef<Path>, cols: &PanelColumns) -> Result<PanelDataset> {
    let table = Table::read(path.as_ref())?;
    let g = table.indicator(&cols.g)?;
    let d = table.indicator(&cols.d)?;
    let y0 = table.real(&cols.y0)?;
    let y1 = table.real(&cols.y1)?;
    let bound = [cols.g.as_str(), cols.d.as_str(), cols.y0.as_str(), cols.y1.as_str()];
    let (x, names) = table.covariates(cols.covariates.as_deref(), &bound)?;
    PanelDataset::with_names(x, names, g, d, y0, y1)
}

pub fn load_rc_csv(path: impl AsRef<Path>, cols: &RcColumns) -> Result<RcDataset> {
    let table = Table::read(path.as_ref())?;
    let g = table.indicator(&cols.g)?;
    let d = table.indicator(&cols.d)?;
    let t = table.indicator(&cols.t)?;
    let y = table.real(&cols.y)?;
    let bound = [cols.g.as_str(), cols.d.as_str(), cols.t.as_str(), cols.y.as_str()];
    let (x, names) = table.covariates(cols.covariates.as_deref(), &bound)?;
    RcDataset::with_names(x, names, g, d, t, y)
}

/// Writes columns `<covariates>,g,d,y0,y1`. Reals use the shortest
/// representation that parses back to the same bits.
pub fn write_panel_csv(data: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.covariate_names.clone();
    header.extend(["g", "d", "y0", "y1"].map(String::from));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(f64::to_string).collect();
        rec.push(data.g[i].to_string());
        rec.push(data.d[i].to_string());
        rec.push(data.y0[i].to_string());
        rec.push(data.y1[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes columns `<covariates>,g,d,t,y`.
pub fn write_rc_csv(data: &RcDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.covariate_names.clone();
    header.extend(["g", "d", "t", "y"].map(String::from));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(f64::to_string).collect();
        rec.push(data.g[i].to_string());
        rec.push(data.d[i].to_string());
        rec.push(data.t[i].to_string());
        rec.push(data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

impl PanelColumns {
    pub fn standard() -> Self {
        Self {
            g: "g".into(),
            d: "d".into(),
            y0: "y0".into(),
            y1: "y1".into(),
            covariates: None,
        }
    }
}

impl RcColumns {
    pub fn standard() -> Self {
        Self {
            g: "g".into(),
            d: "d".into(),
            t: "t".into(),
            y: "y".into(),
            covariates: None,
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Panel => "panel",
            Design::Rc => "rc",
        })
    }
}

pub(crate) fn default_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("x{j}")).collect()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_binary(name: &str, v: &[u8]) -> Result<()> {
    match v.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::NonBinaryIndicator {
            column: name.to_string(),
            row: i + 1,
            value: v[i].to_string(),
        }),
        None => Ok(()),
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFiniteValue {
            column: name.to_string(),
            row: i + 1,
        }),
        None => Ok(()),
    }
}

fn check_finite_matrix(x: &Matrix, names: &[String]) -> Result<()> {
    for i in 0..x.rows() {
        if let Some(j) = x.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                column: names[j].clone(),
                row: i + 1,
            });
        }
    }
    Ok(())
}
