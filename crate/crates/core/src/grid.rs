//! Combination lattice: dose levels, combinations, per-combination matrices
//! and the admissible-move rules shared by every design.
//!
//! Combinations are 1-based `(i, j)` with `i` indexing drug A (rows) and `j`
//! indexing drug B (columns). Toxicity is assumed non-decreasing in both
//! indices; combinations on the same anti-diagonal are unordered.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Combo {
    pub i: usize,
    pub j: usize,
}

impl Combo {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// True when `self` is at least as high as `other` in both drugs.
    pub fn dominates(&self, other: &Combo) -> bool {
        self.i >= other.i && self.j >= other.j
    }

    pub fn offset(&self, di: isize, dj: isize) -> Option<Combo> {
        let i = self.i as isize + di;
        let j = self.j as isize + dj;
        (i >= 1 && j >= 1).then(|| Combo::new(i as usize, j as usize))
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl Serialize for Combo {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.i, self.j].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Combo {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [i, j] = <[usize; 2]>::deserialize(d)?;
        Ok(Combo::new(i, j))
    }
}

/// Dense row-major matrix over the combination lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(Error::Dimension("matrix must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c].clone());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

impl<T> Matrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Zero-based access.
    pub fn at(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    /// Iterate `(combo, value)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (Combo, &T)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| (Combo::new(k / cols + 1, k % cols + 1), v))
    }

    pub fn contains(&self, c: Combo) -> bool {
        c.i >= 1 && c.j >= 1 && c.i <= self.rows && c.j <= self.cols
    }
}

impl<T> Index<Combo> for Matrix<T> {
    type Output = T;
    fn index(&self, c: Combo) -> &T {
        debug_assert!(self.contains(c), "{c} outside {}x{}", self.rows, self.cols);
        &self.data[(c.i - 1) * self.cols + (c.j - 1)]
    }
}

impl<T> IndexMut<Combo> for Matrix<T> {
    fn index_mut(&mut self, c: Combo) -> &mut T {
        debug_assert!(self.contains(c), "{c} outside {}x{}", self.rows, self.cols);
        &mut self.data[(c.i - 1) * self.cols + (c.j - 1)]
    }
}

impl<T: Serialize + Clone> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, T: Deserialize<'de> + Clone> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Dose levels of the two agents, in mg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseGrid {
    doses_a: Vec<f64>,
    doses_b: Vec<f64>,
}

impl DoseGrid {
    pub fn new(doses_a: Vec<f64>, doses_b: Vec<f64>) -> Result<Self> {
        for (name, doses) in [("A", &doses_a), ("B", &doses_b)] {
            if doses.is_empty() {
                return Err(invalid(format!("drug {name} needs at least one dose")));
            }
            if doses.iter().any(|d| !d.is_finite() || *d <= 0.0) {
                return Err(invalid(format!("drug {name} doses must be positive")));
            }
            if doses.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("drug {name} doses must be strictly increasing")));
            }
        }
        Ok(Self { doses_a, doses_b })
    }

    /// The 3x3 grid used throughout the simulation study: 100/200/300 mg of each drug.
    pub fn standard() -> Self {
        Self::new(vec![100.0, 200.0, 300.0], vec![100.0, 200.0, 300.0])
            .expect("static grid is valid")
    }

    /// Grid with unit-spaced dose labels, for callers that only care about levels.
    pub fn levels(rows: usize, cols: usize) -> Result<Self> {
        Self::new(
            (1..=rows).map(|k| k as f64).collect(),
            (1..=cols).map(|k| k as f64).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.doses_a.len()
    }

    pub fn cols(&self) -> usize {
        self.doses_b.len()
    }

    pub fn doses_a(&self) -> &[f64] {
        &self.doses_a
    }

    pub fn doses_b(&self) -> &[f64] {
        &self.doses_b
    }

    pub fn contains(&self, c: Combo) -> bool {
        c.i >= 1 && c.j >= 1 && c.i <= self.rows() && c.j <= self.cols()
    }

    pub fn check(&self, c: Combo) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfGrid(c, self.rows(), self.cols()))
        }
    }

    pub fn combos(&self) -> impl Iterator<Item = Combo> + '_ {
        (1..=self.rows()).flat_map(move |i| (1..=self.cols()).map(move |j| Combo::new(i, j)))
    }

    pub fn matrix<T: Clone>(&self, value: T) -> Matrix<T> {
        Matrix::filled(self.rows(), self.cols(), value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityMode {
    /// Stay, or move one level in exactly one drug.
    Rectilinear,
    /// Rectilinear moves plus diagonal de-escalation and anti-diagonal moves.
    Extended,
}

impl AdmissibilityMode {
    fn moves(self) -> &'static [(isize, isize)] {
        const RECT: &[(isize, isize)] = &[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];
        const EXT: &[(isize, isize)] = &[
            (0, 0),
            (-1, 0),
            (1, 0),
            (0, -1),
            (0, 1),
            (-1, -1),
            (1, -1),
            (-1, 1),
        ];
        match self {
            AdmissibilityMode::Rectilinear => RECT,
            AdmissibilityMode::Extended => EXT,
        }
    }
}

/// Combinations the next cohort may receive from `current`. Diagonal
/// escalation `(i+1, j+1)` and level skipping are never admissible.
pub fn admissible_set(
    current: Combo,
    grid: &DoseGrid,
    mode: AdmissibilityMode,
    eliminated: &Matrix<bool>,
) -> Vec<Combo> {
    mode.moves()
        .iter()
        .filter_map(|&(di, dj)| current.offset(di, dj))
        .filter(|c| grid.contains(*c) && !eliminated[*c])
        .collect()
}
