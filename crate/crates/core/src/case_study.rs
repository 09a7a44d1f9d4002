//! Replay of a neratinib + temsirolimus combination study on a 3x3 grid.
//!
//! Each combination gets a tape of 36 ordered patient responses. The first
//! `n` entries are a shuffle of the patients actually observed there; the
//! rest are simulated, each patient drawing its own DLT probability from the
//! Beta posterior of that combination (or Beta(3,3) where nobody was dosed).
//! Every design replays the same tape, so designs that visit a combination
//! in the same order see the same patients.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::design::DesignConfig;
use crate::error::{invalid, Result};
use crate::grid::{Combo, DoseGrid, Matrix};
use crate::sim::{run_trial, Responder};
use crate::stats::{Dist, RngStream};
use crate::trial::{CohortRecord, TrialConfig};

pub const TAPE_LEN: usize = 36;
pub const UNTESTED_PRIOR: (f64, f64) = (3.0, 3.0);

const PERMUTE_STREAM: u64 = 11;
const GENERATE_STREAM: u64 = 12;
const DESIGN_STREAM: u64 = 13;

/// Neratinib doses (rows) in mg.
pub const NERATINIB_MG: [f64; 3] = [120.0, 160.0, 200.0];
/// Temsirolimus doses (columns) in mg.
pub const TEMSIROLIMUS_MG: [f64; 3] = [25.0, 50.0, 75.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observed {
    pub n: u32,
    pub y: u32,
}

pub fn grid() -> DoseGrid {
    DoseGrid::new(NERATINIB_MG.to_vec(), TEMSIROLIMUS_MG.to_vec()).expect("valid doses")
}

/// Observed `(n, y)` on the restricted grid; `None` where nobody was dosed.
pub fn observed() -> Matrix<Option<Observed>> {
    let o = |n, y| Some(Observed { n, y });
    Matrix::from_rows(vec![
        vec![o(4, 0), o(5, 1), o(4, 0)],
        vec![o(4, 1), o(5, 0), o(6, 3)],
        vec![o(8, 1), o(2, 1), None],
    ])
    .expect("rectangular")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTape {
    pub seed: u64,
    /// 0/1 responses in the order patients would be enrolled.
    pub responses: Matrix<Vec<u8>>,
    /// Number of leading entries that are real patients.
    pub real: Matrix<u32>,
}

pub fn build_tape(raw: &Matrix<Option<Observed>>, seed: u64) -> Result<ResponseTape> {
    let base = RngStream::new(seed, 0);
    let mut responses = raw.map(|_| Vec::new());
    let mut real = raw.map(|_| 0u32);
    for (idx, (c, cell)) in raw.iter().enumerate() {
        let mut tape = Vec::with_capacity(TAPE_LEN);
        let (a, b) = match cell {
            Some(Observed { n, y }) => {
                if y > n || *n as usize > TAPE_LEN {
                    return Err(invalid(format!("inconsistent observed counts {y}/{n} at {c}")));
                }
                tape.extend(std::iter::repeat_n(1u8, *y as usize));
                tape.extend(std::iter::repeat_n(0u8, (n - y) as usize));
                tape.shuffle(&mut base.derive2(PERMUTE_STREAM, idx as u64));
                real[c] = *n;
                (1.0 + *y as f64, 1.0 + (n - y) as f64)
            }
            None => UNTESTED_PRIOR,
        };
        let mut gen = base.derive2(GENERATE_STREAM, idx as u64);
        while tape.len() < TAPE_LEN {
            let p = gen.draw(Dist::Beta(a, b))?;
            tape.push(gen.draw(Dist::Bernoulli(p))? as u8);
        }
        responses[c] = tape;
    }
    Ok(ResponseTape {
        seed,
        responses,
        real,
    })
}

/// Feeds tape entries per combination in order.
pub struct TapeResponder<'a> {
    tape: &'a ResponseTape,
    cursor: Matrix<usize>,
}

impl<'a> TapeResponder<'a> {
    pub fn new(tape: &'a ResponseTape) -> Self {
        Self {
            cursor: tape.responses.map(|_| 0),
            tape,
        }
    }
}

impl Responder for TapeResponder<'_> {
    fn respond(&mut self, _cohort: u32, combo: Combo, size: u32) -> Result<u32> {
        let tape = &self.tape.responses[combo];
        let start = self.cursor[combo];
        let end = start + size as usize;
        if end > tape.len() {
            return Err(invalid(format!("response tape exhausted at {combo}")));
        }
        self.cursor[combo] = end;
        Ok(tape[start..end].iter().map(|&x| x as u32).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub design: String,
    pub n: Matrix<u32>,
    pub y: Matrix<u32>,
    pub mtc: Option<Combo>,
    pub terminated: bool,
    pub cohort_log: Vec<CohortRecord>,
}

pub fn replay(design: &DesignConfig, tape: &ResponseTape, cfg: &TrialConfig) -> Result<Replay> {
    let g = grid();
    let built = design.build(&g, cfg)?;
    let mut responder = TapeResponder::new(tape);
    let mut rng = RngStream::new(tape.seed, 0).derive(DESIGN_STREAM);
    let out = run_trial(built.as_ref(), &g, cfg, &mut responder, &mut rng)?;
    Ok(Replay {
        design: design.id().to_string(),
        n: out.n,
        y: out.y,
        mtc: out.selected,
        terminated: out.terminated,
        cohort_log: out.cohort_log,
    })
}

/// `y/n` grid with neratinib down the rows; the MTC is starred.
pub fn render(replay: &Replay) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", replay.design.to_uppercase());
    let _ = write!(s, "{:>18}", "temsirolimus");
    let _ = writeln!(s);
    let _ = write!(s, "{:>18}", "");
    for d in TEMSIROLIMUS_MG {
        let _ = write!(s, "{:>8}", format!("{d}mg"));
    }
    let _ = writeln!(s);
    for (r, d) in NERATINIB_MG.iter().enumerate() {
        let label = if r == 0 { "neratinib" } else { "" };
        let _ = write!(s, "{label:>10}{:>8}", format!("{d}mg"));
        for c in 0..TEMSIROLIMUS_MG.len() {
            let combo = Combo::new(r + 1, c + 1);
            let cell = format!("{}/{}", replay.y[combo], replay.n[combo]);
            let cell = if replay.mtc == Some(combo) {
                format!("*{cell}*")
            } else {
                cell
            };
            let _ = write!(s, "{cell:>8}");
        }
        let _ = writeln!(s);
    }
    match replay.mtc {
        Some(c) => {
            let _ = writeln!(
                s,
                "MTC: neratinib {}mg + temsirolimus {}mg",
                NERATINIB_MG[c.i - 1],
                TEMSIROLIMUS_MG[c.j - 1]
            );
        }
        None => {
            let _ = writeln!(s, "MTC: none");
        }
    }
    s
}
