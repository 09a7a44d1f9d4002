//! Two-stage calibration: a grid search over design hyper-parameters with
//! the overdose rule switched off, then a descending scan of the overdose
//! threshold against a no-selection requirement in an all-toxic scenario.

use serde::{Deserialize, Serialize};

use crate::design::DesignConfig;
use crate::error::{invalid, Error, Result};
use crate::scenario::{builtin_by_name, Scenario};
use crate::sim::{simulate, SimSettings};
use crate::stats::geometric_mean;
use crate::trial::TrialConfig;

const SHIPPED: &str = include_str!("../data/calibration.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DesignGrid {
    design: String,
    axes: Vec<Axis>,
    stage1_nsim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlanFile {
    #[serde(default)]
    schema: Option<u32>,
    plans: Vec<DesignGrid>,
    stage1_scenarios: Vec<String>,
    stage2_scenarios: Vec<String>,
    stage2_nsim: usize,
    epsilon_start: f64,
    epsilon_step: f64,
    epsilon_min: f64,
    threshold: f64,
    guard_scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub design: String,
    pub axes: Vec<Axis>,
    pub stage1_nsim: usize,
    pub stage1_scenarios: Vec<String>,
    pub stage2_scenarios: Vec<String>,
    pub stage2_nsim: usize,
    pub epsilon_start: f64,
    pub epsilon_step: f64,
    pub epsilon_min: f64,
    /// Required no-selection rate in the guard scenario.
    pub threshold: f64,
    pub guard_scenario: String,
}

impl CalibrationPlan {
    /// Shipped plan for a design id.
    pub fn shipped(design: &str) -> Result<Self> {
        Self::from_json(SHIPPED, design)
    }

    pub fn from_json(json: &str, design: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(json)?;
        if !matches!(file.schema, None | Some(1)) {
            return Err(invalid("unsupported calibration schema version"));
        }
        let id = DesignConfig::default_for(design)?.id();
        let grid = file
            .plans
            .into_iter()
            .find(|p| p.design == id)
            .ok_or_else(|| Error::Unknown {
                kind: "calibration plan",
                name: design.to_string(),
            })?;
        let plan = Self {
            design: grid.design,
            axes: grid.axes,
            stage1_nsim: grid.stage1_nsim,
            stage1_scenarios: file.stage1_scenarios,
            stage2_scenarios: file.stage2_scenarios,
            stage2_nsim: file.stage2_nsim,
            epsilon_start: file.epsilon_start,
            epsilon_step: file.epsilon_step,
            epsilon_min: file.epsilon_min,
            threshold: file.threshold,
            guard_scenario: file.guard_scenario,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(invalid("calibration axes need at least one value"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("stage-2 threshold must lie in (0,1)"));
        }
        if !(self.epsilon_step > 0.0 && self.epsilon_min > 0.0 && self.epsilon_start <= 1.0) {
            return Err(invalid("epsilon scan needs 0 < min <= start <= 1 and a positive step"));
        }
        Ok(())
    }

    /// Every grid point as a design config with the overdose rule off.
    pub fn settings(&self) -> Result<Vec<Setting>> {
        let base = DesignConfig::default_for(&self.design)?.with_epsilon(1.0);
        let mut out = vec![Setting {
            values: Vec::new(),
            config: base,
        }];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for s in &out {
                for &v in &axis.values {
                    let mut values = s.values.clone();
                    values.push((axis.name.clone(), v));
                    next.push(Setting {
                        config: set_field(&s.config, &axis.name, v)?,
                        values,
                    });
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Descending thresholds `start, start - step, ...` down to `min`.
    pub fn epsilon_grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let e = self.epsilon_start - k as f64 * self.epsilon_step;
            if e < self.epsilon_min - 1e-9 {
                break;
            }
            out.push((e * 1e6).round() / 1e6);
            k += 1;
        }
        out
    }
}

fn set_field(config: &DesignConfig, name: &str, value: f64) -> Result<DesignConfig> {
    let mut v = serde_json::to_value(config)?;
    let obj = v.as_object_mut().expect("design configs serialise to objects");
    if !obj.contains_key(name) || name == "design" {
        return Err(Error::Unknown {
            kind: "design parameter",
            name: name.to_string(),
        });
    }
    obj.insert(name.to_string(), serde_json::json!(value));
    Ok(serde_json::from_value(v)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub values: Vec<(String, f64)>,
    pub config: DesignConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Row {
    pub values: Vec<(String, f64)>,
    /// PCS per stage-1 scenario, in plan order.
    pub pcs: Vec<f64>,
    pub geometric_mean: f64,
    pub arithmetic_mean: f64,
    /// Competition rank: tied settings share a rank.
    pub rank: usize,
}

fn scenarios(names: &[String]) -> Result<Vec<Scenario>> {
    names.iter().map(|n| builtin_by_name(n)).collect()
}

/// Ranked stage-1 table, best first. Every setting sees the same seeds.
pub fn calibrate_stage1(
    plan: &CalibrationPlan,
    cfg: &TrialConfig,
    nsim: usize,
    master_seed: u64,
) -> Result<Vec<Stage1Row>> {
    let scs = scenarios(&plan.stage1_scenarios)?;
    let sim = SimSettings { nsim, master_seed };
    let mut rows = Vec::new();
    for setting in plan.settings()? {
        let mut pcs = Vec::with_capacity(scs.len());
        for sc in &scs {
            pcs.push(simulate(&setting.config, sc, cfg, sim)?.selection.pcs_or_zero());
        }
        rows.push(Stage1Row {
            values: setting.values,
            geometric_mean: geometric_mean(&pcs)?,
            arithmetic_mean: pcs.iter().sum::<f64>() / pcs.len() as f64,
            pcs,
            rank: 0,
        });
    }
    rank_rows(&mut rows);
    Ok(rows)
}

pub(crate) fn rank_rows(rows: &mut [Stage1Row]) {
    let scores: Vec<f64> = rows.iter().map(|r| r.geometric_mean).collect();
    for r in rows.iter_mut() {
        r.rank = 1 + scores.iter().filter(|&&s| s > r.geometric_mean).count();
    }
    rows.sort_by_key(|r| r.rank);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Point {
    pub epsilon: f64,
    pub scenarios: Vec<String>,
    pub pcs: Vec<Option<f64>>,
    pub no_selection: Vec<f64>,
    pub mean_patients_at_toxic: Vec<f64>,
    pub guard_no_selection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Result {
    pub points: Vec<Stage2Point>,
    /// Highest threshold meeting the guard requirement.
    pub chosen: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stage2Options {
    /// Stop at the first threshold that meets the requirement. The answer is
    /// the same; only the curve is shorter.
    pub early_stop: bool,
    /// Simulate only the guard scenario.
    pub guard_only: bool,
    /// Binary search over the threshold grid, assuming the guard
    /// no-selection rate only grows as the threshold falls.
    pub bisect: bool,
}

pub fn calibrate_stage2(
    plan: &CalibrationPlan,
    base: &DesignConfig,
    cfg: &TrialConfig,
    nsim: usize,
    master_seed: u64,
    opts: Stage2Options,
) -> Result<Stage2Result> {
    let mut names = if opts.guard_only {
        Vec::new()
    } else {
        plan.stage2_scenarios.clone()
    };
    if !names.contains(&plan.guard_scenario) {
        names.push(plan.guard_scenario.clone());
    }
    let scs = scenarios(&names)?;
    let guard = names
        .iter()
        .position(|n| *n == plan.guard_scenario)
        .expect("guard scenario included");
    let sim = SimSettings { nsim, master_seed };
    let eval = |eps: f64| -> Result<Stage2Point> {
        let design = base.with_epsilon(eps);
        let mut point = Stage2Point {
            epsilon: eps,
            scenarios: names.clone(),
            pcs: Vec::new(),
            no_selection: Vec::new(),
            mean_patients_at_toxic: Vec::new(),
            guard_no_selection: 0.0,
        };
        for sc in &scs {
            let oc = simulate(&design, sc, cfg, sim)?;
            point.pcs.push(oc.selection.pcs);
            point.no_selection.push(oc.selection.no_selection);
            point.mean_patients_at_toxic.push(oc.mean_patients_at_toxic);
        }
        point.guard_no_selection = point.no_selection[guard];
        Ok(point)
    };
    let grid = plan.epsilon_grid();
    let meets = |p: &Stage2Point| p.guard_no_selection >= plan.threshold;
    let mut points = Vec::new();
    let mut chosen = None;
    if opts.bisect {
        // Invariant: grid[lo] fails, grid[hi] meets.
        let first = eval(grid[0])?;
        let ok = meets(&first);
        points.push(first);
        if ok {
            chosen = Some(grid[0]);
        } else if grid.len() > 1 {
            let (mut lo, mut hi) = (0, grid.len() - 1);
            let last = eval(grid[hi])?;
            let ok = meets(&last);
            points.push(last);
            if ok {
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    let p = eval(grid[mid])?;
                    if meets(&p) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    points.push(p);
                }
                chosen = Some(grid[hi]);
            }
        }
        points.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    } else {
        for eps in grid {
            let point = eval(eps)?;
            let ok = meets(&point);
            points.push(point);
            if ok && chosen.is_none() {
                chosen = Some(eps);
                if opts.early_stop {
                    break;
                }
            }
        }
    }
    Ok(Stage2Result { points, chosen })
}
