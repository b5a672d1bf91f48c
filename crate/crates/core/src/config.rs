//! Run configuration: a text file of `key = value` lines with `#` comments.
//!
//! Required keys are `n_x` and `n_y`; everything else has a default. Unknown
//! keys are rejected and every validation error names the offending key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolution::MAX_DT_FACTOR;
use crate::fields::{Grid1D, TransverseGrid};

/// Largest admissible initial amplitude.
pub const MAX_EPSILON: f64 = 0.05;

/// Validated configuration of a lab run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabConfig {
    /// Radius of the ball containing the initial data.
    pub k: f64,
    pub epsilon: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// Side length of the periodic transverse square.
    pub side: f64,
    pub n_y: usize,
    pub dt_factor: f64,
    pub t_end: f64,
    /// Offset of the bump centre along x.
    pub bump_center_x: f64,
    /// Cadence of snapshot files; 0 disables them.
    pub snapshot_dt: f64,
    /// Cadence of full-grid diagnostics.
    pub diag_dt: f64,
    /// Threshold for the support radius, relative to epsilon.
    pub support_rel_tol: f64,
    /// Central hyperboloid times for the hyperbolic capture; empty disables it.
    pub hyper_slices: Vec<f64>,
    pub hyper_dt: f64,
    pub hyper_nr: usize,
    pub hyper_ntheta: usize,
    pub seed: u64,
    pub out_dir: String,
    /// Largest |w| accepted by the modulation decomposition.
    pub eps0: f64,
}

const KEYS: &[&str] = &[
    "K",
    "epsilon",
    "x_max",
    "n_x",
    "side",
    "n_y",
    "dt_factor",
    "t_end",
    "bump_center_x",
    "snapshot_dt",
    "diag_dt",
    "support_rel_tol",
    "hyper_slices",
    "hyper_dT",
    "hyper_nR",
    "hyper_ntheta",
    "seed",
    "out_dir",
    "eps0",
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| LabError::config(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(LabError::config(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| LabError::config(key, format!("`{v}` is not a non-negative integer")))
}

impl LabConfig {
    /// Config with defaults for the given grid sizes.
    pub fn with_grid(n_x: usize, n_y: usize) -> Self {
        let t_end = 60.0;
        let k = 2.0;
        let epsilon = 0.01;
        Self {
            k,
            epsilon,
            x_max: t_end + k + 2.0,
            n_x,
            side: 2.0 * (t_end + k + 2.0),
            n_y,
            dt_factor: MAX_DT_FACTOR,
            t_end,
            bump_center_x: 0.5,
            snapshot_dt: 0.0,
            diag_dt: 0.5,
            support_rel_tol: 1e-2,
            hyper_slices: vec![8.0, 14.0, 20.0, 26.0, 32.0, 38.0, 44.0],
            hyper_dt: 0.25,
            hyper_nr: 16,
            hyper_ntheta: 24,
            seed: 0,
            out_dir: "out".into(),
            eps0: crate::modulation::DEFAULT_EPS0,
        }
    }

    /// Parses `key = value` text; see the module docs.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Format(format!("line {}: expected `key = value`", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(LabError::config(k, "unknown key"));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(LabError::config(k, "given more than once"));
            }
        }
        let req = |key: &str| {
            map.get(key)
                .ok_or_else(|| LabError::config(key, "missing required key"))
        };
        let n_x = parse_usize("n_x", req("n_x")?)?;
        let n_y = parse_usize("n_y", req("n_y")?)?;
        let mut c = Self::with_grid(n_x, n_y);
        let f = |key: &str, d: f64| map.get(key).map_or(Ok(d), |v| parse_f64(key, v));
        let u = |key: &str, d: usize| map.get(key).map_or(Ok(d), |v| parse_usize(key, v));
        c.k = f("K", c.k)?;
        c.epsilon = f("epsilon", c.epsilon)?;
        c.t_end = f("t_end", c.t_end)?;
        c.x_max = f("x_max", c.t_end + c.k + 2.0)?;
        c.side = f("side", 2.0 * (c.t_end + c.k + 2.0))?;
        c.dt_factor = f("dt_factor", c.dt_factor)?;
        c.bump_center_x = f("bump_center_x", c.bump_center_x)?;
        c.snapshot_dt = f("snapshot_dt", c.snapshot_dt)?;
        c.diag_dt = f("diag_dt", c.diag_dt)?;
        c.support_rel_tol = f("support_rel_tol", c.support_rel_tol)?;
        c.hyper_dt = f("hyper_dT", c.hyper_dt)?;
        c.hyper_nr = u("hyper_nR", c.hyper_nr)?;
        c.hyper_ntheta = u("hyper_ntheta", c.hyper_ntheta)?;
        c.eps0 = f("eps0", c.eps0)?;
        if let Some(v) = map.get("seed") {
            c.seed = v
                .parse()
                .map_err(|_| LabError::config("seed", format!("`{v}` is not an unsigned integer")))?;
        }
        if let Some(v) = map.get("out_dir") {
            c.out_dir = v.clone();
        }
        if let Some(v) = map.get("hyper_slices") {
            c.hyper_slices = if v.is_empty() {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| parse_f64("hyper_slices", s.trim()))
                    .collect::<Result<_>>()?
            };
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads and parses a config file.
    pub fn parse_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Checks every invariant; errors name the key and the violated bound.
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(LabError::config("K", format!("{} must be positive", self.k)));
        }
        if !(0.0..=MAX_EPSILON).contains(&self.epsilon) {
            return Err(LabError::config(
                "epsilon",
                format!("{} must lie in [0, {MAX_EPSILON}]", self.epsilon),
            ));
        }
        if !(self.t_end > 0.0) {
            return Err(LabError::config("t_end", format!("{} must be positive", self.t_end)));
        }
        let need_x = self.t_end + self.k + 2.0;
        if self.x_max < need_x {
            return Err(LabError::config(
                "x_max",
                format!("{} violates containment bound x_max >= t_end + K + 2 = {need_x}", self.x_max),
            ));
        }
        let need_side = 2.0 * (self.t_end + self.k + 2.0);
        if self.side < need_side {
            return Err(LabError::config(
                "side",
                format!("{} violates containment bound side >= 2(t_end + K + 2) = {need_side}", self.side),
            ));
        }
        Grid1D::new(self.x_max, self.n_x).map_err(|e| LabError::config("n_x", e.to_string()))?;
        TransverseGrid::new(self.side, self.n_y).map_err(|e| LabError::config("n_y", e.to_string()))?;
        if !(self.dt_factor > 0.0 && self.dt_factor <= MAX_DT_FACTOR) {
            return Err(LabError::config(
                "dt_factor",
                format!("{} must lie in (0, {MAX_DT_FACTOR}]", self.dt_factor),
            ));
        }
        if self.bump_center_x.abs() >= self.k {
            return Err(LabError::config(
                "bump_center_x",
                format!("|{}| must be below K = {}", self.bump_center_x, self.k),
            ));
        }
        if self.snapshot_dt < 0.0 {
            return Err(LabError::config("snapshot_dt", "must be non-negative"));
        }
        if !(self.diag_dt > 0.0) {
            return Err(LabError::config("diag_dt", "must be positive"));
        }
        if !(self.support_rel_tol > 0.0 && self.support_rel_tol < 1.0) {
            return Err(LabError::config("support_rel_tol", "must lie in (0, 1)"));
        }
        if !(self.eps0 > 0.0) {
            return Err(LabError::config("eps0", "must be positive"));
        }
        if !self.hyper_slices.is_empty() {
            if !(self.hyper_dt > 0.0) {
                return Err(LabError::config("hyper_dT", "must be positive"));
            }
            if self.hyper_nr < 2 {
                return Err(LabError::config("hyper_nR", "must be at least 2"));
            }
            if self.hyper_ntheta < 4 {
                return Err(LabError::config("hyper_ntheta", "must be at least 4"));
            }
            let top = self.t_end + 2.0 * self.k;
            for &t in &self.hyper_slices {
                if t - self.hyper_dt < 2.0 * self.k || t + self.hyper_dt >= top {
                    return Err(LabError::config(
                        "hyper_slices",
                        format!(
                            "{t} must satisfy 2K + hyper_dT <= T < t_end + 2K - hyper_dT = {}",
                            top - self.hyper_dt
                        ),
                    ));
                }
            }
            if self.hyper_slices.windows(2).any(|p| !(p[1] > p[0])) {
                return Err(LabError::config("hyper_slices", "must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn x_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_max, self.n_x)
    }
    pub fn y_grid(&self) -> Result<TransverseGrid> {
        TransverseGrid::new(self.side, self.n_y)
    }

    /// Time step dt_factor · min(dx, dy), shrunk so that t_end is an
    /// integer number of steps.
    pub fn dt(&self) -> Result<f64> {
        Ok(self.t_end / self.n_steps()? as f64)
    }

    pub fn n_steps(&self) -> Result<usize> {
        let h = self.x_grid()?.dx().min(self.y_grid()?.dy());
        Ok((self.t_end / (self.dt_factor * h) - 1e-9).ceil().max(1.0) as usize)
    }

    /// Canonical `key = value` text; parsing it gives back an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let fl = |x: f64| format!("{x:?}");
        let _ = writeln!(s, "K = {}", fl(self.k));
        let _ = writeln!(s, "epsilon = {}", fl(self.epsilon));
        let _ = writeln!(s, "x_max = {}", fl(self.x_max));
        let _ = writeln!(s, "n_x = {}", self.n_x);
        let _ = writeln!(s, "side = {}", fl(self.side));
        let _ = writeln!(s, "n_y = {}", self.n_y);
        let _ = writeln!(s, "dt_factor = {}", fl(self.dt_factor));
        let _ = writeln!(s, "t_end = {}", fl(self.t_end));
        let _ = writeln!(s, "bump_center_x = {}", fl(self.bump_center_x));
        let _ = writeln!(s, "snapshot_dt = {}", fl(self.snapshot_dt));
        let _ = writeln!(s, "diag_dt = {}", fl(self.diag_dt));
        let _ = writeln!(s, "support_rel_tol = {}", fl(self.support_rel_tol));
        let slices: Vec<String> = self.hyper_slices.iter().map(|x| fl(*x)).collect();
        let _ = writeln!(s, "hyper_slices = {}", slices.join(", "));
        let _ = writeln!(s, "hyper_dT = {}", fl(self.hyper_dt));
        let _ = writeln!(s, "hyper_nR = {}", self.hyper_nr);
        let _ = writeln!(s, "hyper_ntheta = {}", self.hyper_ntheta);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "eps0 = {}", fl(self.eps0));
        s
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        crate::io::hash_text(&self.serialize())
    }
}
