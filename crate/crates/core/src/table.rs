//! Space-time field tables with interpolation and a flat binary format.
//!
//! Byte layout (all little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `RVMFIELD`                          |
//! | 8      | 4    | format version (u32, currently 1)         |
//! | 12     | 4    | components per node (u32, always 6)       |
//! | 16     | 96   | 4 axis descriptors t, x1, x2, x3: min f64, max f64, count u64 |
//! | 112    | …    | values f64, row-major over (t, x1, x2, x3, component) |
//!
//! Components are ordered E1, E2, E3, B1, B2, B3.

use crate::density::{Domain, FieldFn};
use crate::error::{Error, Result};
use crate::kinematics::{FieldValue, Vec3};
use crate::settings::GridSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"RVMFIELD";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16 + 4 * 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Axis { min, max, count }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    /// Cell index and fraction for linear interpolation, None outside.
    #[inline]
    fn locate(&self, s: f64) -> Option<(usize, f64)> {
        if !(s >= self.min && s <= self.max) {
            return None;
        }
        let u = (s - self.min) / self.step();
        // snap to nodes so that node values come back exactly
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            let r = r as usize;
            return Some(if r + 1 >= self.count { (self.count - 2, 1.0) } else { (r, 0.0) });
        }
        let i = (u.floor() as usize).min(self.count - 2);
        Some((i, u - i as f64))
    }
}

/// How values outside the grid are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutsidePolicy {
    /// The field vanishes outside the grid.
    #[default]
    Zero,
    /// The declared domain is the grid itself.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub t: Axis,
    pub x: Axis,
    pub values: Vec<[f64; 6]>,
    pub policy: OutsidePolicy,
}

impl FieldTable {
    pub fn zeros(grid: &GridSpec) -> Self {
        let t = Axis::new(grid.t_min, grid.t_max, grid.n_t);
        let x = Axis::new(-grid.half_width, grid.half_width, grid.n_x);
        FieldTable { t, x, values: vec![[0.0; 6]; grid.n_t * grid.n_x.pow(3)], policy: OutsidePolicy::Zero }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { t_min: self.t.min, t_max: self.t.max, half_width: self.x.max, n_t: self.t.count, n_x: self.x.count }
    }

    /// Fills every node from `f`, in parallel over nodes; the result does
    /// not depend on the number of worker threads.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, Vec3) -> Result<FieldValue> + Sync) -> Result<Self> {
        let mut table = FieldTable::zeros(grid);
        let coords: Vec<(f64, Vec3)> = (0..table.values.len()).map(|k| table.coords(k)).collect();
        let vals: Result<Vec<[f64; 6]>> = coords
            .par_iter()
            .map(|&(t, x)| {
                let v = f(t, x)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("table node t = {t}, x = {x:?}")));
                }
                Ok(v.components())
            })
            .collect();
        table.values = vals?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, it: usize, i: usize, j: usize, k: usize) -> usize {
        let n = self.x.count;
        ((it * n + i) * n + j) * n + k
    }

    /// Grid indices (it, i, j, k) of flat index `idx`.
    pub fn unflatten(&self, idx: usize) -> [usize; 4] {
        let n = self.x.count;
        [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n]
    }

    pub fn coords(&self, idx: usize) -> (f64, Vec3) {
        let [it, i, j, k] = self.unflatten(idx);
        (self.t.node(it), Vec3::new(self.x.node(i), self.x.node(j), self.x.node(k)))
    }

    pub fn value(&self, idx: usize) -> FieldValue {
        FieldValue::from_components(self.values[idx])
    }

    /// Space-time box covered by the nodes.
    pub fn coverage(&self) -> Domain {
        Domain { t_min: self.t.min, t_max: self.t.max, half_width: self.x.max }
    }

    pub fn contains(&self, t: f64, x: Vec3) -> bool {
        t >= self.t.min && t <= self.t.max && x.max_abs() <= self.x.max
    }

    /// Linear in t, trilinear in x; zero outside the grid.
    #[inline]
    pub fn interpolate(&self, t: f64, x: Vec3) -> FieldValue {
        let (Some((it, ft)), Some((i, fx)), Some((j, fy)), Some((k, fz))) =
            (self.t.locate(t), self.x.locate(x.x), self.x.locate(x.y), self.x.locate(x.z))
        else {
            return FieldValue::ZERO;
        };
        let mut acc = [0.0; 6];
        for (dt, wt) in [(0, 1.0 - ft), (1, ft)] {
            if wt == 0.0 {
                continue;
            }
            for (di, wi) in [(0, 1.0 - fx), (1, fx)] {
                for (dj, wj) in [(0, 1.0 - fy), (1, fy)] {
                    let w2 = wt * wi * wj;
                    let base = self.index(it + dt, i + di, j + dj, k);
                    let v0 = &self.values[base];
                    let v1 = &self.values[base + 1];
                    let (w0, w1) = (w2 * (1.0 - fz), w2 * fz);
                    for c in 0..6 {
                        acc[c] += w0 * v0[c] + w1 * v1[c];
                    }
                }
            }
        }
        FieldValue::from_components(acc)
    }

    pub fn map(&self, f: impl Fn(f64, Vec3, FieldValue) -> FieldValue) -> FieldTable {
        let mut out = self.clone();
        for idx in 0..self.len() {
            let (t, x) = self.coords(idx);
            out.values[idx] = f(t, x, self.value(idx)).components();
        }
        out
    }

    /// Node-wise difference; both tables must share the grid.
    pub fn difference(&self, other: &FieldTable) -> Result<FieldTable> {
        if self.t != other.t || self.x != other.x {
            return Err(Error::Invalid("tables live on different grids".into()));
        }
        let mut out = self.clone();
        for (o, (a, b)) in out.values.iter_mut().zip(self.values.iter().zip(&other.values)) {
            for c in 0..6 {
                o[c] = a[c] - b[c];
            }
        }
        Ok(out)
    }

    /// Central-difference gradient [∂ₜ, ∂₁, ∂₂, ∂₃] at a node (one-sided at
    /// the grid edges).
    pub fn node_gradient(&self, idx: usize) -> [FieldValue; 4] {
        let g = self.unflatten(idx);
        let counts = [self.t.count, self.x.count, self.x.count, self.x.count];
        let steps = [self.t.step(), self.x.step(), self.x.step(), self.x.step()];
        let mut out = [FieldValue::ZERO; 4];
        for a in 0..4 {
            let (lo, hi) = (g[a].saturating_sub(1), (g[a] + 1).min(counts[a] - 1));
            let mut gl = g;
            gl[a] = lo;
            let mut gh = g;
            gh[a] = hi;
            let vl = self.value(self.index(gl[0], gl[1], gl[2], gl[3]));
            let vh = self.value(self.index(gh[0], gh[1], gh[2], gh[3]));
            out[a] = (vh - vl).scale(1.0 / ((hi - lo) as f64 * steps[a]));
        }
        out
    }

    /// Largest |E| + |B| over the nodes of each time slice.
    pub fn slice_force_bounds(&self) -> Vec<f64> {
        let per = self.x.count.pow(3);
        (0..self.t.count)
            .map(|it| {
                self.values[it * per..(it + 1) * per]
                    .iter()
                    .map(|v| {
                        let f = FieldValue::from_components(*v);
                        f.e.norm() + f.b.norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Rigorous bound on ∫|K| ds along any path for the interpolated field.
    pub fn momentum_drift_bound(&self) -> f64 {
        let m = self.slice_force_bounds();
        let h = self.t.step();
        m.windows(2).map(|w| h * w[0].max(w[1])).sum()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&6u32.to_le_bytes())?;
        for ax in [self.t, self.x, self.x, self.x] {
            w.write_all(&ax.min.to_le_bytes())?;
            w.write_all(&ax.max.to_le_bytes())?;
            w.write_all(&(ax.count as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 48);
        for v in &self.values {
            for c in v {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut head = [0u8; HEADER_BYTES];
        r.read_exact(&mut head).map_err(|e| Error::Format(format!("short header: {e}")))?;
        if &head[0..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
        if u32_at(8) != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", u32_at(8))));
        }
        if u32_at(12) != 6 {
            return Err(Error::Format("expected 6 components per node".into()));
        }
        let axes: Vec<Axis> =
            (0..4).map(|a| Axis::new(f64_at(16 + 24 * a), f64_at(24 + 24 * a), u64_at(32 + 24 * a) as usize)).collect();
        if axes[1] != axes[2] || axes[1] != axes[3] {
            return Err(Error::Format("spatial axes must agree".into()));
        }
        if axes.iter().any(|a| a.count < 2 || !(a.max > a.min)) {
            return Err(Error::Format("degenerate axis".into()));
        }
        let n = axes[0].count * axes[1].count.pow(3);
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != n * 48 {
            return Err(Error::Format(format!("expected {} value bytes, found {}", n * 48, raw.len())));
        }
        let values = raw
            .chunks_exact(48)
            .map(|ch| {
                let mut v = [0.0; 6];
                for (c, b) in v.iter_mut().zip(ch.chunks_exact(8)) {
                    *c = f64::from_le_bytes(b.try_into().expect("8 bytes"));
                }
                v
            })
            .collect();
        Ok(FieldTable { t: axes[0], x: axes[1], values, policy: OutsidePolicy::Zero })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

impl FieldFn for FieldTable {
    fn eval(&self, t: f64, x: Vec3) -> FieldValue {
        self.interpolate(t, x)
    }

    fn domain(&self) -> Domain {
        match self.policy {
            OutsidePolicy::Zero => Domain::EVERYWHERE,
            OutsidePolicy::Strict => Domain { t_min: self.t.min, t_max: self.t.max, half_width: self.x.max },
        }
    }

    fn active_window(&self) -> Option<(f64, f64)> {
        Some((self.t.min, self.t.max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec { t_min: -1.0, t_max: 1.0, half_width: 2.0, n_t: 3, n_x: 5 }
    }

    #[test]
    fn interpolation_is_exact_for_multilinear_fields() {
        let f = |t: f64, x: Vec3| FieldValue::new(Vec3::new(1.0 + t * x.x, x.y * x.z, 2.0 * t), Vec3::new(x.x * x.y * x.z, -t, 0.5));
        let table = FieldTable::from_fn(&grid(), |t, x| Ok(f(t, x))).unwrap();
        for &(t, x) in &[(0.3, Vec3::new(0.1, -1.7, 0.9)), (-0.99, Vec3::new(1.99, 0.0, -2.0))] {
            let (a, b) = (table.interpolate(t, x), f(t, x));
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(table.interpolate(1.5, Vec3::ZERO), FieldValue::ZERO);
        assert_eq!(table.interpolate(0.0, Vec3::new(2.5, 0.0, 0.0)), FieldValue::ZERO);
    }

    #[test]
    fn binary_roundtrip() {
        let table = FieldTable::from_fn(&grid(), |t, x| Ok(FieldValue::new(x * t, Vec3::new(t, 1.0, x.z)))).unwrap();
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_BYTES + table.len() * 48);
        assert_eq!(&buf[0..8], MAGIC);
        let back = FieldTable::read_from(&buf[..]).unwrap();
        assert_eq!(back, table);
        buf[0] = b'X';
        assert!(FieldTable::read_from(&buf[..]).is_err());
        assert!(FieldTable::read_from(&buf[..40]).is_err());
    }

    #[test]
    fn nodes_are_reproduced() {
        let table = FieldTable::from_fn(&grid(), |t, x| Ok(FieldValue::new(Vec3::new((t + x.x).sin(), x.y, x.z * x.z), Vec3::ZERO))).unwrap();
        for idx in [0, 17, table.len() - 1] {
            let (t, x) = table.coords(idx);
            assert_eq!(table.interpolate(t, x), table.value(idx));
        }
    }
}
