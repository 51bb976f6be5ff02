use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridFunction, ProductGrid};
use crate::norm::{mixed_norm, ExponentVector};
use crate::operators::GridOperator;

/// Candidates evaluated before hill-climbing starts.
pub const ASCENT_WARMUP: usize = 64;

/// Half-width, in cells, of the balls used by the layered family.
pub const LAYER_RADIUS: usize = 2;

const LAYERED_VARIANTS: usize = 3;
const STREAM_RANDOM: u64 = 0;
const STREAM_SLICE: u64 = 1 << 62;
const STREAM_ASCENT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Nonnegative Gaussian bump mixtures.
    Random,
    /// Indicators of small balls, point masses, and `chi_B(y_1) * s(y_2, ..., y_n)`.
    Layered,
    /// Multiplicative hill-climbing from the best of a short layered/random warmup.
    Ascent,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Layered => "layered",
            Strategy::Ascent => "ascent",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "layered" => Ok(Strategy::Layered),
            "ascent" => Ok(Strategy::Ascent),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Description of the test function that produced the best ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Witness {
    None,
    Bumps {
        centers: Vec<Vec<f64>>,
        widths: Vec<Vec<f64>>,
        amplitudes: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        center_index: usize,
        radius_cells: usize,
    },
    PointMass {
        center: Vec<f64>,
        center_index: usize,
    },
    LayeredSlice {
        center: Vec<f64>,
        center_index: usize,
        radius_cells: usize,
        slice: Box<Witness>,
    },
    Ascent {
        start: Box<Witness>,
        accepted: usize,
        steps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressPoint {
    pub sample: usize,
    pub best: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementPoint {
    pub nodes: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub operator: String,
    pub strategy: Strategy,
    pub formula_value: Option<f64>,
    pub empirical_lower: f64,
    pub witness: Witness,
    /// Flat index of the largest value of the witness.
    pub witness_peak: Option<usize>,
    pub samples: usize,
    /// Candidates with zero or non-finite input norm.
    pub skipped: usize,
    pub seed: u64,
    pub refinement: Vec<RefinementPoint>,
    pub progress: Vec<ProgressPoint>,
}

impl NormReport {
    pub fn with_formula(mut self, value: f64) -> Self {
        self.formula_value = Some(value);
        self
    }

    /// True if the estimate exceeds the formula value by more than `rel_tol`.
    pub fn violates_formula(&self, rel_tol: f64) -> bool {
        self.formula_value
            .is_some_and(|v| self.empirical_lower > v * (1.0 + rel_tol))
    }
}

struct Candidate {
    values: Vec<f64>,
    witness: Witness,
}

/// Ratio maximizer for `||T f||_{L_P} / ||f||_{L_Q}` over test functions on the
/// operator's input domain.
///
/// Candidate `k` of every family depends only on `(seed, k)`, so a larger
/// budget sees a superset of the candidates of a smaller one.
pub struct Estimator<'a> {
    op: &'a dyn GridOperator,
    q: &'a ExponentVector,
    p: &'a ExponentVector,
    seed: u64,
    grid: Arc<ProductGrid>,
    mask: DomainMask,
    /// Masked, positively weighted nodes in bit-reversed order.
    centers: Vec<usize>,
}

fn bit_reversed(len: usize) -> Vec<usize> {
    if len <= 1 {
        return (0..len).collect();
    }
    let bits = usize::BITS - (len - 1).leading_zeros();
    (0..1usize << bits)
        .map(|i| i.reverse_bits() >> (usize::BITS - bits))
        .filter(|&j| j < len)
        .collect()
}

impl<'a> Estimator<'a> {
    pub fn new(op: &'a dyn GridOperator, q: &'a ExponentVector, p: &'a ExponentVector, seed: u64) -> Result<Self> {
        let (grid, mask) = op.domain();
        if q.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "input exponent vector has {} entries for a {}-dimensional domain",
                q.len(),
                grid.dim()
            )));
        }
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&k| mask.contains(k) && grid.weight(k) > 0.0)
            .collect();
        let centers = bit_reversed(nodes.len()).into_iter().map(|j| nodes[j]).collect();
        Ok(Self {
            op,
            q,
            p,
            seed,
            grid: grid.clone(),
            mask: mask.clone(),
            centers,
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// `Some(||Tf|| / ||f||)`, or `None` when `f` has zero or non-finite norm.
    pub fn ratio(&self, values: Vec<f64>) -> Result<Option<f64>> {
        let f = GridFunction::new(self.grid.clone(), self.mask.clone(), values)?;
        let nf = mixed_norm(&f, self.q)?;
        if !(nf > 0.0) || !nf.is_finite() {
            return Ok(None);
        }
        let tf = self.op.apply(&f)?;
        Ok(Some(mixed_norm(&tf, self.p)? / nf))
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.grid.dim()];
        self.grid.point(flat, &mut x);
        x
    }

    /// Visit masked nodes whose index lies in `lo..=hi` on every axis.
    fn for_each_in_box(&self, lo: &[usize], hi: &[usize], mut visit: impl FnMut(usize, &[usize])) {
        let n = self.grid.dim();
        let strides = self.grid.strides();
        let mut idx = lo.to_vec();
        loop {
            let flat: usize = idx.iter().zip(strides).map(|(i, s)| i * s).sum();
            if self.mask.contains(flat) {
                visit(flat, &idx);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = lo[axis];
            }
        }
    }

    fn index_box(&self, center: usize, radius: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut idx = vec![0; self.grid.dim()];
        self.grid.unravel(center, &mut idx);
        let shape = self.grid.shape();
        let lo = idx.iter().zip(radius).map(|(&c, &r)| c.saturating_sub(r)).collect();
        let hi = idx
            .iter()
            .zip(radius)
            .zip(shape)
            .map(|((&c, &r), &m)| (c + r).min(m - 1))
            .collect();
        (lo, hi)
    }

    /// Gaussian bumps over `axes`; other coordinates are ignored.
    fn bumps(&self, rng: &mut ChaCha8Rng, axes: std::ops::Range<usize>) -> (Vec<f64>, Witness) {
        let count = rng.random_range(1..=4usize);
        let mut centers = Vec::with_capacity(count);
        let mut widths = Vec::with_capacity(count);
        let mut amplitudes = Vec::with_capacity(count);
        let mut idx = vec![0; self.grid.dim()];
        for _ in 0..count {
            let node = self.centers[rng.random_range(0..self.centers.len())];
            self.grid.unravel(node, &mut idx);
            let c = self.point(node);
            let mut w = Vec::with_capacity(axes.len());
            for i in axes.clone() {
                let ax = self.grid.axis(i);
                let lo = (2.0 * ax.cell_length(idx[i])).ln();
                let hi = (0.5 * (ax.hi() - ax.lo())).ln().max(lo);
                w.push(if hi > lo { rng.random_range(lo..=hi).exp() } else { lo.exp() });
            }
            centers.push(c[axes.clone()].to_vec());
            widths.push(w);
            amplitudes.push(rng.random_range(0.1..=1.0f64));
        }
        let n = self.grid.dim();
        let mut values = vec![0.0; self.grid.len()];
        let mut x = vec![0.0; n];
        for &k in &self.centers {
            self.grid.point(k, &mut x);
            let mut v = 0.0;
            for ((c, w), a) in centers.iter().zip(&widths).zip(&amplitudes) {
                let r2: f64 = axes
                    .clone()
                    .zip(c.iter().zip(w))
                    .map(|(i, (ci, wi))| ((x[i] - ci) / wi).powi(2))
                    .sum();
                v += a * (-0.5 * r2).exp();
            }
            values[k] = v;
        }
        (
            values,
            Witness::Bumps {
                centers,
                widths,
                amplitudes,
            },
        )
    }

    fn random_candidate(&self, k: usize) -> Candidate {
        let mut rng = self.rng(STREAM_RANDOM + k as u64);
        let (values, witness) = self.bumps(&mut rng, 0..self.grid.dim());
        Candidate { values, witness }
    }

    fn layered_candidate(&self, k: usize) -> Candidate {
        let n = self.grid.dim();
        let center = self.centers[(k / LAYERED_VARIANTS) % self.centers.len()];
        let mut values = vec![0.0; self.grid.len()];
        match k % LAYERED_VARIANTS {
            0 => {
                let (lo, hi) = self.index_box(center, &vec![LAYER_RADIUS; n]);
                self.for_each_in_box(&lo, &hi, |flat, _| values[flat] = 1.0);
                Candidate {
                    values,
                    witness: Witness::Ball {
                        center: self.point(center),
                        center_index: center,
                        radius_cells: LAYER_RADIUS,
                    },
                }
            }
            1 => {
                values[center] = 1.0;
                Candidate {
                    values,
                    witness: Witness::PointMass {
                        center: self.point(center),
                        center_index: center,
                    },
                }
            }
            _ if n == 1 => {
                let (lo, hi) = self.index_box(center, &[1]);
                self.for_each_in_box(&lo, &hi, |flat, _| values[flat] = 1.0);
                Candidate {
                    values,
                    witness: Witness::Ball {
                        center: self.point(center),
                        center_index: center,
                        radius_cells: 1,
                    },
                }
            }
            _ => {
                let mut rng = self.rng(STREAM_SLICE + k as u64);
                let (slice, slice_witness) = self.bumps(&mut rng, 1..n);
                let mut radius = vec![0; n];
                radius[0] = LAYER_RADIUS;
                let (mut lo, mut hi) = self.index_box(center, &radius);
                for i in 1..n {
                    lo[i] = 0;
                    hi[i] = self.grid.shape()[i] - 1;
                }
                self.for_each_in_box(&lo, &hi, |flat, _| values[flat] = slice[flat]);
                Candidate {
                    values,
                    witness: Witness::LayeredSlice {
                        center: self.point(center),
                        center_index: center,
                        radius_cells: LAYER_RADIUS,
                        slice: Box::new(slice_witness),
                    },
                }
            }
        }
    }

    fn warmup_candidate(&self, k: usize) -> Candidate {
        if k.is_multiple_of(2) {
            self.layered_candidate(k / 2)
        } else {
            self.random_candidate(k / 2)
        }
    }

    /// Evaluate candidates `0..count` and return (best index, best ratio, skipped, progress).
    fn sweep(
        &self,
        count: usize,
        make: impl Fn(usize) -> Candidate + Sync,
    ) -> Result<(Option<(usize, f64)>, usize, Vec<ProgressPoint>)> {
        let ratios: Vec<Option<f64>> = (0..count)
            .into_par_iter()
            .map(|k| self.ratio(make(k).values))
            .collect::<Result<_>>()?;
        let mut best: Option<(usize, f64)> = None;
        let mut skipped = 0;
        let mut progress = Vec::new();
        for (k, r) in ratios.into_iter().enumerate() {
            match r {
                Some(r) if r.is_finite() => {
                    if best.is_none_or(|(_, b)| r > b) {
                        best = Some((k, r));
                        progress.push(ProgressPoint { sample: k + 1, best: r });
                    }
                }
                _ => skipped += 1,
            }
        }
        Ok((best, skipped, progress))
    }

    fn perturb(&self, current: &[f64], step: usize) -> Vec<f64> {
        let n = self.grid.dim();
        let mut rng = self.rng(STREAM_ASCENT + step as u64);
        let center = self.centers[rng.random_range(0..self.centers.len())];
        let mut cidx = vec![0; n];
        self.grid.unravel(center, &mut cidx);
        let sigma: Vec<f64> = self
            .grid
            .shape()
            .iter()
            .map(|&m| rng.random_range(0.5..=(m as f64 / 6.0).max(1.0)))
            .collect();
        let delta = rng.random_range(-0.5..=1.0f64);
        let eta = if rng.random::<bool>() { rng.random_range(0.0..=0.25f64) } else { 0.0 };
        let fmax = current.iter().fold(0.0f64, |m, v| m.max(*v));
        let radius: Vec<usize> = sigma.iter().map(|s| (4.0 * s).ceil() as usize).collect();
        let (lo, hi) = self.index_box(center, &radius);
        let mut next = current.to_vec();
        self.for_each_in_box(&lo, &hi, |flat, idx| {
            let r2: f64 = idx
                .iter()
                .zip(&cidx)
                .zip(&sigma)
                .map(|((&i, &c), s)| ((i as f64 - c as f64) / s).powi(2))
                .sum();
            let b = (-0.5 * r2).exp();
            next[flat] = (current[flat] * (1.0 + delta * b) + eta * fmax * b).max(0.0);
        });
        next
    }

    fn peak(values: &[f64]) -> Option<usize> {
        values
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
                Some((_, b)) if b >= v.abs() => best,
                _ if v != 0.0 => Some((k, v.abs())),
                _ => best,
            })
            .map(|(k, _)| k)
    }

    pub fn run(&self, strategy: Strategy, budget: usize) -> Result<NormReport> {
        if budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        let mut report = NormReport {
            operator: self.op.name(),
            strategy,
            formula_value: None,
            empirical_lower: 0.0,
            witness: Witness::None,
            witness_peak: None,
            samples: budget,
            skipped: 0,
            seed: self.seed,
            refinement: Vec::new(),
            progress: Vec::new(),
        };
        if self.centers.is_empty() {
            report.skipped = budget;
            return Ok(report);
        }
        let make: &(dyn Fn(usize) -> Candidate + Sync) = match strategy {
            Strategy::Random => &|k| self.random_candidate(k),
            Strategy::Layered => &|k| self.layered_candidate(k),
            Strategy::Ascent => &|k| self.warmup_candidate(k),
        };
        let first = if strategy == Strategy::Ascent { budget.min(ASCENT_WARMUP) } else { budget };
        let (best, skipped, progress) = self.sweep(first, make)?;
        report.skipped = skipped;
        report.progress = progress;
        let Some((k, ratio)) = best else {
            return Ok(report);
        };
        let start = make(k);
        report.empirical_lower = ratio;
        if strategy != Strategy::Ascent {
            report.witness_peak = Self::peak(&start.values);
            report.witness = start.witness;
        } else {
            let mut current = start.values;
            let mut best = ratio;
            let mut accepted = 0;
            let steps = budget - first;
            for s in 0..steps {
                let trial = self.perturb(&current, s);
                match self.ratio(trial.clone())? {
                    Some(r) if r.is_finite() && r > best => {
                        best = r;
                        current = trial;
                        accepted += 1;
                        report.progress.push(ProgressPoint {
                            sample: first + s + 1,
                            best,
                        });
                    }
                    Some(r) if r.is_finite() => {}
                    _ => report.skipped += 1,
                }
            }
            report.empirical_lower = best;
            report.witness_peak = Self::peak(&current);
            report.witness = Witness::Ascent {
                start: Box::new(start.witness),
                accepted,
                steps,
            };
        }
        report.refinement.push(RefinementPoint {
            nodes: self.grid.len(),
            estimate: report.empirical_lower,
        });
        Ok(report)
    }
}

/// Lower bound for the norm of `op: L_Q -> L_P` from `budget` test functions.
pub fn empirical_norm(
    op: &dyn GridOperator,
    q: &ExponentVector,
    p: &ExponentVector,
    strategy: Strategy,
    budget: usize,
    seed: u64,
) -> Result<NormReport> {
    Estimator::new(op, q, p, seed)?.run(strategy, budget)
}
