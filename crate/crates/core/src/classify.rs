//! Stage III: partition each tracked component's pixels into open lumen vs.
//! calcification by intensity.
//!
//! Two modes. `fixed` compares against a user threshold (interpreted in
//! physical units when the volume carries rescale metadata, raw units
//! otherwise) and is the default; `otsu` clusters each component's own
//! histogram and falls back to all-lumen when the split explains too little
//! variance, which keeps homogeneous lumen from growing phantom lesions.

use crate::error::{Error, Result};
use crate::segment::Component;
use crate::volume::Rescale;

pub const HIST_BINS: usize = 65536;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyMode {
    Fixed,
    Otsu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyParams {
    pub mode: ClassifyMode,
    /// Fixed-mode cut. `None` resolves to 130 physical units when the
    /// volume has rescale metadata (the conventional calcium floor), else
    /// 1500 raw.
    pub fixed_threshold: Option<f64>,
    /// Otsu mode only: below this separability the component is treated as
    /// homogeneous lumen.
    pub separability_min: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            mode: ClassifyMode::Fixed,
            fixed_threshold: None,
            separability_min: 0.5,
        }
    }
}

impl ClassifyParams {
    pub fn effective_threshold(&self, rescale: Option<Rescale>) -> f64 {
        self.fixed_threshold
            .unwrap_or(if rescale.is_some() { 130.0 } else { 1500.0 })
    }
}

/// A component's pixels split into lumen and calcification. The two sets
/// are disjoint and together cover the component exactly.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub slice_index: u32,
    pub lumen: Vec<(u32, u32)>,
    pub calc: Vec<(u32, u32)>,
}

/// Otsu's threshold over a 65536-bin histogram.
///
/// Returns the smallest `t` maximizing the between-class variance of
/// class0 = {v <= t} vs class1 = {v > t}, considering every `t` with a
/// nonempty class0, plus the separability sigma_B^2(t*) / sigma_total^2
/// (0 when the total variance is 0).
///
/// Class counts and sums stay in exact integer arithmetic; the variance
/// ratio is formed once per candidate from those integers, so equal inputs
/// give bit-equal scores and the smallest-t tie-break is reproducible.
pub fn otsu_threshold(hist: &[u64]) -> Result<(u16, f64)> {
    assert_eq!(hist.len(), HIST_BINS, "histogram must have 65536 bins");
    let total: u128 = hist.iter().map(|&h| h as u128).sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let sum_all: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &h)| v as u128 * h as u128)
        .sum();
    let sum_sq: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &h)| (v as u128) * (v as u128) * h as u128)
        .sum();
    // N * Var_total = N * sum(v^2 h) - (sum(v h))^2, scaled by N.
    let n_var_total = total * sum_sq - sum_all * sum_all;

    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    let mut best: Option<(u16, f64, u128, u128)> = None; // (t, score, a^2, n0*n1)
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as u128;
        s0 += t as u128 * count as u128;
        if n0 == 0 {
            continue;
        }
        let n1 = total - n0;
        let (score, a_sq, d) = if n1 == 0 {
            (0.0, 0, 1)
        } else {
            let s1 = sum_all - s0;
            // a = s0*n1 - s1*n0; sigma_B^2(t) = a^2 / (N^2 * n0 * n1).
            let a = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
            let a_sq = a.unsigned_abs() * a.unsigned_abs();
            let d = n0 * n1;
            (a_sq as f64 / d as f64, a_sq, d)
        };
        match best {
            Some((_, best_score, _, _)) if score <= best_score => {}
            _ => best = Some((t as u16, score, a_sq, d)),
        }
    }
    let (t, _, a_sq, d) = best.expect("total > 0 guarantees a candidate");
    let separability = if n_var_total == 0 {
        0.0
    } else {
        a_sq as f64 / (d as f64 * n_var_total as f64)
    };
    Ok((t, separability))
}

/// Split one tracked component into lumen and calcification.
///
/// Fixed mode marks calc where intensity >= threshold (threshold converted
/// through `rescale` when present). Otsu mode thresholds the component's
/// own histogram, unless separability falls below the configured floor, in
/// which case everything is lumen.
pub fn classify_component(
    component: &Component,
    samples: &[u16],
    width: u32,
    params: &ClassifyParams,
    rescale: Option<Rescale>,
) -> Partition {
    assert!(!component.runs.is_empty(), "component must be nonempty");
    let mut partition = Partition {
        slice_index: component.slice_index,
        ..Partition::default()
    };
    let value_at =
        |x: u32, y: u32| -> u16 { samples[y as usize * width as usize + x as usize] };

    let is_calc: Box<dyn Fn(u16) -> bool> = match params.mode {
        ClassifyMode::Fixed => {
            let threshold = params.effective_threshold(rescale);
            match rescale {
                Some(r) => Box::new(move |v: u16| r.apply(v) >= threshold),
                None => Box::new(move |v: u16| v as f64 >= threshold),
            }
        }
        ClassifyMode::Otsu => {
            let mut hist = vec![0u64; HIST_BINS];
            for run in &component.runs {
                for x in run.x0..=run.x1 {
                    hist[value_at(x, run.y) as usize] += 1;
                }
            }
            let (t, separability) =
                otsu_threshold(&hist).expect("component is nonempty");
            if separability < params.separability_min {
                Box::new(|_| false)
            } else {
                Box::new(move |v: u16| v > t)
            }
        }
    };

    for run in &component.runs {
        for x in run.x0..=run.x1 {
            if is_calc(value_at(x, run.y)) {
                partition.calc.push((x, run.y));
            } else {
                partition.lumen.push((x, run.y));
            }
        }
    }
    partition
}
