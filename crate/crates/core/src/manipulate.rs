//! Candidate generation in PCA coordinates: class means, PC1 transitions,
//! component substitution, stepped grid sweeps and single-component swaps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::LATENT_DIM;
use crate::latent_pca::PcaCoords;

/// Largest number of candidates a single sweep may produce.
pub const MAX_GRID: usize = 10_000;
pub const DEFAULT_STEPS: usize = 9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ManipulateError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("sweep grid of {size} candidates exceeds the limit of {MAX_GRID}")]
    GridTooLarge { size: u128 },
}

/// A stepped Cartesian sweep over a few components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub indices: Vec<usize>,
    pub ranges: Vec<(f64, f64)>,
    pub steps: usize,
}

impl SweepSpec {
    /// `steps^|indices|`, without overflow.
    pub fn grid_size(&self) -> u128 {
        (0..self.indices.len()).fold(1u128, |acc, _| acc.saturating_mul(self.steps as u128))
    }

    pub fn validate(&self) -> Result<(), ManipulateError> {
        if self.ranges.len() != self.indices.len() {
            return Err(ManipulateError::Invalid(format!(
                "{} indices but {} ranges",
                self.indices.len(),
                self.ranges.len()
            )));
        }
        if self.steps < 2 {
            return Err(ManipulateError::Invalid(format!("steps must be at least 2, got {}", self.steps)));
        }
        let mut seen = BTreeSet::new();
        for (&i, &(lo, hi)) in self.indices.iter().zip(&self.ranges) {
            if i >= LATENT_DIM {
                return Err(ManipulateError::Invalid(format!("component index {i} out of range")));
            }
            if !seen.insert(i) {
                return Err(ManipulateError::Invalid(format!("component index {i} repeated")));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ManipulateError::Invalid(format!("range ({lo}, {hi}) for component {i}")));
            }
        }
        let size = self.grid_size();
        if size > MAX_GRID as u128 {
            return Err(ManipulateError::GridTooLarge { size });
        }
        Ok(())
    }
}

/// Arithmetic mean of each label's coordinates.
pub fn class_mean_coords(
    coords_by_label: &BTreeMap<String, Vec<PcaCoords>>,
) -> Result<BTreeMap<String, PcaCoords>, ManipulateError> {
    coords_by_label
        .iter()
        .map(|(label, samples)| {
            if samples.is_empty() {
                return Err(ManipulateError::InsufficientData(format!("label {label} has no samples")));
            }
            let mut acc = vec![0.0; LATENT_DIM];
            for s in samples {
                acc.iter_mut().zip(s.values()).for_each(|(a, v)| *a += v);
            }
            let n = samples.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            Ok((label.clone(), PcaCoords::from_vec_unchecked(acc)))
        })
        .collect()
}

/// Moves PC1 linearly from `from_mean[0]` to `to_mean[0]`, holding every other
/// component at `from_mean`.
pub fn pc1_transition(
    from_mean: &PcaCoords,
    to_mean: &PcaCoords,
    num_steps: usize,
) -> Result<Vec<PcaCoords>, ManipulateError> {
    if num_steps < 2 {
        return Err(ManipulateError::Invalid(format!("transition needs at least 2 steps, got {num_steps}")));
    }
    let (a, b) = (from_mean[0], to_mean[0]);
    Ok((0..num_steps)
        .map(|j| {
            let t = j as f64 / (num_steps - 1) as f64;
            let mut v = from_mean.values().to_vec();
            v[0] = if j == num_steps - 1 { b } else { (1.0 - t) * a + t * b };
            PcaCoords::from_vec_unchecked(v)
        })
        .collect())
}

/// Takes `reference` everywhere except the kept indices, which come from `original`.
pub fn substitute_except(
    original: &PcaCoords,
    reference: &PcaCoords,
    keep_indices: &BTreeSet<usize>,
) -> Result<PcaCoords, ManipulateError> {
    if let Some(&bad) = keep_indices.iter().find(|&&i| i >= LATENT_DIM) {
        return Err(ManipulateError::Invalid(format!("keep index {bad} out of range")));
    }
    Ok(PcaCoords::from_vec_unchecked(
        (0..LATENT_DIM).map(|i| if keep_indices.contains(&i) { original[i] } else { reference[i] }).collect(),
    ))
}

/// One sweep candidate with its position along each swept axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub coords: PcaCoords,
    /// Step index per swept component, components in ascending order.
    pub grid_position: Vec<usize>,
}

fn step_value(lo: f64, hi: f64, j: usize, steps: usize) -> f64 {
    if j == steps - 1 {
        hi
    } else {
        lo + (hi - lo) * j as f64 / (steps - 1) as f64
    }
}

/// Cartesian product over the swept components, row-major in ascending
/// component order (the highest component index varies fastest).
pub fn sweep(base: &PcaCoords, spec: &SweepSpec) -> Result<Vec<GridCandidate>, ManipulateError> {
    spec.validate()?;
    let mut axes: Vec<(usize, (f64, f64))> = spec.indices.iter().copied().zip(spec.ranges.iter().copied()).collect();
    axes.sort_by_key(|&(i, _)| i);

    let total = spec.grid_size() as usize;
    let mut out = Vec::with_capacity(total);
    let mut position = vec![0usize; axes.len()];
    for _ in 0..total {
        let mut v = base.values().to_vec();
        for (&(idx, (lo, hi)), &j) in axes.iter().zip(&position) {
            v[idx] = step_value(lo, hi, j, spec.steps);
        }
        out.push(GridCandidate { coords: PcaCoords::from_vec_unchecked(v), grid_position: position.clone() });
        // odometer increment, last axis fastest
        for slot in position.iter_mut().rev() {
            *slot += 1;
            if *slot < spec.steps {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}

/// Per-component `(min, max)` across a population.
pub fn component_ranges(coords: &[PcaCoords]) -> Result<Vec<(f64, f64)>, ManipulateError> {
    let first =
        coords.first().ok_or_else(|| ManipulateError::InsufficientData("no coordinates to range over".into()))?;
    let mut ranges: Vec<(f64, f64)> = first.values().iter().map(|&v| (v, v)).collect();
    for c in &coords[1..] {
        for ((lo, hi), &v) in ranges.iter_mut().zip(c.values()) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    Ok(ranges)
}

/// 64 candidates; candidate `k` is `original` with only component `k` taken from `reference`.
pub fn per_component_swaps(original: &PcaCoords, reference: &PcaCoords) -> Vec<PcaCoords> {
    (0..LATENT_DIM)
        .map(|k| {
            let mut v = original.values().to_vec();
            v[k] = reference[k];
            PcaCoords::from_vec_unchecked(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coords(head: &[f64], fill: f64) -> PcaCoords {
        let mut v = vec![fill; LATENT_DIM];
        v[..head.len()].copy_from_slice(head);
        PcaCoords::new(v).unwrap()
    }

    fn ramp(offset: f64) -> PcaCoords {
        PcaCoords::new((0..LATENT_DIM).map(|i| i as f64 * 0.5 + offset).collect()).unwrap()
    }

    #[test]
    fn class_means() {
        let mut by_label = BTreeMap::new();
        by_label.insert("a".to_string(), vec![ramp(1.0)]);
        by_label.insert("b".to_string(), vec![coords(&[0.0], 0.0), coords(&[2.0], 0.0)]);
        let means = class_mean_coords(&by_label).unwrap();
        assert_eq!(means["a"], ramp(1.0));
        assert_eq!(means["b"], coords(&[1.0], 0.0));

        by_label.insert("c".to_string(), vec![]);
        assert!(matches!(class_mean_coords(&by_label), Err(ManipulateError::InsufficientData(_))));
    }

    #[test]
    fn transition_endpoints_and_midpoint() {
        let from = coords(&[-4.0, 1.0, 2.0], 0.5);
        let to = coords(&[4.0, 9.0, 9.0], 9.0);
        let steps = pc1_transition(&from, &to, 3).unwrap();
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[0], from);
        let pc1: Vec<f64> = steps.iter().map(|c| c[0]).collect();
        assert_eq!(pc1, vec![-4.0, 0.0, 4.0]);
        assert_eq!(steps[2], coords(&[4.0, 1.0, 2.0], 0.5));
        assert!(pc1_transition(&from, &to, 1).is_err());
    }

    #[test]
    fn substitution() {
        let original = coords(&[5.0], 1.0);
        let reference = ramp(2.0);
        let all: BTreeSet<usize> = (0..LATENT_DIM).collect();
        assert_eq!(substitute_except(&original, &reference, &all).unwrap(), original);
        assert_eq!(substitute_except(&original, &reference, &BTreeSet::new()).unwrap(), reference);

        let original = coords(&[5.0], 1.0);
        let reference = coords(&[9.0, 2.0, 3.0], 3.0);
        let out = substitute_except(&original, &reference, &BTreeSet::from([0])).unwrap();
        assert_eq!(&out.values()[..3], &[5.0, 2.0, 3.0]);

        assert!(substitute_except(&original, &reference, &BTreeSet::from([64])).is_err());
    }

    #[test]
    fn sweep_examples() {
        let base = ramp(0.0);
        let spec = SweepSpec { indices: vec![4], ranges: vec![(-1.0, 1.0)], steps: 3 };
        let out = sweep(&base, &spec).unwrap();
        let vals: Vec<f64> = out.iter().map(|c| c.coords[4]).collect();
        assert_eq!(vals, vec![-1.0, 0.0, 1.0]);
        assert!(out.iter().all(|c| c.coords.values()[5..] == base.values()[5..]));

        let spec = SweepSpec { indices: vec![2, 0], ranges: vec![(0.0, 3.0), (10.0, 13.0)], steps: 4 };
        let out = sweep(&base, &spec).unwrap();
        assert_eq!(out.len(), 16);
        // ascending component order, last axis fastest
        assert_eq!(out[1].grid_position, vec![0, 1]);
        assert_eq!((out[1].coords[0], out[1].coords[2]), (10.0, 1.0));
        assert_eq!((out[4].coords[0], out[4].coords[2]), (11.0, 0.0));

        let empty = SweepSpec { indices: vec![], ranges: vec![], steps: 9 };
        let out = sweep(&base, &empty).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].coords, base);
    }

    #[test]
    fn sweep_rejections() {
        let base = ramp(0.0);
        let big = SweepSpec { indices: vec![0, 1, 2, 3, 4], ranges: vec![(0.0, 1.0); 5], steps: 7 };
        match sweep(&base, &big) {
            Err(ManipulateError::GridTooLarge { size }) => assert_eq!(size, 16807),
            other => panic!("{other:?}"),
        }
        let dup = SweepSpec { indices: vec![1, 1], ranges: vec![(0.0, 1.0); 2], steps: 2 };
        assert!(matches!(sweep(&base, &dup), Err(ManipulateError::Invalid(_))));
        let inverted = SweepSpec { indices: vec![1], ranges: vec![(1.0, 0.0)], steps: 2 };
        assert!(sweep(&base, &inverted).is_err());
        let oob = SweepSpec { indices: vec![64], ranges: vec![(0.0, 1.0)], steps: 2 };
        assert!(sweep(&base, &oob).is_err());
        let huge = SweepSpec { indices: (0..64).collect(), ranges: vec![(0.0, 1.0); 64], steps: 1000 };
        assert!(matches!(huge.validate(), Err(ManipulateError::GridTooLarge { .. })));
    }

    #[test]
    fn sweep_spec_json_shape() {
        let spec = SweepSpec { indices: vec![0, 2], ranges: vec![(-1.0, 1.0), (0.0, 2.5)], steps: 5 };
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json, serde_json::json!({"indices": [0, 2], "ranges": [[-1.0, 1.0], [0.0, 2.5]], "steps": 5}));
        let back: SweepSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn ranges() {
        assert!(component_ranges(&[]).is_err());
        let r = component_ranges(&[ramp(1.0)]).unwrap();
        assert!(r.iter().enumerate().all(|(i, &(lo, hi))| lo == hi && lo == i as f64 * 0.5 + 1.0));
        let a = coords(&[1.0, -2.0], 0.0);
        let b = coords(&[-1.0, 3.0], 0.0);
        let r = component_ranges(&[a, b]).unwrap();
        assert_eq!(r[0], (-1.0, 1.0));
        assert_eq!(r[1], (-2.0, 3.0));
        assert_eq!(r[2], (0.0, 0.0));
    }

    #[test]
    fn swaps() {
        let original = ramp(0.0);
        let same = per_component_swaps(&original, &original);
        assert_eq!(same.len(), LATENT_DIM);
        assert!(same.iter().all(|c| *c == original));

        let reference = ramp(10.0);
        let swaps = per_component_swaps(&original, &reference);
        let diff: Vec<usize> = (0..LATENT_DIM).filter(|&i| swaps[0][i] != original[i]).collect();
        assert_eq!(diff, vec![0]);
        // gathering each candidate's swapped entry rebuilds the reference
        let rebuilt: Vec<f64> = (0..LATENT_DIM).map(|k| swaps[k][k]).collect();
        assert_eq!(rebuilt, reference.values());
    }

    proptest! {
        #[test]
        fn sweep_counts_and_self_substitution(
            steps in 2usize..6,
            n_idx in 0usize..4,
            values in proptest::collection::vec(-10.0f64..10.0, LATENT_DIM),
            keep in proptest::collection::btree_set(0usize..LATENT_DIM, 0..10),
        ) {
            let base = PcaCoords::new(values).unwrap();
            let spec = SweepSpec { indices: (0..n_idx).map(|i| i * 3).collect(), ranges: vec![(-1.0, 1.0); n_idx], steps };
            let out = sweep(&base, &spec).unwrap();
            prop_assert_eq!(out.len(), steps.pow(n_idx as u32));
            prop_assert!(out.iter().all(|c| c.coords.values().iter().all(|v| v.is_finite())));
            prop_assert_eq!(substitute_except(&base, &base, &keep).unwrap(), base.clone());
            prop_assert_eq!(pc1_transition(&base, &base, steps).unwrap().len(), steps);
        }
    }
}
