use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

use super::dataset::{Dataset, CONTENT, DISCONTENT};
use super::schema::{ColumnKind, ColumnMeta, Schema};

const NOISE_LEVELS: [&str; 5] = ["Never", "Rarely", "Sometimes", "Often", "Always"];

/// Recipe for a planted-signal dataset.
///
/// Informative columns (`inf0`, `inf1`, ...) are standard normal; the label
/// is Discontent for the rows with the lowest sum of informative values and
/// Content otherwise. Noise columns (`noise0`, ...) are uniform 5-level
/// ordinal answers independent of the label. Column order is shuffled by
/// `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    /// minority / majority row count.
    pub class_imbalance_ratio: f64,
    pub missing_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_rows: usize, n_informative: usize, n_noise: usize, seed: u64) -> Self {
        SynthSpec {
            n_rows,
            n_informative,
            n_noise,
            class_imbalance_ratio: 1.0,
            missing_fraction: 0.0,
            seed,
        }
    }

    /// (majority, minority) row counts.
    pub fn class_sizes(&self) -> (usize, usize) {
        let r = self.class_imbalance_ratio;
        let minority = (self.n_rows as f64 * r / (1.0 + r)).round() as usize;
        (self.n_rows - minority, minority)
    }

    pub fn informative_codes(&self) -> Vec<String> {
        (0..self.n_informative).map(|i| format!("inf{i}")).collect()
    }

    fn validate(&self) -> Result<()> {
        let r = self.class_imbalance_ratio;
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::invalid(format!("imbalance ratio {r} must lie in (0, 1]")));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(Error::invalid("missing_fraction must lie in [0, 1)"));
        }
        if self.n_informative == 0 {
            return Err(Error::invalid("need at least one informative column"));
        }
        let (maj, min) = self.class_sizes();
        if maj == 0 || min == 0 {
            return Err(Error::invalid(format!(
                "{} rows cannot hold both classes at ratio {r}",
                self.n_rows
            )));
        }
        Ok(())
    }
}

fn inject_missing(values: &mut Matrix, fraction: f64, rng: &mut rng::Rng) -> Vec<bool> {
    let cells = values.n_rows() * values.n_cols();
    let mut mask = vec![false; cells];
    let k = (fraction * cells as f64).round() as usize;
    if k > 0 {
        for i in index::sample(rng, cells, k) {
            mask[i] = true;
        }
    }
    mask
}

/// Label the `n_minority` lowest scores Discontent.
fn labels_by_rank(scores: &[f64], n_minority: usize) -> Vec<u8> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![CONTENT; scores.len()];
    for &i in &order[..n_minority] {
        labels[i] = DISCONTENT;
    }
    labels
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let d = spec.n_informative + spec.n_noise;

    // (is_informative, index within its kind)
    let mut layout: Vec<(bool, usize)> = (0..spec.n_informative)
        .map(|i| (true, i))
        .chain((0..spec.n_noise).map(|i| (false, i)))
        .collect();
    layout.shuffle(&mut rng);

    let mut columns: Vec<ColumnMeta> = layout
        .iter()
        .map(|&(inf, i)| {
            if inf {
                ColumnMeta::numeric(format!("inf{i}"), format!("informative feature {i}"))
            } else {
                ColumnMeta::ordinal(format!("noise{i}"), format!("noise item {i}"), NOISE_LEVELS)
            }
        })
        .collect();
    columns.push(ColumnMeta::label("label", "planted class"));
    let schema = Schema::new(columns, "label")?;

    let mut values = Matrix::zeros(spec.n_rows, d);
    let mut scores = vec![0.0; spec.n_rows];
    for (r, score) in scores.iter_mut().enumerate() {
        for (c, &(inf, _)) in layout.iter().enumerate() {
            let v = if inf {
                let z: f64 = StandardNormal.sample(&mut rng);
                *score += z;
                z
            } else {
                rng.random_range(0..NOISE_LEVELS.len()) as f64
            };
            values.set(r, c, v);
        }
    }
    let (_, minority) = spec.class_sizes();
    let labels = labels_by_rank(&scores, minority);
    let mask = inject_missing(&mut values, spec.missing_fraction, &mut rng);
    Dataset::new(&schema, values, mask, Some(labels))
}

/// Loading of each LifeWell item on the latent well-being factor.
fn lifewell_loading(code: &str) -> f64 {
    match code {
        "A2" => 0.8,
        "D2" => 0.75,
        "D8" => 0.6,
        "M8" => 0.55,
        "D6" | "D16" => 0.5,
        "E17" | "job" | "F15" => 0.4,
        "C1" | "D4" | "D10" | "G1" => 0.35,
        "M2" | "J2" | "J4" => 0.25,
        _ => 0.15,
    }
}

/// Synthetic responses shaped like the LifeWell questionnaire.
///
/// A latent well-being score drives every ordinal answer (with per-item
/// loadings) and the label; `minority_fraction` of the rows, those with the
/// lowest noisy well-being, are Discontent.
pub fn lifewell_fixture(
    n_rows: usize,
    minority_fraction: f64,
    missing_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(minority_fraction > 0.0 && minority_fraction < 1.0) {
        return Err(Error::invalid("minority_fraction must lie in (0, 1)"));
    }
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(Error::invalid("missing_fraction must lie in [0, 1)"));
    }
    let schema = crate::lifewell::schema();
    let features: Vec<ColumnMeta> = schema.features().cloned().collect();
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let cuts: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            let k = f.categories.len();
            (1..k)
                .map(|i| std_normal.inverse_cdf(i as f64 / k as f64))
                .collect()
        })
        .collect();

    let mut rng = rng::seeded(seed);
    let mut values = Matrix::zeros(n_rows, features.len());
    let mut scores = vec![0.0; n_rows];
    for (r, score) in scores.iter_mut().enumerate() {
        let w: f64 = StandardNormal.sample(&mut rng);
        for (c, f) in features.iter().enumerate() {
            let v = match f.kind {
                ColumnKind::Ordinal => {
                    let l = lifewell_loading(&f.code);
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let z = l * w + (1.0 - l * l).sqrt() * e;
                    cuts[c].iter().filter(|&&t| z > t).count() as f64
                }
                _ => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    match f.code.as_str() {
                        "age" => rng.random_range(16..=64) as f64,
                        "E1" => (172.0 + 9.0 * e).round(),
                        "E2" => (76.0 + 14.0 * e - 3.0 * w).round(),
                        _ => e,
                    }
                }
            };
            values.set(r, c, v);
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        *score = w + 0.35 * e;
    }
    let minority = ((n_rows as f64) * minority_fraction).round() as usize;
    if minority == 0 || minority >= n_rows {
        return Err(Error::invalid("too few rows for the requested minority fraction"));
    }
    let labels = labels_by_rank(&scores, minority);
    let mask = inject_missing(&mut values, missing_fraction, &mut rng);
    Dataset::new(&schema, values, mask, Some(labels))
}
