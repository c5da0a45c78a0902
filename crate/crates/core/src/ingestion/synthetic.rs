use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::classify_severity;
use crate::model::{Gender, Interval, Measurement, NormalRanges, PatientSample, SeverityLabel};
use crate::rng::stream_rng;

/// Physiologic limits for blood-gas draws outside the normal range.
pub const PHYSIOLOGIC_CAPS: NormalRanges = NormalRanges {
    ph: Interval::new(6.8, 7.8),
    po2: Interval::new(20.0, 150.0),
    pco2: Interval::new(15.0, 100.0),
    be: Interval::new(-15.0, 15.0),
    tco2: Interval::new(5.0, 50.0),
};

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMix {
    pub mild: f64,
    pub severe: f64,
    pub unlabeled: f64,
}

/// Rule-label counts of the published cohort: mild, severe, unlabeled.
pub const PUBLISHED_LABEL_COUNTS: [usize; 3] = [3282, 5343, 3488];

impl Default for TargetMix {
    /// The published label counts as proportions of their own total.
    fn default() -> Self {
        let [m, s, u] = PUBLISHED_LABEL_COUNTS.map(|c| c as f64);
        let total = m + s + u;
        TargetMix {
            mild: m / total,
            severe: s / total,
            unlabeled: u / total,
        }
    }
}

impl TargetMix {
    fn as_array(&self) -> [f64; 3] {
        [self.mild, self.severe, self.unlabeled]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_total: usize,
    pub target_mix: TargetMix,
    /// Per-measurement probability of a missing value.
    pub missing_rate: f64,
    pub seed: u64,
    /// Ranges the generated labels are aimed at.
    pub ranges: NormalRanges,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_total: 12131,
            target_mix: TargetMix::default(),
            missing_rate: 0.05,
            seed: 42,
            ranges: NormalRanges::default(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::config("synthetic spec", "n_total must be at least 1"));
        }
        let mix = self.target_mix.as_array();
        if mix.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::config("synthetic spec", "mix proportions must be non-negative"));
        }
        let sum: f64 = mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config("synthetic spec", format!("mix proportions sum to {sum}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(Error::config("synthetic spec", "missing_rate must lie in [0, 1]"));
        }
        self.ranges.validate()
    }

    /// Exact number of samples per category: largest-remainder rounding of
    /// the normalized mix.
    pub fn category_counts(&self) -> [usize; 3] {
        let mix = self.target_mix.as_array();
        let sum: f64 = mix.iter().sum();
        let quotas: Vec<f64> = mix.iter().map(|p| p / sum * self.n_total as f64).collect();
        let mut counts: [usize; 3] = [0; 3];
        for (c, q) in counts.iter_mut().zip(&quotas) {
            *c = q.floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = self.n_total - counts.iter().sum::<usize>();
        for &c in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[c] += 1;
            left -= 1;
        }
        counts
    }
}

/// Intended rule outcome of a generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Mild,
    Severe,
    Unlabeled,
}

impl Category {
    pub fn label(self) -> SeverityLabel {
        match self {
            Category::Mild => SeverityLabel::MildToModerate,
            Category::Severe => SeverityLabel::Severe,
            Category::Unlabeled => SeverityLabel::Unlabeled,
        }
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

fn decimals(m: Measurement) -> i32 {
    match m {
        Measurement::Ph => 2,
        _ => 1,
    }
}

fn draw_inside(rng: &mut ChaCha8Rng, iv: Interval) -> f64 {
    iv.lo + rng.random::<f64>() * iv.width()
}

/// Uniform over the part of `cap` outside `iv`; `None` when that part is empty.
fn draw_outside(rng: &mut ChaCha8Rng, iv: Interval, cap: Interval) -> Option<f64> {
    let below = (iv.lo - cap.lo).max(0.0);
    let above = (cap.hi - iv.hi).max(0.0);
    let total = below + above;
    if total <= 0.0 {
        return None;
    }
    let u = rng.random::<f64>() * total;
    Some(if u < below { cap.lo + u } else { iv.hi + (u - below) })
}

fn draw_gas(rng: &mut ChaCha8Rng, m: Measurement, inside: bool, ranges: &NormalRanges) -> Option<f64> {
    let iv = ranges.get(m)?;
    let cap = PHYSIOLOGIC_CAPS.get(m)?;
    let v = if inside {
        draw_inside(rng, iv)
    } else {
        draw_outside(rng, iv, cap)?
    };
    Some(round_to(v, decimals(m)))
}

/// Inside/outside pattern for (ph, po2, pco2, be, tco2).
fn gas_pattern(rng: &mut ChaCha8Rng, category: Category) -> [bool; 5] {
    match category {
        Category::Mild => [
            true,
            rng.random_bool(0.5),
            rng.random_bool(0.6),
            rng.random_bool(0.6),
            rng.random_bool(0.6),
        ],
        Category::Severe => [
            false,
            !rng.random_bool(0.5),
            !rng.random_bool(0.6),
            !rng.random_bool(0.6),
            !rng.random_bool(0.6),
        ],
        Category::Unlabeled => {
            let ph_inside = rng.random_bool(0.5);
            let po2 = rng.random_bool(0.5);
            // the companions must all disagree with ph for the rules to abstain
            [ph_inside, po2, !ph_inside, !ph_inside, !ph_inside]
        }
    }
}

struct VitalModel {
    hr: (f64, f64),
    rr: (f64, f64),
    spo2: (f64, f64),
}

fn vital_model(category: Category) -> VitalModel {
    match category {
        Category::Mild => VitalModel {
            hr: (84.0, 12.0),
            rr: (18.0, 4.0),
            spo2: (95.0, 2.5),
        },
        Category::Severe => VitalModel {
            hr: (102.0, 16.0),
            rr: (25.0, 5.0),
            spo2: (89.0, 4.0),
        },
        Category::Unlabeled => VitalModel {
            hr: (93.0, 14.0),
            rr: (21.0, 5.0),
            spo2: (92.0, 3.5),
        },
    }
}

fn draw_normal(rng: &mut ChaCha8Rng, (mean, sd): (f64, f64), lo: f64, hi: f64) -> f64 {
    let n = Normal::new(mean, sd).expect("fixed positive sd");
    n.sample(rng).clamp(lo, hi).round()
}

fn draw_sample(
    rng: &mut ChaCha8Rng,
    category: Category,
    spec: &SyntheticSpec,
    base: PatientSample,
) -> Result<PatientSample> {
    for _ in 0..MAX_ATTEMPTS {
        let pattern = gas_pattern(rng, category);
        let mut s = base.clone();
        let mut ok = true;
        for (m, inside) in Measurement::BLOOD_GAS.iter().zip(pattern) {
            match draw_gas(rng, *m, inside, &spec.ranges) {
                Some(v) => s.set(*m, Some(v)),
                None => ok = false,
            }
        }
        if ok && classify_severity(&s, &spec.ranges) == category.label() {
            return Ok(s);
        }
    }
    Err(Error::InfeasibleMix(format!(
        "could not draw a {category:?} sample in {MAX_ATTEMPTS} attempts under the configured ranges"
    )))
}

/// Generates a deterministic synthetic cohort whose rule labels follow the
/// requested mix exactly (up to rounding of the category counts).
///
/// Blood-gas values are drawn uniformly inside their normal range or outside
/// it within [`PHYSIOLOGIC_CAPS`], in a pattern chosen per category and
/// checked against the labeler; vitals come from category-conditioned normal
/// distributions. Labeled samples only lose vitals to missingness, so their
/// rule label is preserved; unlabeled samples may lose any measurement.
pub fn generate_synthetic_cohort(spec: &SyntheticSpec) -> Result<Vec<PatientSample>> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let counts = spec.category_counts();
    let mut categories: Vec<Category> = [Category::Mild, Category::Severe, Category::Unlabeled]
        .iter()
        .zip(counts)
        .flat_map(|(&c, n)| std::iter::repeat_n(c, n))
        .collect();
    categories.shuffle(&mut rng);

    let origin: NaiveDateTime = NaiveDate::from_ymd_opt(2101, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid origin");
    let mut samples = Vec::with_capacity(spec.n_total);
    let mut admission: i64 = 0;
    let mut remaining_in_stay = 0usize;
    let mut stay_age = 0.0;
    let mut stay_gender = Gender::Female;
    let mut hour = 0i64;

    for &category in &categories {
        if remaining_in_stay == 0 {
            admission += 1;
            remaining_in_stay = rng.random_range(1..=6);
            stay_age = round_to(rng.random_range(40.0..90.0), 1);
            stay_gender = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
            hour = 0;
        }
        remaining_in_stay -= 1;
        let charttime = origin + Duration::days(3 * admission) + Duration::hours(hour);
        hour += rng.random_range(1..=8);
        let base = PatientSample::empty(200_000 + admission, 100_000 + admission, charttime, stay_age, stay_gender);

        let mut s = draw_sample(&mut rng, category, spec, base)?;
        let vitals = vital_model(category);
        s.hr = Some(draw_normal(&mut rng, vitals.hr, 30.0, 200.0));
        s.rr = Some(draw_normal(&mut rng, vitals.rr, 4.0, 60.0));
        s.spo2 = Some(draw_normal(&mut rng, vitals.spo2, 50.0, 100.0));

        let eligible: &[Measurement] = match category {
            Category::Unlabeled => &Measurement::ALL,
            _ => &[Measurement::Hr, Measurement::Rr, Measurement::Spo2],
        };
        for &m in eligible {
            if rng.random::<f64>() < spec.missing_rate {
                s.set(m, None);
            }
        }
        samples.push(s);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::write_samples_csv;
    use crate::labeling::label_dataset;

    #[test]
    fn all_mild_mix_labels_all_mild() {
        let spec = SyntheticSpec {
            n_total: 100,
            target_mix: TargetMix {
                mild: 1.0,
                severe: 0.0,
                unlabeled: 0.0,
            },
            ..SyntheticSpec::default()
        };
        let samples = generate_synthetic_cohort(&spec).unwrap();
        let (_, summary) = label_dataset(&samples, &spec.ranges);
        assert_eq!(summary.n_mild, 100);
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let spec = SyntheticSpec {
            n_total: 300,
            ..SyntheticSpec::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_samples_csv(&mut a, &generate_synthetic_cohort(&spec).unwrap()).unwrap();
        write_samples_csv(&mut b, &generate_synthetic_cohort(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = SyntheticSpec { seed: 43, ..spec };
        let mut c = Vec::new();
        write_samples_csv(&mut c, &generate_synthetic_cohort(&other).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_counts_follow_published_split() {
        let spec = SyntheticSpec::default();
        let counts = spec.category_counts();
        assert_eq!(counts.iter().sum::<usize>(), 12131);
        for (got, paper) in counts.iter().zip([3282.0, 5343.0, 3488.0]) {
            assert!(((*got as f64) - paper).abs() / 12131.0 <= 0.02);
        }
    }

    #[test]
    fn samples_respect_value_invariants_and_order() {
        let spec = SyntheticSpec {
            n_total: 500,
            missing_rate: 0.3,
            ..SyntheticSpec::default()
        };
        let samples = generate_synthetic_cohort(&spec).unwrap();
        for s in &samples {
            s.validate().unwrap();
        }
        assert!(samples
            .windows(2)
            .all(|w| (w[0].hadm_id, w[0].charttime) < (w[1].hadm_id, w[1].charttime)));
    }

    #[test]
    fn labeled_categories_survive_missingness() {
        let spec = SyntheticSpec {
            n_total: 400,
            missing_rate: 0.5,
            target_mix: TargetMix {
                mild: 0.5,
                severe: 0.5,
                unlabeled: 0.0,
            },
            ..SyntheticSpec::default()
        };
        let samples = generate_synthetic_cohort(&spec).unwrap();
        let (_, summary) = label_dataset(&samples, &spec.ranges);
        assert_eq!(summary.n_unlabeled, 0);
        assert_eq!(summary.n_mild + summary.n_severe, 400);
    }

    #[test]
    fn impossible_outside_range_is_infeasible() {
        // ph range covering the whole physiologic cap leaves nothing "outside"
        let mut ranges = NormalRanges::default();
        ranges.ph = Interval::new(6.0, 8.0);
        let spec = SyntheticSpec {
            n_total: 10,
            target_mix: TargetMix {
                mild: 0.0,
                severe: 1.0,
                unlabeled: 0.0,
            },
            ranges,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic_cohort(&spec), Err(Error::InfeasibleMix(_))));
    }

    #[test]
    fn bad_spec_rejected() {
        let spec = SyntheticSpec {
            n_total: 0,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic_cohort(&spec).is_err());
        let spec = SyntheticSpec {
            target_mix: TargetMix {
                mild: 0.5,
                severe: 0.6,
                unlabeled: 0.1,
            },
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic_cohort(&spec).is_err());
    }
}
