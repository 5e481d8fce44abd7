//! Synthetic daily emergency-department series.
//!
//! The column layout follows the variable lists of the original study
//! (calendar, climate, demographic, triage, disposition and diagnosis-count
//! groups). The target is
//!
//! ```text
//! visits(t) = base
//!           + trend * years_since_start(t)
//!           + weekly_amplitude * WEEKLY[weekday(t)]
//!           + annual_amplitude * cos(2*pi*(day_of_year(t) - 196) / 365.25)
//!           + climate_coupling * max(max_temp(t) - 25, 0)
//!           + e(t)
//! ```
//!
//! where `e` is a zero-mean AR(1) process with coefficient 0.5 and stationary
//! standard deviation `noise`. [`ground_truth`] evaluates everything except
//! `e`. Diagnosis counts are Poisson with rates that follow the annual and
//! climate terms only, so the weekly pattern and the long-run trend are
//! visible through the calendar columns alone.

use chrono::{Datelike, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::csv_io::date_to_ordinal;
use super::{CodeMaps, ColumnKind, ColumnRole, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Monday..Sunday offsets, scaled by `weekly_amplitude`.
pub const WEEKLY: [f64; 7] = [1.0, 0.5, 0.3, 0.2, 0.1, -1.0, -1.1];

const AR_COEF: f64 = 0.5;
const HEAT_THRESHOLD: f64 = 25.0;
const PEAK_DAY: f64 = 196.0;

pub const PRESET_ED_DAILY: &str = "ed_daily";
pub const TARGET_NAME: &str = "visits";
pub const TIME_NAME: &str = "date";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_days: usize,
    pub seed: u64,
    pub base: f64,
    /// Visits added per year.
    pub trend: f64,
    pub weekly_amplitude: f64,
    pub annual_amplitude: f64,
    /// Visits per degree of daily maximum above 25 C.
    pub climate_coupling: f64,
    pub noise: f64,
    /// ISO date of the first row.
    pub start: String,
    /// Largest lag the data will be used with; bounds `n_days` from below.
    pub max_delay: usize,
    pub preset: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 10_000,
            seed: 0,
            base: 180.0,
            trend: 4.0,
            weekly_amplitude: 18.0,
            annual_amplitude: 12.0,
            climate_coupling: 1.5,
            noise: 10.0,
            start: "1999-01-01".into(),
            max_delay: 364,
            preset: PRESET_ED_DAILY.into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.preset != PRESET_ED_DAILY {
            return Err(Error::invalid(
                "preset",
                format!("unknown preset `{}`", self.preset),
            ));
        }
        if self.n_days < 2 * self.max_delay.max(1) {
            return Err(Error::invalid(
                "n_days",
                format!("{} is below twice the maximum delay {}", self.n_days, self.max_delay),
            ));
        }
        for (name, v) in [
            ("trend", self.trend),
            ("weekly_amplitude", self.weekly_amplitude),
            ("annual_amplitude", self.annual_amplitude),
            ("climate_coupling", self.climate_coupling),
            ("noise", self.noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        if !self.base.is_finite() {
            return Err(Error::invalid("base", "must be finite"));
        }
        self.start_date()?;
        Ok(())
    }

    pub fn start_date(&self) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(&self.start, "%Y-%m-%d")
            .map_err(|_| Error::invalid("start", format!("`{}` is not YYYY-MM-DD", self.start)))
    }
}

/// Noise-free expected visits for `date` given that day's maximum temperature.
pub fn ground_truth(cfg: &SynthConfig, date: NaiveDate, max_temp: f64) -> Result<f64> {
    let start = cfg.start_date()?;
    let years = (date - start).num_days() as f64 / 365.25;
    let weekday = date.weekday().num_days_from_monday() as usize;
    Ok(cfg.base
        + cfg.trend * years
        + cfg.weekly_amplitude * WEEKLY[weekday]
        + cfg.annual_amplitude * annual_wave(date)
        + cfg.climate_coupling * (max_temp - HEAT_THRESHOLD).max(0.0))
}

fn annual_wave(date: NaiveDate) -> f64 {
    let doy = date.ordinal() as f64;
    (2.0 * std::f64::consts::PI * (doy - PEAK_DAY) / 365.25).cos()
}

/// Southern-hemisphere season: 1 summer, 2 autumn, 3 winter, 4 spring.
pub fn season(month: u32) -> u32 {
    match month {
        12 | 1 | 2 => 1,
        3..=5 => 2,
        6..=8 => 3,
        _ => 4,
    }
}

struct Bounded {
    name: &'static str,
    lo: f64,
    hi: f64,
    mean: f64,
}

const fn b(name: &'static str, lo: f64, hi: f64, mean: f64) -> Bounded {
    Bounded { name, lo, hi, mean }
}

const AGE: [Bounded; 8] = [
    b("age_lt10", 0.18, 35.34, 18.11),
    b("age_10_20", 2.01, 28.90, 12.90),
    b("age_20_30", 4.43, 33.02, 15.83),
    b("age_30_40", 3.92, 23.30, 12.84),
    b("age_40_50", 2.6, 20.86, 10.57),
    b("age_50_60", 0.7, 20.71, 9.17),
    b("age_60_70", 0.0, 18.90, 7.37),
    b("age_70_plus", 1.85, 26.06, 13.20),
];

const DISPOSITION: [Bounded; 6] = [
    b("dis_admit", 4.93, 51.08, 31.15),
    b("dis_home", 34.54, 90.35, 59.07),
    b("dis_dnw", 0.0, 30.67, 6.78),
    b("dis_tc", 0.0, 9.76, 1.87),
    b("dis_lor", 0.0, 4.72, 0.42),
    b("dis_other", 0.0, 6.6, 0.54),
];

const TRIAGE_SHARE: [f64; 5] = [1.0, 11.0, 34.0, 41.0, 13.0];

const POPULAR: [Bounded; 13] = [
    b("copd", 0.0, 5.0, 0.5),
    b("asthma", 0.0, 20.0, 2.19),
    b("heart_failure", 0.0, 5.0, 0.6),
    b("hypertensive", 0.0, 5.0, 0.3),
    b("cardiovascular", 0.0, 22.0, 6.65),
    b("endocrine_nutritional", 0.0, 9.0, 1.5),
    b("metabolic", 0.0, 5.0, 0.41),
    b("diabetes_mellitus", 0.0, 5.0, 0.41),
    b("mental_behaviour", 0.0, 21.0, 5.5),
    b("genitourinary", 0.0, 26.0, 6.9),
    b("renal_failure", 0.0, 4.0, 0.38),
    b("self_harm", 0.0, 6.0, 0.18),
    b("assault", 0.0, 6.0, 0.17),
];

const FREQUENT_ICD: [Bounded; 10] = [
    b("icd_r07_4", 0.0, 27.0, 7.18),
    b("icd_r10_4", 0.0, 26.0, 7.13),
    b("icd_b34_9", 0.0, 25.0, 3.5),
    b("icd_j45_9", 0.0, 20.0, 2.17),
    b("icd_n39_0", 0.0, 12.0, 2.0),
    b("icd_r11", 0.0, 21.0, 1.87),
    b("icd_m54_5", 0.0, 9.0, 1.6),
    b("icd_z53_1", 0.0, 67.0, 10.3),
    b("icd_z09_9", 0.0, 20.0, 3.4),
    b("icd_s09_9", 0.0, 13.0, 1.8),
];

const ICD_LABELS: [&str; 10] = [
    "R07.4", "R10.4", "B34.9", "J45.9", "N39.0", "R11", "M54.5", "Z53.1", "Z09.9", "S09.9",
];

const TOP5_RANGE: [(f64, f64); 5] = [(3.0, 67.0), (2.0, 25.0), (2.0, 18.0), (2.0, 13.0), (2.0, 11.0)];

pub const MAX_TEMP_RANGE: (f64, f64) = (3.6, 43.65);
pub const MIN_TEMP_RANGE: (f64, f64) = (-8.1, 26.7);
pub const MEAN_TEMP_RANGE: (f64, f64) = (0.5, 33.5);
pub const HUMIDITY_RANGE: (f64, f64) = (19.43, 99.75);
pub const PRECIP_RANGE: (f64, f64) = (0.0, 84.0);
pub const GUST_SPEED_RANGE: (f64, f64) = (9.4, 105.5);
pub const GUST_DIR_RANGE: (f64, f64) = (1.0, 360.0);
pub const WIND_SPEED_RANGE: (f64, f64) = (0.45, 42.8);
pub const WIND_DIR_RANGE: (f64, f64) = (0.0, 360.0);

/// Named feature groups of the `ed_daily` preset, in ablation order.
pub fn feature_groups() -> Vec<(String, Vec<String>)> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let bounded = |v: &[Bounded]| v.iter().map(|c| c.name.to_string()).collect::<Vec<_>>();
    let mut top5: Vec<String> = (1..=5).map(|k| format!("icd_{k}")).collect();
    top5.extend((1..=5).map(|k| format!("icd_{k}_name")));
    vec![
        ("temporal".into(), names(&["year", "month", "day", "weekday", "season"])),
        ("disposition".into(), bounded(&DISPOSITION)),
        ("age".into(), bounded(&AGE)),
        ("popular_diagnosis".into(), bounded(&POPULAR)),
        ("top5_icd".into(), top5),
        ("frequent_icd".into(), bounded(&FREQUENT_ICD)),
        ("triage".into(), (1..=5).map(|k| format!("triage_{k}")).collect()),
        ("climate".into(), names(&CLIMATE)),
    ]
}

const CLIMATE: [&str; 12] = [
    "min_temp",
    "max_temp",
    "mean_temp",
    "humidity",
    "precipitation",
    "gust_speed",
    "gust_direction",
    "wind_speed",
    "wind_dir_00",
    "wind_dir_06",
    "wind_dir_12",
    "wind_dir_21",
];

/// Columns of a generated file: features, then target, then date.
pub fn file_schema() -> Vec<ColumnSchema> {
    let mut s = schema();
    s.push(ColumnSchema::new(TARGET_NAME, ColumnKind::Numeric, ColumnRole::Target));
    s.push(ColumnSchema::new(TIME_NAME, ColumnKind::Numeric, ColumnRole::TimeIndex));
    s
}

fn schema() -> Vec<ColumnSchema> {
    let num = |n: &str| ColumnSchema::feature(n, ColumnKind::Numeric);
    let mut s: Vec<ColumnSchema> = ["year", "month", "day", "weekday", "season"]
        .iter()
        .map(|n| num(n))
        .collect();
    s.extend(CLIMATE.iter().map(|n| num(n)));
    s.push(num("female_pct"));
    s.extend((1..=5).map(|k| num(&format!("triage_{k}"))));
    s.extend(AGE.iter().map(|c| num(c.name)));
    s.extend((1..=5).map(|k| num(&format!("icd_{k}"))));
    s.extend(
        (1..=5).map(|k| ColumnSchema::feature(format!("icd_{k}_name"), ColumnKind::Categorical)),
    );
    s.extend(DISPOSITION.iter().map(|c| num(c.name)));
    s.extend(POPULAR.iter().map(|c| num(c.name)));
    s.extend(FREQUENT_ICD.iter().map(|c| num(c.name)));
    s
}

fn clamp(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.clamp(lo, hi)
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Percent shares around `means`, perturbed multiplicatively, clamped to the
/// column ranges and rounded to 0.01.
fn shares(rng: &mut rng::Rng, means: &[f64], tilt: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    let z = Normal::new(0.0, 0.12).expect("valid normal");
    let raw: Vec<f64> = means
        .iter()
        .zip(tilt)
        .map(|(&m, &t)| (m.max(0.05) * (1.0 + t + z.sample(rng))).max(0.0))
        .collect();
    let total: f64 = raw.iter().sum::<f64>().max(1e-9);
    let scale: f64 = means.iter().sum::<f64>() / total;
    raw.iter()
        .zip(bounds)
        .map(|(&r, &bd)| (clamp(r * scale, bd) * 100.0).round() / 100.0)
        .collect()
}

fn poisson(rng: &mut rng::Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng)
}

/// Generates the synthetic series described in the module docs.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let start = cfg.start_date()?;
    let n = cfg.n_days;
    let mut weather = rng::stream(cfg.seed, 1);
    let mut noise_rng = rng::stream(cfg.seed, 2);
    let mut mix = rng::stream(cfg.seed, 3);
    let mut counts = rng::stream(cfg.seed, 4);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let schema = schema();
    let n_cols = schema.len();
    let mut data = Vec::with_capacity(n * n_cols);
    let mut y = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); 5];

    let innov_sd = cfg.noise * (1.0 - AR_COEF * AR_COEF).sqrt();
    let mut e = cfg.noise * std_normal.sample(&mut noise_rng);
    let mut temp_anom = 0.0;

    for i in 0..n {
        let date = start + chrono::Duration::days(i as i64);
        time.push(date_to_ordinal(date));
        let month = date.month();
        let doy = date.ordinal() as f64;
        // Southern hemisphere: warmest mid-January
        let warm = (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos();

        temp_anom = 0.7 * temp_anom + 3.2 * std_normal.sample(&mut weather);
        let max_t = round1(clamp(20.77 + 8.5 * warm + temp_anom, MAX_TEMP_RANGE));
        let range = (11.0 + 2.0 * std_normal.sample(&mut weather)).clamp(2.0, 22.0);
        let min_t = round1(clamp(max_t - range - 2.0 + 2.0 * warm, MIN_TEMP_RANGE));
        let mean_t = round1(clamp(
            (max_t + min_t) / 2.0 + 0.5 * std_normal.sample(&mut weather),
            MEAN_TEMP_RANGE,
        ));
        let humidity = ((clamp(
            68.27 - 1.3 * (max_t - 20.77) + 9.0 * std_normal.sample(&mut weather),
            HUMIDITY_RANGE,
        )) * 100.0)
            .round()
            / 100.0;
        let precip = if weather.random::<f64>() < 0.3 {
            round1(clamp(
                -5.9 * (1.0 - weather.random::<f64>()).ln(),
                PRECIP_RANGE,
            ))
        } else {
            0.0
        };
        let gust = round1(clamp(
            37.76 + 12.0 * std_normal.sample(&mut weather),
            GUST_SPEED_RANGE,
        ));
        let gust_dir = weather.random_range(1..=360) as f64;
        let wind = round1(clamp(
            12.0 + 5.0 * std_normal.sample(&mut weather),
            WIND_SPEED_RANGE,
        ));
        let wind_dirs: Vec<f64> = (0..4)
            .map(|_| weather.random_range(0..360) as f64)
            .collect();

        let truth = ground_truth(cfg, date, max_t)?;
        let visits = truth + e;
        e = AR_COEF * e + innov_sd * std_normal.sample(&mut noise_rng);

        // seasonal and heat-driven load, independent of weekday and trend
        let load = if cfg.base > 0.0 {
            (1.0 + (cfg.annual_amplitude * annual_wave(date)
                + cfg.climate_coupling * (max_t - HEAT_THRESHOLD).max(0.0))
                / cfg.base)
                .max(0.1)
        } else {
            1.0
        };

        let female = (clamp(50.0 + 2.5 * std_normal.sample(&mut mix), (30.0, 70.0)) * 100.0)
            .round()
            / 100.0;
        let triage = shares(
            &mut mix,
            &TRIAGE_SHARE,
            &[0.0, 0.05 * warm, 0.0, -0.03 * warm, 0.0],
            &[(0.0, 100.0); 5],
        );
        let age_means: Vec<f64> = AGE.iter().map(|c| c.mean).collect();
        let mut age_tilt = vec![0.0; AGE.len()];
        age_tilt[0] = -0.15 * warm;
        let age_bounds: Vec<(f64, f64)> = AGE.iter().map(|c| (c.lo, c.hi)).collect();
        let age = shares(&mut mix, &age_means, &age_tilt, &age_bounds);
        let dis_means: Vec<f64> = DISPOSITION.iter().map(|c| c.mean).collect();
        let dis_bounds: Vec<(f64, f64)> = DISPOSITION.iter().map(|c| (c.lo, c.hi)).collect();
        let dis = shares(&mut mix, &dis_means, &[0.0; 6], &dis_bounds);

        let popular: Vec<f64> = POPULAR
            .iter()
            .map(|c| poisson(&mut counts, c.mean * load).clamp(c.lo, c.hi))
            .collect();
        let frequent: Vec<f64> = FREQUENT_ICD
            .iter()
            .map(|c| poisson(&mut counts, c.mean * load).clamp(c.lo, c.hi))
            .collect();
        // top five codes of the day; ties keep list order
        let mut order: Vec<usize> = (0..frequent.len()).collect();
        order.sort_by(|&a, &b| frequent[b].total_cmp(&frequent[a]).then(a.cmp(&b)));

        data.extend([
            date.year() as f64,
            month as f64,
            date.day() as f64,
            (date.weekday().num_days_from_monday() + 1) as f64,
            season(month) as f64,
        ]);
        data.extend([min_t, max_t, mean_t, humidity, precip, gust, gust_dir, wind]);
        data.extend(wind_dirs);
        data.push(female);
        data.extend(triage);
        data.extend(age);
        for (k, &j) in order.iter().take(5).enumerate() {
            data.push(clamp(frequent[j], TOP5_RANGE[k]));
        }
        for (k, &j) in order.iter().take(5).enumerate() {
            let label = ICD_LABELS[j];
            let code = match labels[k].iter().position(|l| l == label) {
                Some(c) => c,
                None => {
                    labels[k].push(label.to_string());
                    labels[k].len() - 1
                }
            };
            data.push(code as f64);
        }
        data.extend(dis);
        data.extend(popular);
        data.extend(frequent);
        y.push(visits);
    }

    let maps: CodeMaps = labels
        .into_iter()
        .enumerate()
        .map(|(k, l)| (format!("icd_{}_name", k + 1), l))
        .collect();
    let x = Matrix::new(n, n_cols, data)?;
    Ok(Dataset::new(schema, x, y, Some(time), TARGET_NAME)?
        .with_time_name(Some(TIME_NAME.into()))
        .with_code_maps(maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::csv_io::{ordinal_to_date, write_csv_to};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_days: 800,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_generate(&small(3)).unwrap();
        let b = synth_generate(&small(3)).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_csv_to(&a, &mut ba).unwrap();
        write_csv_to(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a.y(), synth_generate(&small(4)).unwrap().y());
    }

    #[test]
    fn climate_columns_within_table_bounds() {
        for seed in 0..10 {
            let d = synth_generate(&small(seed)).unwrap();
            for (name, (lo, hi)) in [
                ("max_temp", MAX_TEMP_RANGE),
                ("min_temp", MIN_TEMP_RANGE),
                ("mean_temp", MEAN_TEMP_RANGE),
                ("humidity", HUMIDITY_RANGE),
                ("precipitation", PRECIP_RANGE),
                ("gust_speed", GUST_SPEED_RANGE),
                ("gust_direction", GUST_DIR_RANGE),
                ("wind_speed", WIND_SPEED_RANGE),
                ("wind_dir_00", WIND_DIR_RANGE),
            ] {
                let j = d.feature_index(name).unwrap();
                assert!(
                    d.x().column(j).iter().all(|&v| lo <= v && v <= hi),
                    "{name} out of range for seed {seed}"
                );
            }
        }
    }

    #[test]
    fn noiseless_target_is_ground_truth() {
        let cfg = SynthConfig {
            noise: 0.0,
            ..small(9)
        };
        let d = synth_generate(&cfg).unwrap();
        let jt = d.feature_index("max_temp").unwrap();
        for i in 0..d.n_rows() {
            let date = ordinal_to_date(d.time_index()[i]);
            let gt = ground_truth(&cfg, date, d.x().get(i, jt)).unwrap();
            assert_eq!(d.y()[i], gt);
        }
    }

    #[test]
    fn ground_truth_formula_by_hand() {
        let cfg = SynthConfig::default();
        // 2000-01-03 is a Monday, 367 days after the start; day of year 3
        let date = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let wave = (2.0 * std::f64::consts::PI * (3.0 - 196.0) / 365.25).cos();
        let expect = 180.0 + 4.0 * 367.0 / 365.25 + 18.0 * 1.0 + 12.0 * wave + 1.5 * 5.0;
        assert!((ground_truth(&cfg, date, 30.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn groups_cover_schema_names() {
        let names: Vec<String> = schema().into_iter().map(|c| c.name).collect();
        for (_, cols) in feature_groups() {
            for c in cols {
                assert!(names.contains(&c), "{c}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small(0);
        c.n_days = 100;
        assert!(synth_generate(&c).is_err());
        let mut c = small(0);
        c.noise = -1.0;
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.preset = "other".into();
        assert!(c.validate().is_err());
    }
}
