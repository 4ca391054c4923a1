use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::gd::{fit_controls_gd_multistart, GdSettings};
use super::source::{source_f0, speech_tenseness, voice_yin};
use crate::dsp::{AudioBuffer, Spectrum};
use crate::error::Result;
use crate::glottal::{estimate_f0_with, estimate_tenseness, synthesize_gfd, GlottalParams};
use crate::iaif::{gfm_iaif_with, kl_target_from_iaif, IaifConfig};
use crate::tract::{
    kl_synthesize, AreaFunction, Constriction, SimulationConfig, TractControls,
    CONSTRICTION_DIAMETER, CONSTRICTION_POSITION, TONGUE_DIAMETER, TONGUE_POSITION,
};
use crate::transfer::{controls_response, response_mae_db, LossConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const F0_RANGE: (f64, f64) = (80.0, 200.0);
pub const CONSTRICTION_COUNTS: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Ground-truth response of the generating tract.
    Given,
    /// Tract filter recovered from the synthesized audio.
    InverseFiltered,
}

impl TargetKind {
    fn label(self) -> &'static str {
        match self {
            TargetKind::Given => "Given",
            TargetKind::InverseFiltered => "IF",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub trials_per_condition: usize,
    pub seed: u64,
    pub gd: GdSettings,
    pub loss: LossConfig,
    pub duration_samples: usize,
    pub frame_samples: usize,
    pub iaif: IaifConfig,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            trials_per_condition: 100,
            seed: 0,
            gd: GdSettings::default(),
            loss: LossConfig::default(),
            duration_samples: 14_400,
            frame_samples: 1920,
            iaif: IaifConfig::default(),
        }
    }
}

/// Means over zero successful trials are NaN, which JSON cannot carry; they
/// are written as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub constrictions: usize,
    pub target: TargetKind,
    pub trials: usize,
    pub failures: usize,
    #[serde(with = "nan_as_null")]
    pub tongue_position_mae: f64,
    #[serde(with = "nan_as_null")]
    pub tongue_diameter_mae: f64,
    #[serde(with = "nan_as_null")]
    pub total_diameter_mae: f64,
    #[serde(with = "nan_as_null")]
    pub frequency_response_mae_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlottalErrors {
    pub trials: usize,
    pub failures: usize,
    #[serde(with = "nan_as_null")]
    pub tenseness_mae_original: f64,
    #[serde(with = "nan_as_null")]
    pub tenseness_mae_recovered: f64,
    #[serde(with = "nan_as_null")]
    pub f0_mae_original: f64,
    #[serde(with = "nan_as_null")]
    pub f0_mae_recovered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlottalGroup {
    pub constrictions: usize,
    #[serde(flatten)]
    pub errors: GlottalErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub model_version: String,
    pub trials_per_condition: usize,
    pub seed: u64,
    pub conditions: Vec<ConditionResult>,
    pub glottal: GlottalErrors,
    pub glottal_by_constrictions: Vec<GlottalGroup>,
    /// Table ordering checks that did not hold in this run.
    pub ordering_violations: Vec<String>,
}

impl ExperimentReport {
    pub fn condition(&self, constrictions: usize, target: TargetKind) -> Option<&ConditionResult> {
        self.conditions
            .iter()
            .find(|c| c.constrictions == constrictions && c.target == target)
    }

    /// Largest `(max - min) / mean` across constriction groups for each glottal
    /// metric, in the order tenseness original, tenseness recovered, F0
    /// original, F0 recovered.
    pub fn glottal_group_spread(&self) -> [f64; 4] {
        let spread = |f: &dyn Fn(&GlottalErrors) -> f64| {
            let v: Vec<f64> = self
                .glottal_by_constrictions
                .iter()
                .map(|g| f(&g.errors))
                .collect();
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            let (lo, hi) = v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(*x), b.max(*x))
                });
            if mean > 0.0 {
                (hi - lo) / mean
            } else {
                0.0
            }
        };
        [
            spread(&|g| g.tenseness_mae_original),
            spread(&|g| g.tenseness_mae_recovered),
            spread(&|g| g.f0_mae_original),
            spread(&|g| g.f0_mae_recovered),
        ]
    }

    /// Plain-text table with one column per (constrictions, target) pair.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let cols: Vec<&ConditionResult> = CONSTRICTION_COUNTS
            .iter()
            .flat_map(|n| {
                [TargetKind::Given, TargetKind::InverseFiltered]
                    .into_iter()
                    .filter_map(move |t| self.condition(*n, t))
            })
            .collect();
        let _ = write!(out, "{:<26}", "# of constrictions");
        for c in &cols {
            let _ = write!(out, "{:>9}", c.constrictions);
        }
        let _ = write!(out, "\n{:<26}", "VT transfer function");
        for c in &cols {
            let _ = write!(out, "{:>9}", c.target.label());
        }
        out.push('\n');
        let rows: [Metric; 4] = [
            ("t_p [-]", |c| c.tongue_position_mae),
            ("t_d [cm]", |c| c.tongue_diameter_mae),
            ("Total diameter [cm]", |c| c.total_diameter_mae),
            ("Frequency response [dB]", |c| c.frequency_response_mae_db),
        ];
        for (name, f) in rows {
            let _ = write!(out, "{name:<26}");
            for c in &cols {
                let _ = write!(out, "{:>9.3}", f(c));
            }
            out.push('\n');
        }
        let g = &self.glottal;
        let _ = writeln!(
            out,
            "\nTenseness MAE: {:.4} (original GFD), {:.4} (recovered GFD)",
            g.tenseness_mae_original, g.tenseness_mae_recovered
        );
        let _ = writeln!(
            out,
            "F0 MAE [Hz]:   {:.4} (original GFD), {:.4} (recovered GFD)",
            g.f0_mae_original, g.f0_mae_recovered
        );
        let failures: usize =
            self.conditions.iter().map(|c| c.failures).sum::<usize>() + g.failures;
        if failures > 0 {
            let _ = writeln!(out, "Excluded trials: {failures}");
        }
        for v in &self.ordering_violations {
            let _ = writeln!(out, "ordering violated: {v}");
        }
        out
    }
}

/// Controls and source of one generated example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub glottal: GlottalParams,
    pub tongue_position: f64,
    pub tongue_diameter: f64,
    pub constrictions: [Constriction; 2],
    pub noise_seed: u64,
}

impl TrialSpec {
    /// Draws every field uniformly from its range. Groups with fewer
    /// constrictions reuse the same draw and ignore the extra constrictions.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f0 = rng.random_range(F0_RANGE.0..=F0_RANGE.1);
        let tenseness = rng.random_range(0.0..=1.0);
        let tongue_position = rng.random_range(TONGUE_POSITION.lo..=TONGUE_POSITION.hi);
        let tongue_diameter = rng.random_range(TONGUE_DIAMETER.lo..=TONGUE_DIAMETER.hi);
        let mut constriction = || Constriction {
            position: rng.random_range(CONSTRICTION_POSITION.lo..=CONSTRICTION_POSITION.hi),
            diameter: rng.random_range(CONSTRICTION_DIAMETER.lo..=CONSTRICTION_DIAMETER.hi),
        };
        let constrictions = [constriction(), constriction()];
        Self {
            glottal: GlottalParams::new(f0, tenseness).expect("f0 in range"),
            tongue_position,
            tongue_diameter,
            constrictions,
            noise_seed: seed,
        }
    }

    pub fn controls(&self, n_constrictions: usize) -> TractControls {
        TractControls {
            tongue_position: self.tongue_position,
            tongue_diameter: self.tongue_diameter,
            constrictions: self.constrictions[..n_constrictions].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FitErrors {
    tp: f64,
    td: f64,
    diam: f64,
    fr: f64,
}

/// Absolute tenseness and F0 errors of one source estimate.
#[derive(Debug, Clone, Copy)]
struct GlottalSample {
    tenseness: f64,
    f0: f64,
}

struct Outcome {
    given: FitErrors,
    inverse: Option<FitErrors>,
    original: Option<GlottalSample>,
    recovered: Option<GlottalSample>,
}

fn fit_errors(
    truth: &TractControls,
    target: &Spectrum,
    truth_response: &Spectrum,
    opts: &ExperimentOptions,
    loss: &LossConfig,
) -> Result<(FitErrors, TractControls)> {
    let fit = fit_controls_gd_multistart(target, &opts.gd, None, loss)?;
    let est = fit.controls;
    let (a, b) = (
        AreaFunction::from_controls(&est),
        AreaFunction::from_controls(truth),
    );
    let diam = a
        .diameters()
        .iter()
        .zip(b.diameters())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.diameters().len() as f64;
    let fitted = controls_response(&est, &loss.grid, &loss.simulation);
    let errors = FitErrors {
        tp: (est.tongue_position - truth.tongue_position).abs(),
        td: (est.tongue_diameter - truth.tongue_diameter).abs(),
        diam,
        fr: response_mae_db(&fitted, truth_response),
    };
    Ok((errors, est))
}

fn middle(x: &AudioBuffer, len: usize) -> AudioBuffer {
    let start = x.len().saturating_sub(len) / 2;
    AudioBuffer::new(x.segment(start, len), x.sample_rate()).expect("finite samples")
}

fn original_estimate(
    gfd: &AudioBuffer,
    truth: &GlottalParams,
    len: usize,
) -> Result<GlottalSample> {
    let seg = middle(gfd, len);
    let f0 = estimate_f0_with(&seg, &voice_yin())?;
    let t = estimate_tenseness(&seg, f0)?;
    Ok(GlottalSample {
        tenseness: (t - truth.tenseness()).abs(),
        f0: (f0 - truth.f0()).abs(),
    })
}

/// F0 comes from the inverse-filtered source; tenseness from the speech
/// corrected by the fitted tube (see [`speech_tenseness`]).
fn recovered_estimate(
    source: &AudioBuffer,
    speech: &AudioBuffer,
    tract: &TractControls,
    truth: &GlottalParams,
    len: usize,
    sim: &SimulationConfig,
) -> Result<GlottalSample> {
    let f0 = source_f0(&middle(source, len), &voice_yin())?;
    let t = speech_tenseness(&middle(speech, len), f0, tract, sim)?;
    Ok(GlottalSample {
        tenseness: (t - truth.tenseness()).abs(),
        f0: (f0 - truth.f0()).abs(),
    })
}

fn run_trial(spec: &TrialSpec, n: usize, opts: &ExperimentOptions) -> Result<Outcome> {
    let truth = spec.controls(n);
    let sim = &opts.loss.simulation;
    let gfd = synthesize_gfd(
        spec.glottal,
        opts.duration_samples,
        sim.sample_rate,
        spec.noise_seed,
    );
    let speech = kl_synthesize(
        &gfd,
        std::slice::from_ref(&truth),
        opts.duration_samples,
        sim,
    )?;
    let truth_response = controls_response(&truth, &opts.loss.grid, sim);

    let (given, _) = fit_errors(&truth, &truth_response, &truth_response, opts, &opts.loss)?;

    let analysis_len = opts.duration_samples / 2;
    let original = original_estimate(&gfd, &spec.glottal, analysis_len)
        .map_err(|e| log::warn!("original source estimate failed: {e}"))
        .ok();
    let (inverse, recovered) = match gfm_iaif_with(&middle(&speech, opts.frame_samples), &opts.iaif)
    {
        Ok(res) => {
            let if_loss = LossConfig {
                gain_invariant: true,
                ..opts.loss.clone()
            };
            let target = kl_target_from_iaif(&res, &if_loss.grid)?;
            match fit_errors(&truth, &target, &truth_response, opts, &if_loss) {
                Ok((errors, fitted)) => {
                    let source = AudioBuffer::new(
                        res.tract_filter.inverse(speech.samples()),
                        sim.sample_rate,
                    )?;
                    let recovered = recovered_estimate(
                        &source,
                        &speech,
                        &fitted,
                        &spec.glottal,
                        analysis_len,
                        sim,
                    )
                    .map_err(|e| log::warn!("recovered source estimate failed: {e}"))
                    .ok();
                    (Some(errors), recovered)
                }
                Err(e) => {
                    log::warn!("fit to inverse-filtered target failed: {e}");
                    (None, None)
                }
            }
        }
        Err(e) => {
            log::warn!("inverse filtering failed: {e}");
            (None, None)
        }
    };
    Ok(Outcome {
        given,
        inverse,
        original,
        recovered,
    })
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn condition(n: usize, target: TargetKind, trials: usize, fits: &[FitErrors]) -> ConditionResult {
    let col = |f: fn(&FitErrors) -> f64| mean_of(&fits.iter().map(f).collect::<Vec<_>>());
    ConditionResult {
        constrictions: n,
        target,
        trials,
        failures: trials - fits.len(),
        tongue_position_mae: col(|e| e.tp),
        tongue_diameter_mae: col(|e| e.td),
        total_diameter_mae: col(|e| e.diam),
        frequency_response_mae_db: col(|e| e.fr),
    }
}

/// Original and recovered errors are averaged over the trials where each
/// estimate succeeded; `failures` counts trials missing either one.
fn glottal_errors(outcomes: &[&Outcome]) -> GlottalErrors {
    let orig: Vec<GlottalSample> = outcomes.iter().filter_map(|o| o.original).collect();
    let rec: Vec<GlottalSample> = outcomes.iter().filter_map(|o| o.recovered).collect();
    let col = |v: &[GlottalSample], f: fn(&GlottalSample) -> f64| {
        mean_of(&v.iter().map(f).collect::<Vec<_>>())
    };
    GlottalErrors {
        trials: outcomes.len(),
        failures: outcomes
            .iter()
            .filter(|o| o.original.is_none() || o.recovered.is_none())
            .count(),
        tenseness_mae_original: col(&orig, |g| g.tenseness),
        tenseness_mae_recovered: col(&rec, |g| g.tenseness),
        f0_mae_original: col(&orig, |g| g.f0),
        f0_mae_recovered: col(&rec, |g| g.f0),
    }
}

type Metric = (&'static str, fn(&ConditionResult) -> f64);

fn ordering_violations(conditions: &[ConditionResult]) -> Vec<String> {
    let metrics: [Metric; 4] = [
        ("t_p", |c| c.tongue_position_mae),
        ("t_d", |c| c.tongue_diameter_mae),
        ("total diameter", |c| c.total_diameter_mae),
        ("frequency response", |c| c.frequency_response_mae_db),
    ];
    let find = |n: usize, t: TargetKind| {
        conditions
            .iter()
            .find(|c| c.constrictions == n && c.target == t)
    };
    let mut out = Vec::new();
    for n in CONSTRICTION_COUNTS {
        if let (Some(g), Some(i)) = (
            find(n, TargetKind::Given),
            find(n, TargetKind::InverseFiltered),
        ) {
            for (name, f) in metrics {
                if !(f(g) < f(i)) {
                    out.push(format!(
                        "{name}: given {:.4} not below IF {:.4} at {n} constrictions",
                        f(g),
                        f(i)
                    ));
                }
            }
        }
    }
    for w in CONSTRICTION_COUNTS.windows(2) {
        if let (Some(a), Some(b)) = (find(w[0], TargetKind::Given), find(w[1], TargetKind::Given)) {
            for (name, f) in metrics {
                if f(b) < f(a) {
                    out.push(format!(
                        "{name}: given error drops from {:.4} to {:.4} going from {} to {} constrictions",
                        f(a),
                        f(b),
                        w[0],
                        w[1]
                    ));
                }
            }
        }
    }
    out
}

/// Generates `trials_per_condition` examples, fits each under every
/// constriction count and both target kinds, and summarizes the errors.
/// Trial `i` is drawn from seed `seed + i`; all groups share that draw.
pub fn run_indomain_experiment(opts: &ExperimentOptions) -> Result<ExperimentReport> {
    let trials = opts.trials_per_condition.max(1);
    let specs: Vec<TrialSpec> = (0..trials as u64)
        .map(|i| TrialSpec::sample(opts.seed.wrapping_add(i)))
        .collect();
    let jobs: Vec<(usize, usize)> = CONSTRICTION_COUNTS
        .iter()
        .flat_map(|&n| (0..trials).map(move |i| (n, i)))
        .collect();
    let outcomes: Vec<(usize, Option<Outcome>)> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let out = run_trial(&specs[i], n, opts);
            if let Err(e) = &out {
                log::warn!("trial {i} with {n} constrictions failed: {e}");
            }
            (n, out.ok())
        })
        .collect();

    let mut conditions = Vec::new();
    let mut groups = Vec::new();
    let mut all_glottal = Vec::new();
    for n in CONSTRICTION_COUNTS {
        let group: Vec<&Outcome> = outcomes
            .iter()
            .filter(|(m, _)| *m == n)
            .filter_map(|(_, o)| o.as_ref())
            .collect();
        let given: Vec<FitErrors> = group.iter().map(|o| o.given).collect();
        let inverse: Vec<FitErrors> = group.iter().filter_map(|o| o.inverse).collect();
        conditions.push(condition(n, TargetKind::Given, trials, &given));
        conditions.push(condition(n, TargetKind::InverseFiltered, trials, &inverse));
        groups.push(GlottalGroup {
            constrictions: n,
            errors: glottal_errors(&group),
        });
        all_glottal.extend(group);
    }
    let ordering_violations = ordering_violations(&conditions);
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_version: crate::MODEL_VERSION.to_string(),
        trials_per_condition: trials,
        seed: opts.seed,
        conditions,
        glottal: glottal_errors(&all_glottal),
        glottal_by_constrictions: groups,
        ordering_violations,
    })
}
