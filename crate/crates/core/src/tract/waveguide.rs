use serde::{Deserialize, Serialize};

use super::area::{area_from_diameter, AreaFunction, SEGMENTS};
use super::controls::TractControls;
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

/// Physical and numerical settings of the tube simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub sample_rate: f64,
    pub speed_of_sound: f64,
    pub segments: usize,
    pub glottal_reflection: f64,
    pub lip_reflection: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::SAMPLE_RATE,
            speed_of_sound: 350.0,
            segments: SEGMENTS,
            glottal_reflection: 0.75,
            lip_reflection: -0.85,
        }
    }
}

impl SimulationConfig {
    /// Each segment is traversed in one tick of the doubled rate.
    pub fn segment_length_m(&self) -> f64 {
        self.speed_of_sound / (2.0 * self.sample_rate)
    }

    pub fn tract_length_m(&self) -> f64 {
        self.segment_length_m() * self.segments as f64
    }
}

/// Junction reflection coefficients plus the two terminations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionModel {
    /// `k[m-1]` sits between segments `m-1` and `m`, for `m` in `1..N`.
    pub k: Vec<f64>,
    pub glottal: f64,
    pub lip: f64,
}

fn junctions(areas: &[f64], out: &mut [f64]) {
    for (k, w) in out.iter_mut().zip(areas.windows(2)) {
        *k = (w[1] - w[0]) / (w[1] + w[0]);
    }
}

pub fn reflection_coefficients(area: &AreaFunction, config: &SimulationConfig) -> ReflectionModel {
    let areas = area.areas();
    let mut k = vec![0.0; areas.len() - 1];
    junctions(&areas, &mut k);
    ReflectionModel {
        k,
        glottal: config.glottal_reflection,
        lip: config.lip_reflection,
    }
}

/// Travelling-wave state of the tube: right-going `r` and left-going `l`
/// pressure components per segment.
#[derive(Debug, Clone)]
pub struct Waveguide {
    r: Vec<f64>,
    l: Vec<f64>,
    fin: Vec<f64>,
    bin: Vec<f64>,
    glottal: f64,
    lip: f64,
}

impl Waveguide {
    pub fn new(config: &SimulationConfig) -> Self {
        let n = config.segments;
        Self {
            r: vec![0.0; n],
            l: vec![0.0; n],
            fin: vec![0.0; n],
            bin: vec![0.0; n],
            glottal: config.glottal_reflection,
            lip: config.lip_reflection,
        }
    }

    /// One tick at twice the audio rate; returns the right-going wave leaving
    /// the last segment.
    pub fn tick(&mut self, x: f64, k: &[f64]) -> f64 {
        let n = self.r.len();
        debug_assert_eq!(k.len(), n - 1);
        self.fin[0] = x + self.glottal * self.l[0];
        for m in 1..n {
            let (a, c, km) = (self.r[m - 1], self.l[m], k[m - 1]);
            self.fin[m] = (1.0 + km) * a - km * c;
            self.bin[m - 1] = km * a + (1.0 - km) * c;
        }
        self.bin[n - 1] = self.lip * self.r[n - 1];
        std::mem::swap(&mut self.r, &mut self.fin);
        std::mem::swap(&mut self.l, &mut self.bin);
        self.r[n - 1]
    }

    /// One audio-rate sample: the input is held for two ticks and both
    /// outputs are summed.
    pub fn process(&mut self, x: f64, k: &[f64]) -> f64 {
        self.tick(x, k) + self.tick(x, k)
    }
}

/// Filters `source` through the tube with one area function per frame.
///
/// Frame `f` is reached at sample `f * hop`; areas are interpolated linearly
/// per sample between frames and held after the last one.
pub fn kl_synthesize_areas(
    source: &AudioBuffer,
    frames: &[AreaFunction],
    hop: usize,
    config: &SimulationConfig,
) -> Result<AudioBuffer> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("empty area track".into()));
    }
    if hop == 0 {
        return Err(Error::InvalidInput("hop must be positive".into()));
    }
    if let Some(f) = frames
        .iter()
        .find(|f| f.diameters().len() != config.segments)
    {
        return Err(Error::InvalidInput(format!(
            "area function has {} segments, config expects {}",
            f.diameters().len(),
            config.segments
        )));
    }
    let areas: Vec<Vec<f64>> = frames.iter().map(|f| f.areas()).collect();
    let mut guide = Waveguide::new(config);
    let mut k = vec![0.0; config.segments - 1];
    let mut blend = vec![0.0; config.segments];
    let mut current = usize::MAX;
    let mut out = Vec::with_capacity(source.len());
    for (i, &x) in source.samples().iter().enumerate() {
        let f = i / hop;
        if f + 1 >= areas.len() {
            if current != areas.len() - 1 {
                current = areas.len() - 1;
                junctions(&areas[current], &mut k);
            }
        } else {
            current = f;
            let t = (i % hop) as f64 / hop as f64;
            for ((b, a0), a1) in blend.iter_mut().zip(&areas[f]).zip(&areas[f + 1]) {
                *b = a0 + (a1 - a0) * t;
            }
            junctions(&blend, &mut k);
        }
        out.push(guide.process(x, &k));
    }
    AudioBuffer::new(out, source.sample_rate())
}

/// [`kl_synthesize_areas`] driven by articulatory controls.
pub fn kl_synthesize(
    source: &AudioBuffer,
    controls_track: &[TractControls],
    hop: usize,
    config: &SimulationConfig,
) -> Result<AudioBuffer> {
    let frames: Vec<AreaFunction> = controls_track
        .iter()
        .map(AreaFunction::from_controls)
        .collect();
    kl_synthesize_areas(source, &frames, hop, config)
}

/// Area of a uniform tube with the given diameter, for tests and defaults.
pub fn uniform_area(diameter: f64) -> AreaFunction {
    debug_assert!(area_from_diameter(diameter) > 0.0);
    AreaFunction::new(vec![diameter; SEGMENTS]).expect("uniform diameter above floor")
}
