//! Articulatory tube model: controls, area function and wave propagation.

mod area;
mod controls;
mod voice;
mod waveguide;

pub use area::{
    apply_constrictions, area_from_diameter, base_diameter, diameter_from_area,
    diameters_with_jacobian, rest_diameter, AreaFunction, OPEN_TRACT_FLOOR, SEGMENTS,
};
pub use controls::{
    Constriction, ParamRange, TractControls, CONSTRICTION_DIAMETER, CONSTRICTION_POSITION,
    DEFAULT_MAX_CONSTRICTIONS, TONGUE_DIAMETER, TONGUE_POSITION,
};
pub use voice::{synthesize_voice, synthesize_voice_gated, synthesize_voice_raw, OUTPUT_PEAK};
pub use waveguide::{
    kl_synthesize, kl_synthesize_areas, reflection_coefficients, uniform_area, ReflectionModel,
    SimulationConfig, Waveguide,
};
