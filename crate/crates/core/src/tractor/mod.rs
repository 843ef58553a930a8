//! Projective tractor calculus on `T*`, `S²T*` and `S²T`.

mod codiff;
mod ops;
mod slots;

pub use codiff::{
    kostant_codiff, kostant_codiff_s2, s2_image_dimension, s2_in_image, s2_in_kernel,
    std_image_dimension, std_in_image, std_in_kernel, total_symmetrization_defect, ImageDimension,
};
pub use ops::{
    bgg_residual_e1, bgg_residual_e2, is_normal, metricity_section, s2_dual_tractor_derivative,
    s2_tractor_derivative, split_e1, split_e2, split_e2_rank_signature, tractor_derivative,
    E2Residual, Normality, SectionKind, NORMAL_TOL, ROUNDOFF_FACTOR, SCALAR_FLAT_TOL,
};
pub use slots::{
    dual_form_rank_signature, matrix_rank_signature, matrix_rank_signature_floor,
    tractor_form_rank_signature, Cotractor, FormRank, S2Cotractor, S2Form, S2Tractor,
    S2TractorForm, StdForm, RANK_TOL,
};
