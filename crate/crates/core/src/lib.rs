//! Computational color constancy: illuminant estimation, von Kries
//! correction, angular loss functions with analytic gradients, a small
//! trainable regression head, and cross-validated angular-error evaluation.
//!
//! ```
//! use constancy::{estimate, EstimatorSpec, Illuminant, LinearImage, PixelRgb};
//!
//! let img = LinearImage::uniform(8, 8, PixelRgb::new(0.6, 0.3, 0.3))?;
//! let e = estimate(&EstimatorSpec::GrayWorld, &img, None)?;
//! assert!(e.is_normalized());
//! # Ok::<(), constancy::Error>(())
//! ```

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod image;
pub mod loss;
pub mod model;
pub mod training;
pub mod vector;

pub use crate::dataset::{
    build_feature_dataset, generate_synthetic, load_image, load_manifest, BitDepth, FeatureOptions,
    Gamma, Manifest, ManifestEntry, SceneKind, SyntheticConfig,
};
pub use crate::error::{Error, Result};
pub use crate::estimators::{
    estimate, extract_features, minkowski_statistic, predict, DerivativeOrder, EstimatorSpec,
    FeatureVector, MinkowskiNorm, FEATURE_DIM,
};
pub use crate::evaluation::{
    compute_stats, cross_validate, make_folds, render_report, CvResult, ErrorStats, FoldPlan,
    ReportFormat,
};
pub use crate::image::{
    augment, center_square_resize, masked_pixels, normalize_illuminant, von_kries_cast,
    von_kries_correct, AugmentParams, Illuminant, LinearImage, MaskRect, PixelRgb,
};
pub use crate::loss::{
    angular_error, cos_similarity, finite_difference_gradient, loss_gradient, loss_value,
    AngleRadians, Gradient3, LossKind,
};
pub use crate::model::{MlpGradient, MlpModel};
pub use crate::training::{init_model, model_gradient, train, TrainConfig, TrainReport};
pub use crate::vector::Vec3;
