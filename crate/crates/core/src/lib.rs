//! Two-stage feature statistics transformation for arbitrary style transfer.
//!
//! Content features first take the per-channel mean and deviation of the
//! style features ([`gsa`]). Each `k×k` content patch is then matched to its
//! most similar style patch and takes that patch's local statistics
//! ([`lss`]). [`tssat`] composes both. The [`losses`] module evaluates the
//! training objective over supplied feature maps.

pub mod attention;
pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod layers;
pub mod losses;
pub mod matching;
pub mod patch;
pub mod tensor;
pub mod transform;

pub use attention::{attention_map, AttentionMap, DEFAULT_TAU};
pub use error::{Error, Result};
pub use layers::{LayerFeatures, VggLayer, CONTENT_LAYERS, STYLE_LAYERS};
pub use losses::{
    attention_content_loss, content_loss, identity_loss, patch_style_loss, style_loss, total_loss,
    IdentityInputs, LossComponents, LossReport, LossWeights,
};
pub use matching::{match_patches, MatchAssignment, Matcher};
pub use patch::{extract_patches, recombine_patches, PatchSet};
pub use tensor::{channel_stats, mvn_normalize, ChannelStats, FeatureMap, DEFAULT_EPSILON};
pub use transform::{gsa, lss, lss_matched, swap_patch_stats, tssat, TssatConfig};
