//! Parallel market makers for cost-function prediction markets and AMMs.
//!
//! Every liquidity provider runs its own convex generator `Gᵢ` on the
//! price simplex. The market quotes the aggregate `ΣGᵢ`, whose cost function
//! is the infimal convolution of the providers' costs, and splits each trade
//! so every provider ends at the common price. All math is generic over
//! [`scalar::Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

// Checks are written `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod engine;
pub mod equivalence;
pub mod error;
pub mod generators;
pub mod quadrature;
pub mod scalar;
pub mod simplex;
pub mod two_asset;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// A point of the price simplex.
pub type Price = simplex::SimplexPrice<f64>;
/// A liability vector or trade bundle.
pub type Liability = simplex::LiabilityVector<f64>;
pub type Family = generators::FamilyDescriptor<f64>;
pub type Generator64 = generators::Generator<f64>;
pub type Curve64 = generators::Curve1D<f64>;
pub type Market = engine::MarketState<f64>;
pub type Config = engine::EngineConfig<f64>;
pub type Fees = engine::FeeScheme<f64>;
pub type Receipt = engine::TradeReceipt<f64>;
pub type TwoAsset = two_asset::TwoAssetMarket<f64>;
pub type UniswapV2 = two_asset::UniswapV2Market<f64>;
pub type UniswapV3 = two_asset::UniswapV3Market<f64>;
pub type PiecewiseLinear = two_asset::PiecewiseLinearState<f64>;
pub type ScoringMarket = equivalence::ScoringMarketState<f64>;
