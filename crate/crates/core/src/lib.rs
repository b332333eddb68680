//! Volatility-connectedness networks from daily OHLC stock panels.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] loads OHLC bars and firm metadata, applies the cleaning rules
//!   (share-class filters, trading calendar, gap imputation) and produces a
//!   [`VolatilityPanel`] of log Garman-Klass variances.
//! * [`varnet`] fits a VAR(d) on a window of that panel, one elastic-net
//!   regression per equation with cross-validated penalties.
//! * [`fevd`] turns the fitted model into impulse responses, the generalized
//!   forecast-error variance decomposition and a Diebold-Yilmaz
//!   [`ConnectednessTable`].
//! * [`layout`] positions the resulting directed network with ForceAtlas2,
//!   optionally seeded by the previous day's layout.
//! * [`rolling`] drives all of the above across daily rolling windows and
//!   persists one [`NetworkSnapshot`] per terminal date.

pub mod error;
pub mod fevd;
pub mod ingest;
pub mod layout;
pub mod rolling;
pub mod varnet;

pub use error::{Error, Result};
pub use fevd::{ConnectednessTable, ImpulseResponseSet, TableDiff};
pub use ingest::{FirmMeta, OhlcBar, Region, ShareClass, TradingCalendar, VolatilityPanel};
pub use layout::{LayoutGraph, LayoutParams, LayoutResult};
pub use rolling::{NetworkSnapshot, RollingConfig, SnapshotStore};
pub use varnet::{ElasticNetFit, LagDesign, VarModel};

/// Calendar day used throughout the pipeline.
pub type Date = chrono::NaiveDate;
