//! Distinguishing two binary strings within bounded edit distance from
//! deletion-channel traces.
//!
//! The crate is organised bottom-up:
//!
//! * [`bitstr`]: binary strings, edit-ball membership, periodicity and
//!   pattern indicator vectors.
//! * [`channel`]: the i.i.d. deletion channel, an exact enumeration oracle
//!   for its output distribution and exact multi-bit statistic expectations.
//! * [`poly`]: exact power sums, divisibility by `(z - 1)^m`, deflation and
//!   the certified high-precision search for a point near `1` where the
//!   difference polynomial is large.
//! * [`distinguish`]: the end-to-end hypothesis test with Hoeffding sample
//!   sizing, plus Monte Carlo experiment and sweep harnesses.
//! * [`verify`]: property suites that check the structural lemmas the
//!   pipeline relies on.

pub mod bitstr;
pub mod channel;
pub mod distinguish;
mod error;
pub mod poly;
pub mod seed;
pub mod verify;

pub use bitstr::{BitString, EditDistanceReport, IndicatorVector};
pub use channel::{ChannelParam, StatisticSpec, Trace};
pub use distinguish::{
    ExperimentConfig, ExperimentResult, PipelinePlan, PlanMode, StatisticFamily, Verdict,
};
pub use error::{Error, Result};
pub use poly::{Certificate, FixedComplex, IntPolynomial};
