//! Hypothesis tests for incompletely observed matched pairs.
//!
//! The crate provides two routes to a two-sided p-value for the null
//! hypothesis of equal component means when some pairs lost one component:
//!
//! * **multiple imputation** — complete the data m times with one of four
//!   engines (Bayesian linear regression, predictive mean matching,
//!   iterative forest means, chained forest donors) and pool the paired
//!   t-statistics with Rubin's rule ([`pool::mi_t_test`]);
//! * **weighted permutation** — combine the complete-pair t statistic with
//!   the Welch statistic of the singletons and calibrate by separate
//!   permutation of the two parts ([`perm::permute_and_test`]).
//!
//! A Monte Carlo harness ([`harness`]) measures type-I error, power and
//! imputation accuracy (NRMSE) of all methods over configurable grids.
//!
//! ```
//! use incpairs::data::{PairRow, PairedSample};
//! use incpairs::perm::{permute_and_test, PermutationConfig};
//!
//! let rows = vec![
//!     PairRow::complete(4.2, 3.1),
//!     PairRow::complete(5.0, 4.4),
//!     PairRow::complete(3.9, 4.0),
//!     PairRow { first: Some(4.8), second: None },
//!     PairRow { first: Some(5.1), second: None },
//!     PairRow { first: None, second: Some(3.6) },
//!     PairRow { first: None, second: Some(4.1) },
//! ];
//! let sample = PairedSample::new(rows, None)?;
//! let outcome = permute_and_test(&sample, &PermutationConfig { b: 200, a_override: None, seed: 1 })?;
//! assert!(outcome.p_two_sided > 0.0 && outcome.p_two_sided <= 1.0);
//! # Ok::<(), incpairs::error::Error>(())
//! ```

pub mod data;
pub mod datagen;
pub mod error;
pub mod forest;
pub mod harness;
pub mod impute;
pub mod metrics;
pub mod perm;
pub mod pool;
pub mod stats;

pub use error::{Error, Result};

// Run the code blocks in the README and the book chapters as doc-tests so
// the guide can't drift from the library.
#[cfg(doctest)]
mod guide {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }
    chapter!(Readme, "../../../README.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(Permutation, "../../../book/src/permutation.md");
    chapter!(Imputation, "../../../book/src/imputation.md");
    chapter!(Pooling, "../../../book/src/pooling.md");
    chapter!(Nrmse, "../../../book/src/nrmse.md");
    chapter!(Harness, "../../../book/src/harness.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
