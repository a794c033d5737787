//! Explicit Wasserstein-2 bounds, their constants, and parameter budgets.
//!
//! [`theorem1`] covers the Gaussian example trained with SGLD;
//! [`theorem2`] covers general score families under growth and
//! monotonicity assumptions. Large constants are carried as [`ExtFloat`]
//! so that exponential factors never overflow to infinity.
//!
//! [`ExtFloat`]: crate::ext::ExtFloat

mod report;
pub mod theorem1;
pub mod theorem2;

pub use report::BoundReport;
pub use theorem1::{table1_budget, theorem1_bound, Table1Budget, Theorem1Params};
pub use theorem2::{c_em_p, c_emose_p, table2_budget, theorem2_bound, theorem2_bound_at, Table2Budget, Theorem2Params};

use crate::error::{Error, Result};

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
