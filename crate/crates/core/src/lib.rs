//! Context save and restore for tenants sharing a reconfigurable fabric.

pub mod bitcodec;
pub mod epochctl;
pub mod fabricsim;
pub mod scenario;
pub mod tenants;
