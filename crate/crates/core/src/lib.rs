pub mod drift;
pub mod experiments;
pub mod expr;
pub mod model;
pub mod quad;
pub mod sde;
pub mod smallmat;
