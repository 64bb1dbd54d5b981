pub mod chem;
pub mod corpus;
pub mod eval;
pub mod extraction;
mod hash;
pub mod projection;
pub mod ranking;
pub mod route;
