#![allow(dead_code)]

pub mod criteria;
pub mod inner_oracle;
pub mod ltlf_oracle;
pub mod runs;
pub mod systems;
