pub mod gf;
pub mod rs;
pub mod bitnum;
pub mod rangemap;
pub mod schemes;
pub mod faults;
pub mod harness;
