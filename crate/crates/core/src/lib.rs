pub mod czono;
pub mod filters;
pub mod linalg;
pub mod simharness;
pub mod sysmodel;
pub mod verify;
