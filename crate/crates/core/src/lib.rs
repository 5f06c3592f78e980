pub mod error;
pub mod exec;
pub mod fock;
pub mod linalg;
pub mod special;
pub mod engineered;
pub mod dynamics;
pub mod spectro;
pub mod analysis;
pub mod io;
