pub mod abelian;
pub mod localsys;
pub mod lsss;
pub mod tdual;
pub mod hori;
pub mod ktheory;
pub mod reference;
