pub mod bisim;
pub mod derive;
pub mod dist;
pub mod format;
pub mod lang;
pub mod logic;
pub mod lp;
pub mod probe;
pub mod pts;
pub mod rational;
pub mod terms;
