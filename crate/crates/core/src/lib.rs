//! Income-inequality perception toolkit: distributions and welfare indices,
//! transfer classification, the question catalog, survey sessions, response
//! analysis, ordered-probit preference estimation and synthetic respondents.

pub mod analysis;
pub mod catalog;
pub mod estimation;
pub mod inequality;
pub mod simulator;
pub mod survey;
pub mod transfer;
