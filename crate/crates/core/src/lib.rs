pub mod btm;
pub mod config;
pub mod corpus;
pub mod demo;
pub mod labeler;
pub mod matcher;
pub mod report;
pub mod rulegen;
pub mod textprep;
pub mod triage;
