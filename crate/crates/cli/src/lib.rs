//! Library side of the `evidenced` command-line tool.

pub mod args;
pub mod commands;
pub mod kgrid;
pub mod manifest;
pub mod validate;
