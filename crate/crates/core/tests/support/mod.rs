#![allow(dead_code)]

pub mod checks;
pub mod metric;
pub mod oracle;
pub mod toy;
