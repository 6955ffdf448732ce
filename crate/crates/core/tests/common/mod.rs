#![allow(dead_code)]

pub mod dtw_oracle;
pub mod fd;
pub mod table1;
