//! Independent reference code shared by integration and acceptance tests.
#![allow(dead_code)]

pub mod reference;
pub mod t_reference;
pub mod table;
