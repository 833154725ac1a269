#![allow(dead_code)]

pub mod fixtures;
pub mod props;
pub mod published;
