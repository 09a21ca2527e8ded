#![allow(dead_code)]

pub mod ulog_gen;
