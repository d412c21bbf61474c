//! Neural decompilation of x86-64 assembly into C/C++ and vulnerability
//! prediction on the recovered code.
//!
//! The pipeline runs bottom-up: [`corpus`] pairs assembly with source,
//! [`asmprep`] and [`srcprep`] normalize the two sides, [`tokenizer`] learns
//! BPE vocabularies and filters outlier lengths, [`neural`] trains the
//! decompiler and the classifier, [`metrics`] scores their outputs and
//! [`tasks`] wires everything into reproducible experiments.

pub mod asmprep;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod neural;
pub mod srcprep;
pub mod tasks;
pub mod tokenizer;
