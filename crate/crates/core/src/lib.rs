//! Data preparation and evaluation for bilingual Mandarin/English singing
//! voice synthesis.

pub mod dsp;
pub mod formats;
pub mod lexicon;
pub mod score;
pub mod pseudo;
pub mod metrics;
