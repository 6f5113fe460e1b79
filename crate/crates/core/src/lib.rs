pub mod audio_io;
pub mod augment;
pub mod cli;
pub mod dsp;
pub mod features;
pub mod nn;
pub mod synthetic;
pub mod train_eval;
