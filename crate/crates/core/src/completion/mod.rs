//! Map completion: a U-net generator maps a partial ternary map (plus its
//! unsearched mask) to a full one, optionally trained against a conditional
//! patch discriminator. Decoder dropout doubles as the sampling noise.

mod inference;
mod loss;
mod network;
mod train;

pub use inference::{
    complete_map, complete_ternary, complete_with, crop_window, extract_window, generate,
    pack_input, paste_window, unpack_output, CropWindow,
};
pub use loss::{gan_losses, l2_loss, GanLosses};
pub use network::{
    apply_update, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, NetGrads,
    Parameterized,
};
pub use train::{
    load_discriminator, load_generator, pooled_confusion, save_generator, train, validate,
    EpochMetrics, TrainConfig, TrainMode, Trained, DISCRIMINATOR_FILE, GENERATOR_FILE, LOG_FILE,
};

#[cfg(test)]
mod tests;
