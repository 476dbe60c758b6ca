//! File formats, model serialization and the synthetic recording generator.

mod arrays;
mod codec;
mod model_file;
mod records;
mod synth;

pub use arrays::{
    decode_prediction, decode_windows, encode_prediction, encode_windows, read_prediction,
    read_window_dir, read_windows, write_prediction, write_windows, Prediction,
};
pub use model_file::{
    decode_model, encode_ensemble, encode_model, load_members, load_model, save_ensemble,
    save_model,
};
pub use records::{list_records, read_record, write_record};
pub use synth::{
    event_labels, synth_dataset, synth_record, Event, SynthConfig, CHANNEL_NAMES,
    MARGIN_AFTER_RERA_S, MARGIN_AFTER_S, MARGIN_BEFORE_S,
};
