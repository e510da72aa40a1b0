//! Log ingestion, vocabularies, inter-arrival times and train/dev/test windows.

mod dataset;
mod metadata;
mod parse;
mod split;
mod vocab;

pub use dataset::{Dataset, DatasetConfig};
pub use metadata::{derive_metadata_class, local_time, LocalTime, MetadataClass};
pub use parse::{parse_event_log, write_event_log, LogFormat, ParsedLog, RawEvent};
pub use split::{
    inter_event_times, split_counts, split_sequences, Event, EventRecord, NormStats, Sequence, Split, SplitConfig,
    SplitMode, Splits, MIN_TAU_HOURS,
};
pub use vocab::{build_recipient_vocab, NodeVocabulary, RecipientVocabulary, Vocabularies};
