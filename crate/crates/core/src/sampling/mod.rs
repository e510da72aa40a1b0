mod draw;
mod realtime;
mod stream;

pub use draw::{
    inverse_cdf, sample_categorical, sample_node_subset, sample_sender, sample_tau, RecipientDraw, MAX_EMPTY_RESAMPLES,
};
pub use realtime::{spawn_realtime, Clock, Emitted, RealtimeHandle, SimulatedClock, SystemClock, QUEUE_CAPACITY};
pub use stream::{
    generate_stream, GenConfig, GenMode, GenStats, Generator, Horizon, SampledEvent, StreamRecord, StreamState,
};
