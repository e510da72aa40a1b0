//! Threading: assigns each sampled event a communication type and thread,
//! then fills in subject, body and canned framing.

mod engine;
mod mbox;
mod profile;

pub use engine::{
    display_name, select_comm_type, select_target_thread, CommType, EmailRecord, EngineState, GeneratedEmail, Thread,
    ThreadConfig, ThreadEngine, ThreadStore, MAX_REFERENCES,
};
pub use mbox::{address, write_mbox_message};
pub use profile::{build_profiles, comm_type_of_subject, SenderProfile};
