//! Configuration, checkpoints and reports.

mod checkpoint;
pub mod config;
pub mod report;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointError, MAGIC};
pub use config::{parse_config, ConfigError, SimConfig};
pub use report::{emit_report, simulate, ReportError, RunReport};

/// Reads `null` back as `NaN`; `serde_json` writes non-finite floats as `null`.
pub fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    use serde::Deserialize;
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}
