pub mod calibrate;
pub mod curves;
pub mod optimize;
pub mod reduce;
pub mod replay;
pub mod simulate;

use clap::ValueEnum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Kv,
    Csv,
}
