use std::io::Write;

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::json;

/// Writes one JSON object per log record to stderr.
pub struct JsonlLogger {
    level: LevelFilter,
}

impl Log for JsonlLogger {
    fn enabled(&self, m: &Metadata<'_>) -> bool {
        m.level() <= self.level
    }

    fn log(&self, r: &Record<'_>) {
        if !self.enabled(r.metadata()) {
            return;
        }
        let line = json!({
            "level": level_name(r.level()),
            "target": r.target(),
            "msg": r.args().to_string(),
        });
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{line}");
    }

    fn flush(&self) {
        let _ = std::io::stderr().flush();
    }
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Error => "error",
        Level::Warn => "warn",
        Level::Info => "info",
        Level::Debug => "debug",
        Level::Trace => "trace",
    }
}

/// Install the logger once; later calls are ignored.
pub fn init(level: LevelFilter) {
    let logger = Box::leak(Box::new(JsonlLogger { level }));
    if log::set_logger(logger).is_ok() {
        log::set_max_level(level);
    }
}
