use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};

/// JSON-lines run log. Every record carries the command name and the
/// milliseconds elapsed since the run started.
pub struct RunLog {
    sink: Box<dyn Write>,
    command: &'static str,
    started: Instant,
}

impl RunLog {
    pub fn open(path: Option<&Path>, command: &'static str) -> io::Result<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stderr()),
        };
        Ok(Self {
            sink,
            command,
            started: Instant::now(),
        })
    }

    pub fn event(&mut self, event: &str, fields: Value) {
        let mut record = Map::new();
        record.insert("event".into(), json!(event));
        record.insert("command".into(), json!(self.command));
        record.insert("elapsed_ms".into(), json!(self.started.elapsed().as_millis() as u64));
        if let Value::Object(extra) = fields {
            record.extend(extra);
        }
        let _ = writeln!(self.sink, "{}", Value::Object(record));
        let _ = self.sink.flush();
    }
}
