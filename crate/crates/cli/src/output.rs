//! CSV emission: one `#` comment line, one header row, then data rows.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Seventeen significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub struct Csv {
    w: Box<dyn Write>,
}

impl Csv {
    /// Writes the comment line (`key=value` pairs) and the header.
    pub fn new(path: Option<&Path>, meta: &[(&str, String)], header: &[&str]) -> io::Result<Self> {
        let mut w = open(path)?;
        let pairs: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# {}", pairs.join(" "))?;
        writeln!(w, "{}", header.join(","))?;
        Ok(Csv { w })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.w, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.w.flush()
    }
}
