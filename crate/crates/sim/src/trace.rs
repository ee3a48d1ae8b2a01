//! Plain-text dump of every tile operation.

use std::io::Write;

use crossbar_core::crossbar::{TileObserver, TileTrace};

/// Writes one line per tile: position, injected currents, measured
/// voltages and retrieved partial products. The first write error is kept
/// and later tiles are dropped.
pub struct TraceWriter<W: Write> {
    out: W,
    label: String,
    error: Option<std::io::Error>,
    lines: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, label: String::new(), error: None, lines: 0 }
    }

    /// Prefix for subsequent lines, e.g. `sample=3 layer=0`.
    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", parts.join(","))
}

impl<W: Write> TileObserver for TraceWriter<W> {
    fn observe(&mut self, t: &TileTrace<'_>) {
        if self.error.is_some() {
            return;
        }
        let res = writeln!(
            self.out,
            "{} tile=({},{}) currents_a={} voltages_v={} partial={}",
            self.label,
            t.block_row,
            t.block_col,
            list(t.currents),
            list(t.voltages),
            list(t.partial)
        );
        match res {
            Ok(()) => self.lines += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_per_tile() {
        let mut w = TraceWriter::new(Vec::new());
        w.set_label("layer=0");
        let t = TileTrace { block_row: 1, block_col: 2, currents: &[5e-4], voltages: &[4.7], partial: &[0.25] };
        w.observe(&t);
        w.observe(&t);
        assert_eq!(w.lines(), 2);
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "layer=0 tile=(1,2) currents_a=[5e-4] voltages_v=[4.7e0] partial=[2.5e-1]");
    }
}
