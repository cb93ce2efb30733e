use std::io::BufRead;
use std::path::Path;

use crate::tx::{open_lines, parse_fixture, Transaction};

use super::{ChainError, Cursor, StreamSource};

/// JSONL fixture reader, optionally gzip-compressed.
pub struct FileSource {
    lines: Box<dyn BufRead>,
    line_no: usize,
    batch_size: usize,
    /// Last position read, delivered or not.
    read: Cursor,
    cursor: Cursor,
    eof: bool,
    delivered: bool,
}

impl FileSource {
    pub fn open(path: &Path, batch_size: usize) -> Result<Self, ChainError> {
        Self::resume(path, batch_size, None)
    }

    /// Opens `path` and skips everything at or before `cursor`.
    pub fn resume(path: &Path, batch_size: usize, cursor: Cursor) -> Result<Self, ChainError> {
        let lines = open_lines(path).map_err(|source| ChainError::Io { path: path.display().to_string(), source })?;
        Ok(FileSource {
            lines,
            line_no: 0,
            batch_size: batch_size.max(1),
            read: None,
            cursor,
            eof: false,
            delivered: false,
        })
    }

    fn next_tx(&mut self) -> Result<Option<Transaction>, ChainError> {
        let mut line = String::new();
        loop {
            line.clear();
            let n = self
                .lines
                .read_line(&mut line)
                .map_err(|source| ChainError::Io { path: format!("line {}", self.line_no + 1), source })?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let tx = parse_fixture(line.trim_end()).map_err(|source| ChainError::Schema { line: self.line_no, source })?;
            if self.read.is_some_and(|r| tx.position() <= r) {
                return Err(ChainError::OutOfOrderInput { line: self.line_no });
            }
            self.read = Some(tx.position());
            if self.cursor.is_some_and(|c| tx.position() <= c) {
                continue;
            }
            return Ok(Some(tx));
        }
    }
}

impl StreamSource for FileSource {
    /// Batches of up to `batch_size`. An empty file yields one empty batch.
    fn next_batch(&mut self) -> Result<Option<Vec<Transaction>>, ChainError> {
        if self.eof {
            return Ok(None);
        }
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            match self.next_tx()? {
                Some(tx) => batch.push(tx),
                None => {
                    self.eof = true;
                    break;
                }
            }
        }
        if batch.is_empty() && self.delivered {
            return Ok(None);
        }
        self.delivered = true;
        if let Some(last) = batch.last() {
            self.cursor = Some(last.position());
        }
        Ok(Some(batch))
    }

    fn cursor(&self) -> Cursor {
        self.cursor
    }
}
