//! In-band file transfer framing.
//!
//! ```text
//! FILE <name> <byte_count>\n  <byte_count raw bytes>   (repeated per file)
//! DONE\n
//! ```
//!
//! A sender that cannot finish writes `ERR <reason>\n` instead of the next
//! header.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::storage::{validate_file_name, FileEntry};

const MAX_HEADER_LEN: usize = 1024;

/// Frame every file, in order, then `DONE`.
pub fn send_files<W: Write>(out: &mut W, files: &[(String, Vec<u8>)]) -> Result<()> {
    for (name, bytes) in files {
        validate_file_name(name)?;
        writeln!(out, "FILE {name} {}", bytes.len())?;
        out.write_all(bytes)?;
    }
    out.write_all(b"DONE\n")?;
    out.flush()?;
    Ok(())
}

/// [`send_files`] into a fresh buffer.
pub fn encode_files(files: &[(String, Vec<u8>)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    send_files(&mut buf, files)?;
    Ok(buf)
}

/// Stream files from disk. If one cannot be opened or read in full the
/// stream is aborted with an `ERR` frame and the error is returned.
pub fn send_file_paths<W: Write>(out: &mut W, files: &[(String, PathBuf)]) -> Result<u64> {
    let mut total = 0;
    for (name, path) in files {
        let opened = validate_file_name(name).and_then(|_| {
            let f = File::open(path)?;
            let len = f.metadata()?.len();
            Ok((f, len))
        });
        let (file, len) = match opened {
            Ok(v) => v,
            Err(e) => return Err(abort(out, &format!("{name}: {e}"), e)),
        };
        writeln!(out, "FILE {name} {len}")?;
        let copied = io::copy(&mut file.take(len), out)?;
        if copied != len {
            // header already promised `len` bytes; the stream is unusable
            return Err(Error::Framing(format!("{name} shrank while sending ({copied} of {len} bytes)")));
        }
        total += len;
    }
    out.write_all(b"DONE\n")?;
    out.flush()?;
    Ok(total)
}

fn abort<W: Write>(out: &mut W, reason: &str, err: Error) -> Error {
    let reason: String = reason.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
    let _ = writeln!(out, "ERR {reason}").and_then(|_| out.flush());
    err
}

enum Frame {
    File { name: String, len: u64 },
    Done,
}

fn read_frame<R: BufRead>(input: &mut R) -> Result<Frame> {
    let mut line = Vec::new();
    input.by_ref().take(MAX_HEADER_LEN as u64).read_until(b'\n', &mut line)?;
    if line.is_empty() {
        return Err(Error::IncompleteTransfer("stream ended before DONE".into()));
    }
    if line.last() != Some(&b'\n') {
        return Err(Error::Framing(format!("unterminated frame header ({} bytes)", line.len())));
    }
    line.pop();
    let text = String::from_utf8(line).map_err(|_| Error::Framing("frame header is not UTF-8".into()))?;
    if text == "DONE" {
        return Ok(Frame::Done);
    }
    if let Some(reason) = text.strip_prefix("ERR ") {
        return Err(Error::TransferAborted(reason.to_string()));
    }
    let parts: Vec<&str> = text.split(' ').collect();
    match parts.as_slice() {
        ["FILE", name, len] => {
            validate_file_name(name).map_err(|e| Error::Framing(e.to_string()))?;
            let len = len.parse().map_err(|_| Error::Framing(format!("bad byte count in `{text}`")))?;
            Ok(Frame::File { name: name.to_string(), len })
        }
        _ => Err(Error::Framing(format!("unexpected frame `{text}`"))),
    }
}

fn copy_exact<R: Read, W: Write>(input: &mut R, out: &mut W, name: &str, len: u64) -> Result<()> {
    let got = io::copy(&mut input.take(len), out)?;
    if got != len {
        return Err(Error::Framing(format!("{name}: declared {len} bytes, stream ended after {got}")));
    }
    Ok(())
}

/// Inverse of [`send_files`].
pub fn receive_files<R: BufRead>(input: &mut R) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    loop {
        match read_frame(input)? {
            Frame::Done => return Ok(files),
            Frame::File { name, len } => {
                let mut bytes = Vec::with_capacity(len.min(1 << 24) as usize);
                copy_exact(input, &mut bytes, &name, len)?;
                files.push((name, bytes));
            }
        }
    }
}

/// Receive straight into `dir`, refusing to overwrite existing files.
/// Returns the size and checksum of every file written.
pub fn receive_files_to_dir<R: BufRead>(input: &mut R, dir: &Path) -> Result<Vec<FileEntry>> {
    let mut entries = Vec::new();
    loop {
        match read_frame(input)? {
            Frame::Done => return Ok(entries),
            Frame::File { name, len } => {
                let path = dir.join(&name);
                let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
                    if e.kind() == io::ErrorKind::AlreadyExists {
                        Error::AlreadyExists(path.display().to_string())
                    } else {
                        e.into()
                    }
                })?;
                let mut sink = Crc32Writer::new(io::BufWriter::new(file));
                copy_exact(input, &mut sink, &name, len)?;
                let crc32 = sink.finish()?;
                entries.push(FileEntry { name, bytes: len, crc32 });
            }
        }
    }
}

struct Crc32Writer<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Crc32Writer<W> {
    fn new(inner: W) -> Self {
        Crc32Writer { inner, hasher: crc32fast::Hasher::new() }
    }

    fn finish(mut self) -> Result<u32> {
        self.inner.flush()?;
        Ok(self.hasher.finalize())
    }
}

impl<W: Write> Write for Crc32Writer<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
