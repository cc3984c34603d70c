use std::collections::HashSet;
use std::fmt::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Bit mask of the nucleotides compatible with an IUPAC code
/// (A = 1, C = 2, G = 4, T = 8). Gaps and unknowns are fully ambiguous.
pub fn nucleotide_mask(c: u8) -> Option<u8> {
    Some(match c.to_ascii_uppercase() {
        b'A' => 1,
        b'C' => 2,
        b'G' => 4,
        b'T' | b'U' => 8,
        b'R' => 1 | 4,
        b'Y' => 2 | 8,
        b'S' => 2 | 4,
        b'W' => 1 | 8,
        b'K' => 4 | 8,
        b'M' => 1 | 2,
        b'B' => 2 | 4 | 8,
        b'D' => 1 | 4 | 8,
        b'H' => 1 | 2 | 8,
        b'V' => 1 | 2 | 4,
        b'N' | b'-' | b'?' | b'.' | b'X' => 15,
        _ => return None,
    })
}

/// Taxon names with equal-length nucleotide rows (stored upper-case).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    names: Vec<String>,
    rows: Vec<Vec<u8>>,
}

impl Alignment {
    pub fn new(names: Vec<String>, rows: Vec<Vec<u8>>) -> Result<Self> {
        let aln = Self::unchecked(names, rows)?;
        if aln.n_sites() == 0 {
            return Err(Error::InvalidInput("alignment has no sites".into()));
        }
        Ok(aln)
    }

    /// Zero-site alignment; its likelihood is 1, so posterior sampling on it
    /// samples the prior.
    pub fn empty(names: Vec<String>) -> Result<Self> {
        Self::unchecked(names.clone(), vec![Vec::new(); names.len()])
    }

    fn unchecked(names: Vec<String>, rows: Vec<Vec<u8>>) -> Result<Self> {
        if names.len() != rows.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} rows",
                names.len(),
                rows.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::InvalidInput("alignment has no taxa".into()));
        }
        if names.iter().collect::<HashSet<_>>().len() != names.len() {
            return Err(Error::InvalidInput(
                "duplicate taxon names in alignment".into(),
            ));
        }
        let k = rows[0].len();
        let mut clean = Vec::with_capacity(rows.len());
        for (name, row) in names.iter().zip(rows) {
            if row.len() != k {
                return Err(Error::InvalidInput(format!(
                    "row {name:?} has {} sites, expected {k}",
                    row.len()
                )));
            }
            if let Some(&c) = row.iter().find(|&&c| nucleotide_mask(c).is_none()) {
                return Err(Error::InvalidInput(format!(
                    "row {name:?} has invalid character {:?}",
                    c as char
                )));
            }
            clean.push(row.to_ascii_uppercase());
        }
        Ok(Self { names, rows: clean })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn n_taxa(&self) -> usize {
        self.names.len()
    }

    pub fn n_sites(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, name: &str) -> Option<&[u8]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn parse_fasta(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix('>') {
                let name = header.split_whitespace().next().unwrap_or("");
                if name.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "line {}: empty FASTA header",
                        lineno + 1
                    )));
                }
                names.push(name.to_string());
                rows.push(Vec::new());
            } else if !line.is_empty() {
                let row = rows.last_mut().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "line {}: sequence before first header",
                        lineno + 1
                    ))
                })?;
                row.extend(line.bytes().filter(|c| !c.is_ascii_whitespace()));
            }
        }
        Self::new(names, rows)
    }

    /// Relaxed sequential PHYLIP: a `n k` header, then one `name sequence`
    /// line per taxon; names end at the first whitespace.
    pub fn parse_phylip(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty PHYLIP input".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("bad PHYLIP header {header:?}")))?;
        let [n, k] = dims[..] else {
            return Err(Error::InvalidInput(format!("bad PHYLIP header {header:?}")));
        };
        let mut names = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for line in lines {
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap_or_default();
            names.push(name.to_string());
            rows.push(parts.flat_map(str::bytes).collect::<Vec<u8>>());
        }
        if names.len() != n {
            return Err(Error::InvalidInput(format!(
                "PHYLIP header declares {n} taxa, found {}",
                names.len()
            )));
        }
        let aln = Self::new(names, rows)?;
        if aln.n_sites() != k {
            return Err(Error::InvalidInput(format!(
                "PHYLIP header declares {k} sites, found {}",
                aln.n_sites()
            )));
        }
        Ok(aln)
    }

    /// FASTA if the first non-blank character is `>`, PHYLIP otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('>') {
            Self::parse_fasta(text)
        } else {
            Self::parse_phylip(text)
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// FASTA with 60-column sequence lines.
    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for (name, row) in self.names.iter().zip(&self.rows) {
            let _ = writeln!(out, ">{name}");
            for chunk in row.chunks(60) {
                out.push_str(std::str::from_utf8(chunk).unwrap_or_default());
                out.push('\n');
            }
        }
        out
    }

    /// Hex SHA-256 of the FASTA rendering; identifies the data an estimate
    /// was computed on.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_fasta().as_bytes()))
    }
}
