use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Chain, ModelChoice, PriorSpec, RunInfo};
use crate::error::{Error, Result};
use crate::transforms::PACKING_VERSION;

/// JSON metadata written next to a chain CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSidecar {
    pub packing_version: u32,
    pub run: RunInfo,
    pub model: Option<ModelChoice>,
    pub priors: Option<PriorSpec>,
    /// Newick text of the fixed topology with the branch order used by the
    /// `bl.i` columns.
    pub tree: Option<String>,
    pub data_fingerprint: Option<String>,
}

impl ChainSidecar {
    pub fn for_chain(chain: &Chain) -> Self {
        Self {
            packing_version: PACKING_VERSION,
            run: chain.info.clone(),
            model: None,
            priors: None,
            tree: None,
            data_fingerprint: None,
        }
    }
}

fn io_err(what: &str, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{what}: {e}"))
}

/// `chain.csv` → `chain.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the header (packing order, `log_post`, `log_lik`) and one row per
/// draw with 17 significant digits.
pub fn write_chain_csv<W: Write>(writer: W, chain: &Chain) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = chain.columns.clone();
    header.push("log_post".into());
    header.push("log_lik".into());
    w.write_record(&header)
        .map_err(|e| io_err("writing chain", e))?;
    for t in 0..chain.len() {
        let row = chain
            .draw(t)
            .iter()
            .chain([&chain.log_post[t], &chain.log_lik[t]])
            .map(|v| format!("{v:.16e}"));
        w.write_record(row)
            .map_err(|e| io_err("writing chain", e))?;
    }
    w.flush().map_err(|e| io_err("writing chain", e))?;
    Ok(())
}

pub fn read_chain_csv<R: Read>(reader: R) -> Result<Chain> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| io_err("reading chain", e))?
        .iter()
        .map(str::to_string)
        .collect();
    let n = header.len();
    if n < 3 || header[n - 2] != "log_post" || header[n - 1] != "log_lik" {
        return Err(Error::InvalidInput(
            "chain CSV must end with log_post,log_lik columns".into(),
        ));
    }
    let d = n - 2;
    let mut chain = Chain {
        columns: header[..d].to_vec(),
        draws: Vec::new(),
        log_post: Vec::new(),
        log_lik: Vec::new(),
        info: RunInfo {
            seed: None,
            burn_in: 0,
            thin: 1,
            acceptance_rate: None,
            proposal_scales: Vec::new(),
        },
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err("reading chain", e))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| io_err(&format!("chain row {}", i + 1), e))?;
        if vals.len() != n {
            return Err(Error::InvalidInput(format!(
                "chain row {} has {} fields, expected {n}",
                i + 1,
                vals.len()
            )));
        }
        chain.draws.extend_from_slice(&vals[..d]);
        chain.log_post.push(vals[d]);
        chain.log_lik.push(vals[d + 1]);
    }
    Ok(chain)
}

pub fn write_chain(csv_path: &Path, chain: &Chain, sidecar: &ChainSidecar) -> Result<()> {
    let f =
        std::fs::File::create(csv_path).map_err(|e| io_err(&csv_path.display().to_string(), e))?;
    write_chain_csv(std::io::BufWriter::new(f), chain)?;
    let json =
        serde_json::to_string_pretty(sidecar).map_err(|e| io_err("serializing sidecar", e))?;
    let side = sidecar_path(csv_path);
    std::fs::write(&side, json + "\n").map_err(|e| io_err(&side.display().to_string(), e))
}

/// Reads a chain CSV and, if present, its JSON sidecar.
pub fn read_chain(csv_path: &Path) -> Result<(Chain, Option<ChainSidecar>)> {
    let f =
        std::fs::File::open(csv_path).map_err(|e| io_err(&csv_path.display().to_string(), e))?;
    let mut chain = read_chain_csv(std::io::BufReader::new(f))?;
    let side = sidecar_path(csv_path);
    if !side.exists() {
        return Ok((chain, None));
    }
    let text =
        std::fs::read_to_string(&side).map_err(|e| io_err(&side.display().to_string(), e))?;
    let sidecar: ChainSidecar =
        serde_json::from_str(&text).map_err(|e| io_err(&side.display().to_string(), e))?;
    if sidecar.packing_version != PACKING_VERSION {
        return Err(Error::InvalidInput(format!(
            "chain uses packing version {}, this build reads {PACKING_VERSION}",
            sidecar.packing_version
        )));
    }
    chain.info = sidecar.run.clone();
    Ok((chain, Some(sidecar)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let chain = Chain {
            columns: vec!["bl.0".into(), "bl.1".into()],
            draws: vec![0.1, -1.0 / 3.0, 1e-300, std::f64::consts::PI],
            log_post: vec![-12.345678901234567, -1e5 / 7.0],
            log_lik: vec![-3.0, -2.0 / 3.0],
            info: RunInfo {
                seed: None,
                burn_in: 0,
                thin: 1,
                acceptance_rate: None,
                proposal_scales: vec![],
            },
        };
        let mut buf = Vec::new();
        write_chain_csv(&mut buf, &chain).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bl.0,bl.1,log_post,log_lik\n"));
        assert_eq!(read_chain_csv(buf.as_slice()).unwrap(), chain);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_chain_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_chain_csv("a,log_post,log_lik\n1,2\n".as_bytes()).is_err());
    }
}
