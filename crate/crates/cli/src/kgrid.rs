use anyhow::{bail, Context, Result};

/// Parses `lo:hi:log[:per-decade]` (log-spaced, both ends included) or a
/// comma-separated list. Values must be positive and strictly increasing.
pub fn parse_k_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("invalid k value {s:?}"))
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) || parts[2].trim() != "log" {
            bail!("k grid must look like lo:hi:log or lo:hi:log:per-decade, got {text:?}");
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let per: usize = match parts.get(3) {
            Some(p) => p
                .trim()
                .parse()
                .with_context(|| format!("invalid points per decade {p:?}"))?,
            None => 1,
        };
        if !(lo > 0.0 && hi > lo && per > 0) {
            bail!("k grid needs 0 < lo < hi and at least one point per decade");
        }
        let (a, b) = (lo.log10(), hi.log10());
        let steps = ((b - a) * per as f64 - 1e-9).ceil().max(1.0) as usize;
        (0..=steps)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64))
            .collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() || grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        bail!("k values must be positive and finite");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        bail!("k values must be strictly increasing");
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decades() {
        let g = parse_k_grid("1e-12:1e2:log").unwrap();
        assert_eq!(g.len(), 15);
        for (i, k) in g.iter().enumerate() {
            let want = 10f64.powi(i as i32 - 12);
            assert!((k / want - 1.0).abs() < 1e-12, "{k} vs {want}");
        }
        assert_eq!(parse_k_grid("1:100:log:2").unwrap().len(), 5);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(parse_k_grid("1e-3, 0.5,2").unwrap(), vec![1e-3, 0.5, 2.0]);
        for bad in [
            "",
            "1,1",
            "2,1",
            "-1,2",
            "1:0.1:log",
            "1:10:lin",
            "a,b",
            "1:10:log:0",
        ] {
            assert!(parse_k_grid(bad).is_err(), "{bad}");
        }
    }
}
