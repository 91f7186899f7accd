//! Coefficient files and CSV helpers.
//!
//! A coefficient file is line-oriented text: `#` header lines of the form
//! `# key = value`, followed by one coefficient per line, all of `c_1`, then
//! `c_2`, and so on, in graded-lex basis order.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::CoefficientBlock;
use crate::basis::basis_count;
use crate::error::{Error, Result};
use crate::quadrature::BoxDomain;

pub const FORMAT_VERSION: u32 = 1;
pub const BASIS_ORDERING: &str = "graded-lex";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFile {
    pub n: usize,
    pub d: usize,
    pub degree: u32,
    pub domain: BoxDomain,
    pub fingerprint: String,
    pub coefficients: CoefficientBlock,
}

impl CoefficientFile {
    pub fn new(
        domain: &BoxDomain,
        degree: u32,
        fingerprint: &str,
        coefficients: &CoefficientBlock,
    ) -> Result<Self> {
        let d = domain.dim();
        let nb = basis_count(d, degree)?;
        if coefficients.basis_len() != nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                got: coefficients.basis_len(),
                context: "coefficient block length vs basis count",
            });
        }
        Ok(CoefficientFile {
            n: coefficients.blocks(),
            d,
            degree,
            domain: domain.clone(),
            fingerprint: fingerprint.to_string(),
            coefficients: coefficients.clone(),
        })
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "# format = {FORMAT_VERSION}");
        let _ = writeln!(s, "# n = {}", self.n);
        let _ = writeln!(s, "# d = {}", self.d);
        let _ = writeln!(s, "# M = {}", self.degree);
        let _ = writeln!(s, "# domain_lo = {}", join(&self.domain.lo));
        let _ = writeln!(s, "# domain_hi = {}", join(&self.domain.hi));
        let _ = writeln!(s, "# basis = {BASIS_ORDERING}");
        let _ = writeln!(s, "# fingerprint = {}", self.fingerprint);
        for v in self.coefficients.as_slice() {
            let _ = writeln!(s, "{}", fmt_f64(*v));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = std::collections::BTreeMap::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("line {}: header without `=`", lineno + 1)))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                let v: f64 = line
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad number `{line}`", lineno + 1)))?;
                values.push(v);
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Format(format!("missing header `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("header `{k}` is not an integer")))
        };
        let vec = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("header `{k}` has a bad number"))))
                .collect()
        };
        let version = num("format")?;
        if version != FORMAT_VERSION as usize {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        if get("basis")? != BASIS_ORDERING {
            return Err(Error::Format(format!("basis ordering must be `{BASIS_ORDERING}`")));
        }
        let (n, d) = (num("n")?, num("d")?);
        let degree = u32::try_from(num("M")?).map_err(|_| Error::Format("M out of range".into()))?;
        let domain = BoxDomain::new(vec("domain_lo")?, vec("domain_hi")?)
            .map_err(|e| Error::Format(format!("domain: {e}")))?;
        if domain.dim() != d {
            return Err(Error::Format(format!("domain has dimension {}, header d = {d}", domain.dim())));
        }
        let nb = basis_count(d, degree)?;
        if values.len() != nb * n {
            return Err(Error::Format(format!(
                "expected {} coefficients (N = {nb}, n = {n}), found {}",
                nb * n,
                values.len()
            )));
        }
        Ok(CoefficientFile {
            n,
            d,
            degree,
            domain,
            fingerprint: get("fingerprint")?,
            coefficients: CoefficientBlock::from_vec(nb, n, values)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Quote a CSV field if it contains a comma, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write a CSV with a header row; values are written with [`fmt_f64`].
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(values: Vec<f64>, n: usize) -> CoefficientFile {
        let nb = values.len() / n;
        CoefficientFile::new(
            &BoxDomain::symmetric(2, 1.5).unwrap(),
            match nb {
                2 => 1,
                5 => 2,
                _ => 3,
            },
            "00ff00ff00ff00ff",
            &CoefficientBlock::from_vec(nb, n, values).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("[-1,1]^2"), "\"[-1,1]^2\"");
        assert_eq!(csv_field("a\"b"), "\"a\"\"b\"");
    }

    #[test]
    fn header_layout() {
        let f = sample((0..10).map(|k| k as f64 / 7.0).collect(), 2);
        let text = f.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# format = 1");
        assert!(lines.contains(&"# basis = graded-lex"));
        assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 10);
        assert_eq!(CoefficientFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn rejects_count_mismatch_and_bad_headers() {
        let text = sample(vec![1.0; 10], 2).to_text();
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(CoefficientFile::parse(&truncated), Err(Error::Format(_))));
        assert!(CoefficientFile::parse(&text.replace("graded-lex", "lex")).is_err());
        assert!(CoefficientFile::parse(&text.replace("# format = 1", "# format = 9")).is_err());
        assert!(CoefficientFile::parse(&text.replace("# n = 2", "# n = x")).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        let f = sample(vec![f64::MIN_POSITIVE, -0.0, 1e308, -1.0 / 3.0, 5e-324], 1);
        f.write(&p).unwrap();
        let back = CoefficientFile::read(&p).unwrap();
        for (a, b) in back.coefficients.as_slice().iter().zip(f.coefficients.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(bits in proptest::collection::vec(any::<u64>(), 18)) {
            let values: Vec<f64> = bits
                .iter()
                .map(|b| f64::from_bits(*b))
                .map(|v| if v.is_finite() { v } else { 0.5 })
                .collect();
            let f = sample(values, 2);
            let back = CoefficientFile::parse(&f.to_text()).unwrap();
            for (a, b) in back.coefficients.as_slice().iter().zip(f.coefficients.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.domain, f.domain);
        }
    }
}
